"""Signal primitives: zero-phase bandpass, central differences, detrending."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.signal

from magcomp.errors import DataError

DEFAULT_PASS1_HZ = 0.1
DEFAULT_PASS2_HZ = 0.9
DEFAULT_FS_HZ = 10.0
DEFAULT_ORDER = 4


@dataclass(frozen=True)
class BandpassSpec:
    """Passband edges, sample rate and (even) filter order."""

    pass1_hz: float = DEFAULT_PASS1_HZ
    pass2_hz: float = DEFAULT_PASS2_HZ
    fs_hz: float = DEFAULT_FS_HZ
    order: int = DEFAULT_ORDER

    def __post_init__(self):
        if not 0.0 < self.pass1_hz < self.pass2_hz < self.fs_hz / 2.0:
            raise DataError(
                f"invalid band: need 0 < pass1 < pass2 < fs/2, got "
                f"pass1={self.pass1_hz}, pass2={self.pass2_hz}, fs={self.fs_hz}"
            )
        if self.order <= 0 or self.order % 2:
            raise DataError(f"filter order must be a positive even integer, got {self.order}")

    @property
    def padlen(self) -> int:
        return 3 * self.order

    def sos(self) -> np.ndarray:
        # butter(n, band) yields a filter of total order 2n
        return scipy.signal.butter(
            self.order // 2, [self.pass1_hz, self.pass2_hz],
            btype="bandpass", fs=self.fs_hz, output="sos",
        )


def _as_clean_vector(x, min_len: int, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DataError(f"{what}: expected a 1-D vector, got shape {x.shape}")
    if x.size < min_len:
        raise DataError(f"{what}: need at least {min_len} samples, got {x.size}")
    if np.isnan(x).any():
        raise DataError(f"{what}: input contains NaN")
    return x


def bandpass(x, spec: BandpassSpec | None = None) -> np.ndarray:
    """Zero-phase Butterworth bandpass.

    The filter runs forward-backward with mirror padding of ``3 * order``
    samples. The forward-backward and backward-forward results are averaged,
    which makes the operator exactly symmetric under time reversal (a single
    filtfilt pass is not, because of its edge initial conditions).

    Parameters
    ----------
    x : array_like
        Real samples, no NaN, length greater than ``3 * order``.
    spec : BandpassSpec, optional
        Defaults to 0.1-0.9 Hz at 10 Hz, order 4.

    Returns
    -------
    numpy.ndarray
        Filtered samples, same length as ``x``.
    """
    spec = spec or BandpassSpec()
    x = _as_clean_vector(x, spec.padlen + 1, "bandpass")
    sos = spec.sos()

    def fwd_bwd(v):
        return scipy.signal.sosfiltfilt(sos, v, padtype="even", padlen=spec.padlen)

    return 0.5 * (fwd_bwd(x) + fwd_bwd(x[::-1])[::-1])


def bandpass_columns(m, spec: BandpassSpec | None = None) -> np.ndarray:
    """Apply :func:`bandpass` to every column of a 2-D array."""
    m = np.asarray(m, dtype=float)
    return np.column_stack([bandpass(m[:, j], spec) for j in range(m.shape[1])])


def central_fdm(x) -> np.ndarray:
    """Per-sample gradient: central differences inside, one-sided at the ends."""
    x = _as_clean_vector(x, 3, "central_fdm")
    return np.gradient(x, edge_order=1)


def detrend(x) -> np.ndarray:
    """Remove the least-squares line (mean and slope over sample index)."""
    x = _as_clean_vector(x, 2, "detrend")
    return scipy.signal.detrend(x, type="linear")
