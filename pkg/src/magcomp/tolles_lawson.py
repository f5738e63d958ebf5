"""Tolles-Lawson aircraft interference model.

Column layout of the 18-term design matrix (fixed; coefficient files carry
these labels and are rejected if they do not match):

* permanent ``u1 u2 u3``
* induced ``u1u1 u1u2 u1u3 u2u2 u2u3 u3u3`` (upper triangle, i <= j)
* eddy ``u1'u1 u1'u2 u1'u3 u2'u1 u2'u2 u2'u3 u3'u1 u3'u2 u3'u3`` (row-major)

``ui'`` is the per-sample central difference of ``ui``; no sample-rate
factor is applied, so the eddy coefficients absorb it.

Gauge of the induced block
--------------------------
Direction cosines satisfy ``u1u1 + u2u2 + u3u3 = 1``, so adding the same
constant to the three diagonal induced coefficients only shifts the model
output by a constant. The bandpass removes constants, so the calibration
data cannot see that direction. :func:`fit_coefficients` returns the
representative whose diagonal induced coefficients sum to zero;
:func:`gauge_fix` maps any coefficient vector onto it.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from magcomp._io import fmt, write_text_atomic
from magcomp.errors import DataError, SingularFitError
from magcomp.signal import BandpassSpec, bandpass_columns, bandpass, central_fdm

PERMANENT_LABELS = ("u1", "u2", "u3")
INDUCED_PAIRS = tuple((i, j) for i in range(3) for j in range(i, 3))
EDDY_PAIRS = tuple((i, j) for i in range(3) for j in range(3))
INDUCED_LABELS = tuple(f"u{i + 1}u{j + 1}" for i, j in INDUCED_PAIRS)
EDDY_LABELS = tuple(f"u{i + 1}'u{j + 1}" for i, j in EDDY_PAIRS)
TERM_LABELS = PERMANENT_LABELS + INDUCED_LABELS + EDDY_LABELS
N_TERMS = 18

PERMANENT = slice(0, 3)
INDUCED = slice(3, 9)
EDDY = slice(9, 18)

# theta direction that the bandpassed design matrix annihilates
_TRACE_DIRECTION = np.zeros(N_TERMS)
_TRACE_DIRECTION[[3 + INDUCED_PAIRS.index((k, k)) for k in range(3)]] = 1.0 / np.sqrt(3.0)


def gauge_fix(theta) -> np.ndarray:
    """Project ``theta`` onto the zero-trace induced representative."""
    theta = np.asarray(theta, dtype=float)
    return theta - (theta @ _TRACE_DIRECTION) * _TRACE_DIRECTION


@dataclass(frozen=True)
class TLCoefficients:
    """Fitted coefficient vector plus the settings used to obtain it.

    ``condition`` is ``nan`` for coefficients that were not produced by a fit.
    """

    theta: np.ndarray
    ridge_lambda: float = 0.0
    band: BandpassSpec = field(default_factory=BandpassSpec)
    condition: float = float("nan")

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float).reshape(-1)
        if theta.size != N_TERMS:
            raise DataError(f"expected {N_TERMS} coefficients, got {theta.size}")
        if self.ridge_lambda < 0:
            raise DataError("ridge_lambda must be nonnegative")
        object.__setattr__(self, "theta", theta)

    @property
    def permanent(self) -> np.ndarray:
        return self.theta[PERMANENT]

    @property
    def induced(self) -> np.ndarray:
        return self.theta[INDUCED]

    @property
    def eddy(self) -> np.ndarray:
        return self.theta[EDDY]

    def induced_matrix(self) -> np.ndarray:
        """Symmetric 3x3 induced matrix whose quadratic form matches the fit."""
        a = np.zeros((3, 3))
        for c, (i, j) in zip(self.induced, INDUCED_PAIRS):
            if i == j:
                a[i, i] = c
            else:
                a[i, j] = a[j, i] = c / 2.0
        return a

    def eddy_matrix(self) -> np.ndarray:
        return self.eddy.reshape(3, 3)


def direction_cosines(bx, by, bz) -> np.ndarray:
    """Unit vectors of the measured field, one row per sample (N x 3)."""
    b = np.column_stack([np.asarray(v, dtype=float) for v in (bx, by, bz)])
    if np.isnan(b).any():
        raise DataError("direction_cosines: NaN in vector field")
    mag = np.linalg.norm(b, axis=1)
    if np.any(mag == 0.0):
        raise DataError("direction_cosines: zero-magnitude field sample")
    return b / mag[:, None]


def _check_lengths(*vectors):
    n = {len(v) for v in vectors}
    if len(n) != 1:
        raise DataError(f"length mismatch between inputs: {sorted(n)}")


def build_design_matrix(u) -> np.ndarray:
    """18-column design matrix from N x 3 direction cosines."""
    u = np.asarray(u, dtype=float)
    if u.ndim != 2 or u.shape[1] != 3:
        raise DataError(f"direction cosines must be N x 3, got {u.shape}")
    if u.shape[0] < 3:
        raise DataError("design matrix needs at least 3 samples")
    du = np.column_stack([central_fdm(u[:, k]) for k in range(3)])
    induced = [u[:, i] * u[:, j] for i, j in INDUCED_PAIRS]
    eddy = [du[:, i] * u[:, j] for i, j in EDDY_PAIRS]
    return np.column_stack([u, *induced, *eddy])


def design_matrix_from_flux(flux_x, flux_y, flux_z) -> np.ndarray:
    _check_lengths(flux_x, flux_y, flux_z)
    return build_design_matrix(direction_cosines(flux_x, flux_y, flux_z))


def _gauge_basis() -> np.ndarray:
    # orthonormal basis (18 x 17) of the complement of the trace direction
    q, _ = np.linalg.qr(np.column_stack([_TRACE_DIRECTION, np.eye(N_TERMS)]))
    return q[:, 1:N_TERMS]


def fit_coefficients(scalar_mag, flux_x, flux_y, flux_z,
                     band: BandpassSpec | None = None,
                     ridge_lambda: float = 0.0) -> TLCoefficients:
    """Estimate the 18 coefficients from a calibration flight.

    Both the design matrix and the scalar measurement are bandpassed, then
    ``(D^T D + lambda I) theta = D^T y`` is solved via an SVD of the stacked
    system ``[D; sqrt(lambda) I]``, never by forming ``D^T D``.

    Raises
    ------
    SingularFitError
        ``ridge_lambda == 0`` and the filtered design matrix is rank
        deficient beyond the known induced-trace direction (for example a
        flight without attitude changes).
    """
    band = band or BandpassSpec()
    if ridge_lambda < 0:
        raise DataError("ridge_lambda must be nonnegative")
    _check_lengths(scalar_mag, flux_x, flux_y, flux_z)
    y_raw = np.asarray(scalar_mag, dtype=float)
    if y_raw.size <= 50:
        raise DataError(f"calibration needs more than 50 samples, got {y_raw.size}")
    if np.isnan(y_raw).any():
        raise DataError("fit_coefficients: NaN in scalar magnetometer")

    delta = design_matrix_from_flux(flux_x, flux_y, flux_z)
    d = bandpass_columns(delta, band)
    y = bandpass(y_raw, band)

    # reduced problem excludes the unobservable induced-trace direction
    q = _gauge_basis()
    dq = d @ q
    s = np.linalg.svd(dq, compute_uv=False)
    raw_scale = np.linalg.norm(delta, 2)
    s_min = s[-1]
    condition = raw_scale / s_min if s_min > 0 else np.inf

    if ridge_lambda == 0.0:
        tol = max(dq.shape) * np.finfo(float).eps * raw_scale
        if s_min <= tol:
            raise SingularFitError(
                f"singular normal matrix (condition number estimate {condition:.3e}, "
                f"smallest filtered singular value {s_min:.3e}); "
                "calibration maneuvers do not excite all Tolles-Lawson terms. "
                "Use a maneuvering flight or a ridge penalty (lambda > 0).",
                condition,
            )
        phi, *_ = np.linalg.lstsq(dq, y, rcond=None)
        theta = q @ phi
    else:
        stacked = np.vstack([d, np.sqrt(ridge_lambda) * np.eye(N_TERMS)])
        rhs = np.concatenate([y, np.zeros(N_TERMS)])
        theta, *_ = np.linalg.lstsq(stacked, rhs, rcond=None)

    return TLCoefficients(theta=theta, ridge_lambda=float(ridge_lambda), band=band,
                          condition=float(condition))


def predict_aircraft_field(coeffs: TLCoefficients, flux_x, flux_y, flux_z) -> np.ndarray:
    """Aircraft interference on unfiltered features, ``Delta @ theta``."""
    return design_matrix_from_flux(flux_x, flux_y, flux_z) @ coeffs.theta


def compensate(coeffs: TLCoefficients, scalar_mag, flux_x, flux_y, flux_z) -> np.ndarray:
    """Scalar measurement with the modelled aircraft field removed."""
    _check_lengths(scalar_mag, flux_x, flux_y, flux_z)
    scalar_mag = np.asarray(scalar_mag, dtype=float)
    if np.isnan(scalar_mag).any():
        raise DataError("compensate: NaN in scalar magnetometer")
    return scalar_mag - predict_aircraft_field(coeffs, flux_x, flux_y, flux_z)


def format_coefficients(coeffs: TLCoefficients) -> str:
    lines = [
        f"lambda={fmt(coeffs.ridge_lambda)}",
        f"pass1={fmt(coeffs.band.pass1_hz)}",
        f"pass2={fmt(coeffs.band.pass2_hz)}",
        f"fs={fmt(coeffs.band.fs_hz)}",
    ]
    if coeffs.band.order != BandpassSpec.order:
        lines.append(f"order={coeffs.band.order}")
    lines += [f"{label},{fmt(v)}" for label, v in zip(TERM_LABELS, coeffs.theta)]
    return "\n".join(lines) + "\n"


def save_coefficients(coeffs: TLCoefficients, path) -> None:
    write_text_atomic(path, format_coefficients(coeffs))


def load_coefficients(path) -> TLCoefficients:
    """Read a coefficient file; labels must match :data:`TERM_LABELS` in order."""
    header = {}
    labels, values = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            if "=" in line and not labels:
                key, _, val = line.partition("=")
                header[key.strip()] = val.strip()
                continue
            label, sep, val = line.partition(",")
            if not sep:
                raise DataError(f"{path}:{lineno}: expected 'label,value'")
            labels.append(label.strip())
            try:
                values.append(float(val))
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric coefficient {val!r}") from None
    if tuple(labels) != TERM_LABELS:
        raise DataError(f"{path}: coefficient labels do not match the 18-term layout")
    missing = {"lambda", "pass1", "pass2", "fs"} - header.keys()
    if missing:
        raise DataError(f"{path}: missing header lines {sorted(missing)}")
    try:
        band = BandpassSpec(float(header["pass1"]), float(header["pass2"]),
                            float(header["fs"]), int(header.get("order", BandpassSpec.order)))
        lam = float(header["lambda"])
    except ValueError as exc:
        raise DataError(f"{path}: bad header value ({exc})") from None
    return TLCoefficients(theta=np.array(values), ridge_lambda=lam, band=band)
