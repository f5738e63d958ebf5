"""Detrended-RMSE scoring of compensated magnetometer channels."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from magcomp.errors import DataError
from magcomp.flight_data import FlightFrame
from magcomp.map_tools import AnomalyMap, build_interpolant, upward_fft
from magcomp.signal import detrend
from magcomp.tolles_lawson import TLCoefficients, compensate

STINGER_TRUTH = "IGRFMAG1"
TRUTH_SOURCES = ("stinger", "map")


@dataclass(frozen=True)
class EvalReport:
    channel: str
    truth_source: str
    n_samples: int
    rmse_nT: float
    rmse_detrended_nT: float


def _pair(a, b, min_len):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise DataError(f"rmse: shape mismatch {a.shape} vs {b.shape}")
    if a.size < min_len:
        raise DataError(f"rmse: need at least {min_len} samples")
    if np.isnan(a).any() or np.isnan(b).any():
        raise DataError("rmse: NaN in input")
    return a, b


def rmse(a, b) -> float:
    a, b = _pair(a, b, 1)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def rmse_detrended(candidate, truth, per_series: bool = False) -> float:
    """RMSE after removing the affine trend of the residual.

    With ``per_series`` each signal is detrended on its own before
    differencing (for comparison only; it gives the same number whenever
    both detrends are exact, since detrending is linear).
    """
    candidate, truth = _pair(candidate, truth, 2)
    if per_series:
        resid = detrend(candidate) - detrend(truth)
    else:
        resid = detrend(candidate - truth)
    return float(np.sqrt(np.mean(resid ** 2)))


def map_truth(frame: FlightFrame, amap: AnomalyMap, survey_alt_m: float | None = None,
              method: str = "bilinear") -> np.ndarray:
    """Map anomaly along the flight's LAT/LONG, optionally continued to ``survey_alt_m``."""
    if "LAT" not in frame or "LONG" not in frame:
        raise DataError("map truth needs LAT and LONG channels")
    if survey_alt_m is not None and survey_alt_m != amap.alt_m:
        amap = upward_fft(amap, survey_alt_m - amap.alt_m, pad=True)
    return build_interpolant(amap, method)(frame["LONG"], frame["LAT"])


def evaluate_flight(frame: FlightFrame, coeffs: Mapping[str, TLCoefficients],
                    truth_source: str = "stinger", anomaly_map: AnomalyMap | None = None,
                    flux: str = "B", survey_alt_m: float | None = None,
                    per_series: bool = False) -> list[EvalReport]:
    """Compensate each channel in ``coeffs`` and score it against the truth signal.

    Reports come back sorted by channel name.
    """
    if truth_source not in TRUTH_SOURCES:
        raise DataError(f"truth source must be one of {TRUTH_SOURCES}")
    if truth_source == "stinger":
        if STINGER_TRUTH not in frame:
            raise DataError(f"stinger truth needs the {STINGER_TRUTH} channel")
        truth = frame[STINGER_TRUTH]
    else:
        if anomaly_map is None:
            raise DataError("map truth needs an anomaly map")
        truth = map_truth(frame, anomaly_map, survey_alt_m)

    fx, fy, fz = frame.flux(flux)
    reports = []
    for channel in sorted(coeffs):
        comp = compensate(coeffs[channel], frame[channel], fx, fy, fz)
        reports.append(EvalReport(
            channel=channel,
            truth_source=truth_source,
            n_samples=comp.size,
            rmse_nT=rmse(comp, truth),
            rmse_detrended_nT=rmse_detrended(comp, truth, per_series=per_series),
        ))
    return reports


def rank_reports(reports) -> list[EvalReport]:
    """Best (smallest detrended RMSE) first; ties broken by channel name."""
    return sorted(reports, key=lambda r: (r.rmse_detrended_nT, r.channel))


def format_report_csv(reports) -> str:
    lines = ["channel,truth_source,n,rmse_nT,rmse_detrended_nT"]
    lines += [f"{r.channel},{r.truth_source},{r.n_samples},{r.rmse_nT!r},{r.rmse_detrended_nT!r}"
              for r in reports]
    return "\n".join(lines) + "\n"
