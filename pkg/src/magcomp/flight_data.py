"""Flight line ingestion: comma-delimited text with field-catalog headers."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from magcomp._io import fmt, write_text_atomic
from magcomp.errors import DataError
from magcomp.signal import DEFAULT_FS_HZ

log = logging.getLogger(__name__)

# field catalog spells some current/voltage channels two ways
ALIASES = {
    "CUR_COM1": "CUR_COMR",
    "CUR_BAT1": "CUR_BATR",
    "V_BAT1": "V_BATR",
}
SCALAR_MAG_PREFIXES = ("UNCOMPMAG", "COMPMAG", "LAGMAG", "DCMAG", "IGRFMAG", "OGS_MAG")
FLUX_SENSORS = ("B", "C", "D")
SAMPLE_RATE_RTOL = 0.01


def canonical_name(name: str) -> str:
    name = name.strip()
    return ALIASES.get(name, name)


def is_scalar_mag(name: str) -> bool:
    return name.startswith(SCALAR_MAG_PREFIXES)


def format_line_id(line_id) -> str:
    """Canonical ``XXXX.YY`` spelling of a line number."""
    try:
        return f"{float(line_id):.2f}"
    except (TypeError, ValueError):
        raise DataError(f"invalid line number {line_id!r}") from None


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class FlightFrame:
    """Columnar samples of one flight (or flight line).

    ``channels`` maps field names to equal-length vectors; ``TIME`` is held
    separately in ``time_s``. Arrays are read-only.
    """

    time_s: np.ndarray
    channels: Mapping[str, np.ndarray]
    sample_rate_hz: float
    line_id: str | None = None

    def __post_init__(self):
        t = _readonly(self.time_s)
        if t.ndim != 1 or t.size < 2:
            raise DataError("a flight frame needs at least 2 samples")
        if np.isnan(t).any():
            raise DataError("TIME contains NaN")
        if np.any(np.diff(t) <= 0):
            raise DataError("non-monotone time: TIME must be strictly increasing")
        chans = {}
        for name, v in self.channels.items():
            v = _readonly(v)
            if v.shape != t.shape:
                raise DataError(f"channel {name} has length {v.size}, expected {t.size}")
            chans[canonical_name(name)] = v
        if not self.sample_rate_hz > 0:
            raise DataError("sample rate must be positive")
        measured = 1.0 / np.median(np.diff(t))
        if abs(measured - self.sample_rate_hz) > SAMPLE_RATE_RTOL * self.sample_rate_hz:
            raise DataError(f"sample rate {self.sample_rate_hz} Hz inconsistent with TIME "
                            f"spacing ({measured:.6g} Hz); pass the correct rate (--fs)")
        object.__setattr__(self, "time_s", t)
        object.__setattr__(self, "channels", chans)
        if self.line_id is not None:
            object.__setattr__(self, "line_id", format_line_id(self.line_id))

    def __len__(self):
        return self.time_s.size

    def __contains__(self, name):
        name = canonical_name(name)
        return name == "TIME" or name in self.channels

    def __getitem__(self, name) -> np.ndarray:
        name = canonical_name(name)
        if name == "TIME":
            return self.time_s
        try:
            return self.channels[name]
        except KeyError:
            raise DataError(f"channel {name} not present in flight data") from None

    @property
    def names(self) -> list[str]:
        return list(self.channels)

    def flux(self, sensor: str = "B"):
        """(x, y, z) vectors of fluxgate ``sensor`` (B, C or D)."""
        sensor = sensor.upper()
        if sensor not in FLUX_SENSORS:
            raise DataError(f"unknown fluxgate {sensor!r}; expected one of {FLUX_SENSORS}")
        return tuple(self[f"FLUX{sensor}_{ax}"] for ax in "XYZ")

    def take(self, mask) -> "FlightFrame":
        chans = {k: v[mask] for k, v in self.channels.items()}
        line = self.line_id
        if "LINE" in chans and chans["LINE"].size:
            ids = {format_line_id(v) for v in chans["LINE"]}
            line = ids.pop() if len(ids) == 1 else None
        return FlightFrame(self.time_s[mask], chans, self.sample_rate_hz, line)


@dataclass(frozen=True)
class ChannelReport:
    name: str
    nan_count: int
    nan_indices: list = field(default_factory=list)
    min: float = float("nan")
    max: float = float("nan")
    truncated: bool = False


def load_flight(path, schema: Iterable[str] | None = None,
                sample_rate_hz: float = DEFAULT_FS_HZ) -> FlightFrame:
    """Load a comma-delimited flight file.

    Every column present is loaded; names in ``schema`` must be present.
    ``sample_rate_hz`` must agree with the median TIME spacing to within 1%
    (TIME is authoritative). NaN cells are kept.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"flight file not found: {path}")
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [canonical_name(h) for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = []
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: ragged row ({len(row)} fields, "
                                f"header has {len(header)})")
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric cell") from None

    if len(set(header)) != len(header):
        raise DataError(f"{path}: duplicate column names")
    if "TIME" not in header:
        raise DataError(f"{path}: missing required column TIME")
    if not any(is_scalar_mag(h) for h in header):
        raise DataError(f"{path}: no scalar magnetometer column")
    missing = [canonical_name(s) for s in (schema or ()) if canonical_name(s) not in header]
    if missing:
        raise DataError(f"{path}: missing requested columns {missing}")
    if len(rows) < 2:
        raise DataError(f"{path}: need at least 2 data rows")

    data = np.array(rows, dtype=float)
    cols = dict(zip(header, data.T))
    time_s = cols.pop("TIME")
    if np.any(np.diff(time_s) <= 0):
        raise DataError(f"{path}: non-monotone time")
    fs = float(sample_rate_hz)

    line_id = None
    if "LINE" in cols:
        ids = {format_line_id(v) for v in cols["LINE"] if not np.isnan(v)}
        if len(ids) == 1:
            line_id = ids.pop()
    frame = FlightFrame(time_s, cols, fs, line_id)
    for rep in check_channels(frame):
        if rep.nan_count:
            log.warning("%s: %d NaN value(s) in %s", path.name, rep.nan_count, rep.name)
    return frame


def format_flight(frame: FlightFrame) -> str:
    names = ["TIME", *frame.names]
    cols = [frame.time_s, *(frame.channels[n] for n in frame.names)]
    lines = [",".join(names)]
    lines += [",".join(fmt(c[i]) for c in cols) for i in range(len(frame))]
    return "\n".join(lines) + "\n"


def save_flight(frame: FlightFrame, path) -> None:
    write_text_atomic(path, format_flight(frame))


def check_channels(frame: FlightFrame, max_indices: int = 20) -> list[ChannelReport]:
    """One NaN/range report per channel (TIME excluded)."""
    reports = []
    for name, v in frame.channels.items():
        nan_idx = np.flatnonzero(np.isnan(v))
        finite = v[~np.isnan(v)]
        reports.append(ChannelReport(
            name=name,
            nan_count=int(nan_idx.size),
            nan_indices=nan_idx[:max_indices].tolist(),
            min=float(finite.min()) if finite.size else float("nan"),
            max=float(finite.max()) if finite.size else float("nan"),
            truncated=nan_idx.size > max_indices,
        ))
    return reports


def line_ids(frame: FlightFrame) -> list[str]:
    """Distinct line numbers in order of first appearance."""
    seen = {}
    for v in frame["LINE"]:
        if not np.isnan(v):
            seen.setdefault(format_line_id(v), None)
    return list(seen)


def select_line(frame: FlightFrame, line_id) -> FlightFrame:
    """Rows whose LINE equals ``line_id`` (compared as ``XXXX.YY`` strings)."""
    if "LINE" not in frame:
        raise DataError("flight data has no LINE channel")
    want = format_line_id(line_id)
    mask = np.array([not np.isnan(v) and format_line_id(v) == want for v in frame["LINE"]])
    if not mask.any():
        raise DataError(f"empty selection: line {want} not present")
    if mask.sum() < 2:
        raise DataError(f"line {want} has a single sample; a frame needs at least 2")
    return frame.take(mask)
