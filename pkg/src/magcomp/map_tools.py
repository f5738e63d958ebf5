"""Magnetic anomaly maps: FFT upward continuation, interpolation, gradients."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RectBivariateSpline

from magcomp._io import fmt, write_text_atomic
from magcomp.errors import DataError, NumericalError

_UNIFORM_RTOL = 1e-6


def _check_axis(v, name):
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size < 2:
        raise DataError(f"{name} must be a vector with at least 2 entries")
    step = np.diff(v)
    if np.any(step <= 0):
        raise DataError(f"{name} must be strictly ascending")
    if np.max(np.abs(step - step.mean())) > _UNIFORM_RTOL * abs(step.mean()):
        raise DataError(f"{name} is not uniformly spaced")
    return v


@dataclass(frozen=True)
class AnomalyMap:
    """Regular lat/lon grid of anomaly values in nT.

    ``values[j, i]`` sits at ``(lon_deg[i], lat_deg[j])``. ``dx_m``/``dy_m``
    are the east/north grid spacings in meters used for wavenumbers.
    """

    values: np.ndarray
    lon_deg: np.ndarray
    lat_deg: np.ndarray
    dx_m: float
    dy_m: float
    alt_m: float = 0.0

    def __post_init__(self):
        lon = _check_axis(self.lon_deg, "lon_deg")
        lat = _check_axis(self.lat_deg, "lat_deg")
        values = np.asarray(self.values, dtype=float)
        if values.shape != (lat.size, lon.size):
            raise DataError(f"values shape {values.shape} != (len(lat), len(lon)) = "
                            f"{(lat.size, lon.size)}")
        if not (self.dx_m > 0 and self.dy_m > 0):
            raise DataError("grid spacings must be positive")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "lon_deg", lon)
        object.__setattr__(self, "lat_deg", lat)

    @property
    def shape(self):
        return self.values.shape

    def with_values(self, values, alt_m=None) -> "AnomalyMap":
        return AnomalyMap(values, self.lon_deg, self.lat_deg, self.dx_m, self.dy_m,
                          self.alt_m if alt_m is None else alt_m)


def create_K(ny: int, nx: int, dx_m: float, dy_m: float) -> np.ndarray:
    """Radial angular wavenumber grid (rad/m) matching ``numpy.fft.fft2`` layout."""
    if ny < 2 or nx < 2:
        raise DataError("create_K needs at least 2 samples per axis")
    if not (dx_m > 0 and dy_m > 0):
        raise DataError("create_K needs positive spacings")
    kx = 2 * np.pi * np.fft.fftfreq(nx, d=dx_m)
    ky = 2 * np.pi * np.fft.fftfreq(ny, d=dy_m)
    return np.sqrt(kx[None, :] ** 2 + ky[:, None] ** 2)


def upward_fft(amap: AnomalyMap, dz_m: float, pad: bool = False,
               allow_downward: bool = False, kcut: float | None = None) -> AnomalyMap:
    """Continue a map upward by ``dz_m`` meters in the wavenumber domain.

    With ``pad`` the grid is mirror-extended to twice its size on each axis
    before the transform. The even extension is periodic without jumps, and
    continuation of a mirror-symmetric grid stays mirror-symmetric, so
    repeated padded continuations compose exactly.

    Downward continuation (``dz_m < 0``) amplifies high wavenumbers and is
    refused unless ``allow_downward`` is set, in which case ``kcut`` (rad/m)
    is mandatory and all wavenumbers above it are zeroed.
    """
    if dz_m < 0:
        if not allow_downward:
            raise DataError("downward continuation (dz < 0) requires allow_downward")
        if kcut is None or kcut <= 0:
            raise DataError("downward continuation requires a positive wavenumber cutoff")
    values = amap.values
    if np.isnan(values).any():
        raise DataError("upward_fft: map contains NaN")
    ny, nx = values.shape
    grid = np.pad(values, ((0, ny), (0, nx)), mode="symmetric") if pad else values

    k = create_K(grid.shape[0], grid.shape[1], amap.dx_m, amap.dy_m)
    gain = np.exp(-k * dz_m)
    if kcut is not None:
        gain = np.where(k > kcut, 0.0, gain)
    out = np.fft.ifft2(np.fft.fft2(grid) * gain)

    scale = max(np.max(np.abs(out.real)), np.finfo(float).tiny)
    if np.max(np.abs(out.imag)) > 1e-9 * scale:
        raise NumericalError("upward_fft: non-negligible imaginary residue")
    return amap.with_values(out.real[:ny, :nx], alt_m=amap.alt_m + dz_m)


class MapInterpolant:
    """Callable surrogate of an :class:`AnomalyMap` on its bounding box.

    ``bilinear`` is evaluated directly from the four surrounding nodes and
    reproduces node values exactly. ``bicubic`` is an interpolating
    bicubic spline (s=0) and needs at least 4 nodes per axis.
    """

    METHODS = ("bilinear", "bicubic")

    def __init__(self, source: AnomalyMap, method: str = "bilinear"):
        if method not in self.METHODS:
            raise DataError(f"unknown interpolation method {method!r}")
        if np.isnan(source.values).any():
            raise DataError("cannot interpolate a map containing NaN")
        self.source = source
        self.method = method
        self._spline = None
        if method == "bicubic":
            if min(source.shape) < 4:
                raise DataError("bicubic interpolation needs at least 4 nodes per axis")
            self._spline = RectBivariateSpline(source.lat_deg, source.lon_deg,
                                               source.values, kx=3, ky=3, s=0)

    def _check_inside(self, lon, lat, margin_cells=0.0):
        src = self.source
        dlon = src.lon_deg[1] - src.lon_deg[0]
        dlat = src.lat_deg[1] - src.lat_deg[0]
        lo_lon, hi_lon = src.lon_deg[0] + margin_cells * dlon, src.lon_deg[-1] - margin_cells * dlon
        lo_lat, hi_lat = src.lat_deg[0] + margin_cells * dlat, src.lat_deg[-1] - margin_cells * dlat
        # tolerate round-off at the box edge
        eps_lon, eps_lat = 1e-9 * dlon, 1e-9 * dlat
        inside = ((lon >= lo_lon - eps_lon) & (lon <= hi_lon + eps_lon)
                  & (lat >= lo_lat - eps_lat) & (lat <= hi_lat + eps_lat))
        if not np.all(inside):
            what = "too close to the map boundary" if margin_cells else "outside the map bounds"
            raise DataError(f"query point {what}")

    def _cells(self, lon, lat):
        src = self.source
        i = np.clip(np.searchsorted(src.lon_deg, lon, side="right") - 1, 0, src.lon_deg.size - 2)
        j = np.clip(np.searchsorted(src.lat_deg, lat, side="right") - 1, 0, src.lat_deg.size - 2)
        x0, x1 = src.lon_deg[i], src.lon_deg[i + 1]
        y0, y1 = src.lat_deg[j], src.lat_deg[j + 1]
        tx = (lon - x0) / (x1 - x0)
        ty = (lat - y0) / (y1 - y0)
        v = src.values
        return (v[j, i], v[j, i + 1], v[j + 1, i], v[j + 1, i + 1]), tx, ty, x1 - x0, y1 - y0

    def __call__(self, lon_deg, lat_deg):
        lon = np.asarray(lon_deg, dtype=float)
        lat = np.asarray(lat_deg, dtype=float)
        self._check_inside(lon, lat)
        if self._spline is not None:
            out = self._spline.ev(lat, lon)
        else:
            (v00, v10, v01, v11), tx, ty, _, _ = self._cells(lon, lat)
            # weight 1 on a node and exact zeros elsewhere keep node values bitwise
            out = ((1 - tx) * (1 - ty) * v00 + tx * (1 - ty) * v10
                   + (1 - tx) * ty * v01 + tx * ty * v11)
        return out[()] if np.ndim(out) == 0 else out

    def gradient_deg(self, lon_deg, lat_deg):
        """Analytic (d/dlon, d/dlat) of the interpolant in nT per degree."""
        lon = np.asarray(lon_deg, dtype=float)
        lat = np.asarray(lat_deg, dtype=float)
        if self._spline is not None:
            return self._spline.ev(lat, lon, dy=1), self._spline.ev(lat, lon, dx=1)
        (v00, v10, v01, v11), tx, ty, hx, hy = self._cells(lon, lat)
        d_lon = ((1 - ty) * (v10 - v00) + ty * (v11 - v01)) / hx
        d_lat = ((1 - tx) * (v01 - v00) + tx * (v11 - v10)) / hy
        return d_lon, d_lat


def build_interpolant(amap: AnomalyMap, method: str = "bilinear") -> MapInterpolant:
    return MapInterpolant(amap, method)


def interp_at(itp: MapInterpolant, lon_deg, lat_deg):
    """Interpolated anomaly (nT) at one or more points."""
    return itp(lon_deg, lat_deg)


def map_grad(itp: MapInterpolant, lon_deg: float, lat_deg: float) -> np.ndarray:
    """Map gradient ``(d/dlon, d/dlat)`` in nT/rad at an interior point.

    The point must be at least one grid cell away from every edge.
    """
    lon = np.asarray(lon_deg, dtype=float)
    lat = np.asarray(lat_deg, dtype=float)
    itp._check_inside(lon, lat, margin_cells=1.0)
    d_lon, d_lat = itp.gradient_deg(lon, lat)
    return np.array([d_lon, d_lat], dtype=float) * (180.0 / np.pi)


def format_map(amap: AnomalyMap) -> str:
    ny, nx = amap.shape
    lines = [" ".join([str(nx), str(ny), fmt(amap.alt_m), fmt(amap.dx_m), fmt(amap.dy_m)]),
             " ".join(fmt(v) for v in amap.lon_deg),
             " ".join(fmt(v) for v in amap.lat_deg)]
    lines += [" ".join(fmt(v) for v in row) for row in amap.values]
    return "\n".join(lines) + "\n"


def save_map(amap: AnomalyMap, path) -> None:
    write_text_atomic(path, format_map(amap))


def load_map(path) -> AnomalyMap:
    """Read the plain-text map format (header, lon line, lat line, Ny value rows)."""
    try:
        with open(path, encoding="utf-8") as fh:
            rows = [line.split() for line in fh if line.strip()]
    except FileNotFoundError:
        raise DataError(f"map file not found: {path}") from None
    if len(rows) < 3 or len(rows[0]) != 5:
        raise DataError(f"{path}: malformed map header")
    try:
        nx, ny = int(rows[0][0]), int(rows[0][1])
        alt_m, dx_m, dy_m = (float(v) for v in rows[0][2:])
        lon = np.array(rows[1], dtype=float)
        lat = np.array(rows[2], dtype=float)
        values = np.array(rows[3:], dtype=float)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None
    if lon.size != nx or lat.size != ny or values.shape != (ny, nx):
        raise DataError(f"{path}: grid dimensions do not match header ({nx} x {ny})")
    return AnomalyMap(values, lon, lat, dx_m, dy_m, alt_m)
