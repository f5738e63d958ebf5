"""WGS-84 conversions between angular and metric position errors.

All functions broadcast over numpy arrays.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from magcomp.errors import DataError

_POLE_GUARD = 1e-9


@dataclass(frozen=True)
class Ellipsoid:
    semi_major_m: float = 6378137.0
    ecc_sq: float = 6.69437999014e-3

    def __post_init__(self):
        if not 0.0 < self.ecc_sq < 1.0:
            raise DataError(f"eccentricity squared must lie in (0, 1), got {self.ecc_sq}")

    def meridian_radius(self, lat_rad):
        """Meridian radius of curvature M(lat)."""
        s2 = np.sin(lat_rad) ** 2
        return self.semi_major_m * (1.0 - self.ecc_sq) / (1.0 - self.ecc_sq * s2) ** 1.5

    def prime_vertical_radius(self, lat_rad):
        """Prime-vertical radius of curvature N(lat)."""
        s2 = np.sin(lat_rad) ** 2
        return self.semi_major_m / np.sqrt(1.0 - self.ecc_sq * s2)


WGS84 = Ellipsoid()


def _check_not_polar(lat_rad):
    if np.any(np.abs(lat_rad) >= np.pi / 2 - _POLE_GUARD):
        raise DataError("latitude too close to a pole for this conversion")


def delta_north(dlat_rad, lat_rad, ellipsoid: Ellipsoid = WGS84):
    """Latitude error (rad) -> north-south position error (m)."""
    _check_not_polar(lat_rad)
    return dlat_rad * ellipsoid.meridian_radius(lat_rad)


def delta_lat(dnorth_m, lat_rad, ellipsoid: Ellipsoid = WGS84):
    """North-south position error (m) -> latitude error (rad)."""
    _check_not_polar(lat_rad)
    return dnorth_m / ellipsoid.meridian_radius(lat_rad)


def delta_east(dlon_rad, lat_rad, ellipsoid: Ellipsoid = WGS84):
    """Longitude error (rad) -> east-west position error (m).

    Defined up to and including the poles, where the scale is zero.
    """
    lat_rad = np.asarray(lat_rad, dtype=float)
    scale = ellipsoid.prime_vertical_radius(lat_rad) * np.cos(lat_rad)
    # cos(pi/2) is ~6e-17, not 0
    scale = np.where(np.abs(lat_rad) >= np.pi / 2 - _POLE_GUARD, 0.0, scale)
    out = dlon_rad * scale
    return out[()] if out.ndim == 0 else out


def delta_lon(deast_m, lat_rad, ellipsoid: Ellipsoid = WGS84):
    """East-west position error (m) -> longitude error (rad)."""
    _check_not_polar(lat_rad)
    return deast_m / (ellipsoid.prime_vertical_radius(lat_rad) * np.cos(lat_rad))
