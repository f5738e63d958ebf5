"""Synthetic calibration and survey flights with known ground truth.

Frames: the body frame is x forward, y port, z up; the navigation frame is
north, west, up, so the two coincide at zero attitude. Attitude is applied
as yaw, then pitch, then roll (intrinsic Z-Y-X) with right-handed
rotations, ``C_nav_from_body = Rz(yaw) @ Ry(pitch) @ Rx(roll)``. Yaw is
counter-clockwise from north seen from above; the emitted AZIMUTH channel
is the conventional clockwise heading, ``-yaw`` mod 360.

The fluxgate sees the earth field rotated into the body frame, and the
direction cosines that drive the aircraft field are taken from that
(noise-free) vector, so the Tolles-Lawson model is exact in simulation.
Optional per-sensor "model error" adds a vector disturbance that the model
cannot represent.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from magcomp.errors import DataError
from magcomp.flight_data import FlightFrame
from magcomp.geodesy import delta_east, delta_lat, delta_lon, delta_north
from magcomp.map_tools import AnomalyMap, build_interpolant
from magcomp.tolles_lawson import N_TERMS, build_design_matrix, direction_cosines

# zero-trace induced block, so this vector is the one calibration can recover
DEFAULT_THETA = np.array([
    5.0, -3.0, 8.0,                                  # permanent
    2.0, 0.5, -1.0, -3.0, 0.8, 1.0,                  # induced u1u1 u1u2 u1u3 u2u2 u2u3 u3u3
    20.0, -5.0, 10.0, 4.0, 15.0, -8.0, -6.0, 3.0, 12.0,  # eddy, row-major
])

CORE_FIELD_NT = 53000.0


def earth_field_nwu(total_nT=CORE_FIELD_NT, inclination_deg=70.0, declination_deg=-13.0):
    """Core-field vector in north-west-up axes (inclination positive down)."""
    inc, dec = np.radians(inclination_deg), np.radians(declination_deg)
    return total_nT * np.array([np.cos(inc) * np.cos(dec),
                                -np.cos(inc) * np.sin(dec),
                                -np.sin(inc)])


ZERO_CHANNELS = ("CUR_COMR", "CUR_ACHR", "CUR_ACLo", "CUR_TANK", "CUR_FLAP", "CUR_STRB",
                 "CUR_BATR", "CUR_BAT2", "V_BATR", "V_BAT2")


@dataclass(frozen=True)
class BoxPattern:
    """Calibration pattern: a box of legs flown ``repeats`` times, alternating direction.

    Each leg starts with a turn of ``turn_s`` seconds, then three equal
    segments of windowed roll, pitch and yaw oscillations at
    ``maneuver_hz``. ``kind="constant"`` holds level flight at
    ``heading0_deg`` for the same duration (a degenerate calibration).
    """

    leg_length_s: float = 75.0
    n_legs: int = 4
    repeats: int = 2
    turn_s: float = 15.0
    roll_deg: float = 10.0
    pitch_deg: float = 5.0
    yaw_deg: float = 5.0
    maneuver_hz: float = 0.3
    heading0_deg: float = 0.0
    kind: str = "box"

    @property
    def duration_s(self) -> float:
        return self.leg_length_s * self.n_legs * self.repeats


@dataclass(frozen=True)
class NoiseSpec:
    scalar_sigma_nT: float = 0.0
    flux_sigma_nT: float = 0.0


@dataclass(frozen=True)
class SensorSpec:
    """An additional scalar magnetometer (UNCOMPMAG2, UNCOMPMAG3, ...)."""

    theta: np.ndarray
    model_error_nT: float = 0.0


@dataclass(frozen=True)
class SimConfig:
    theta_true: np.ndarray = field(default_factory=lambda: DEFAULT_THETA.copy())
    earth_field_nT: np.ndarray = field(default_factory=earth_field_nwu)
    anomaly: AnomalyMap | None = None
    pattern: BoxPattern = field(default_factory=BoxPattern)
    fs_hz: float = 10.0
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    seed: int = 0
    model_error_nT: float = 0.0
    extra_sensors: tuple = ()
    start_lat_deg: float = 45.5
    start_lon_deg: float = -76.5
    alt_m: float = 3000.0
    speed_mps: float = 60.0
    line_id: str = "1001.01"
    flight_number: int = 1001

    def __post_init__(self):
        p = self.pattern
        if p.kind not in ("box", "constant"):
            raise DataError(f"unknown pattern kind {p.kind!r}")
        if not self.fs_hz > 2 * p.maneuver_hz:
            raise DataError("fs_hz must exceed twice the maneuver frequency")
        for name in ("roll_deg", "pitch_deg", "yaw_deg"):
            amp = getattr(p, name)
            if not 0.0 < amp <= 30.0:
                raise DataError(f"maneuver amplitude {name}={amp} outside (0, 30] degrees")
        if p.leg_length_s <= p.turn_s or p.n_legs < 1 or p.repeats < 1:
            raise DataError("invalid box pattern geometry")
        if np.asarray(self.theta_true).size != N_TERMS:
            raise DataError(f"theta_true must have {N_TERMS} entries")
        for s in self.extra_sensors:
            if np.asarray(s.theta).size != N_TERMS:
                raise DataError(f"sensor theta must have {N_TERMS} entries")
        if np.asarray(self.earth_field_nT).shape != (3,):
            raise DataError("earth_field_nT must be a 3-vector")
        if self.noise.scalar_sigma_nT < 0 or self.noise.flux_sigma_nT < 0:
            raise DataError("noise levels must be nonnegative")

    @property
    def sensors(self) -> list[SensorSpec]:
        return [SensorSpec(np.asarray(self.theta_true, dtype=float), self.model_error_nT),
                *self.extra_sensors]


@dataclass(frozen=True)
class SimTruth:
    """Noise-free quantities behind a simulated flight.

    ``H_at_true`` is the Tolles-Lawson field of sensor 1; ``H_at_sensors``
    and ``disturbance`` hold one column per sensor.
    """

    attitude: np.ndarray  # N x 3 (roll, pitch, yaw) rad
    H_et_true: np.ndarray
    H_at_true: np.ndarray
    flux_true: np.ndarray
    H_at_sensors: np.ndarray
    disturbance: np.ndarray


def rotation_nav_from_body(roll, pitch, yaw) -> np.ndarray:
    """Stack of ``Rz(yaw) @ Ry(pitch) @ Rx(roll)`` matrices, shape N x 3 x 3."""
    cr, sr = np.cos(roll), np.sin(roll)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cy, sy = np.cos(yaw), np.sin(yaw)
    r = np.empty(np.shape(roll) + (3, 3))
    r[..., 0, 0] = cy * cp
    r[..., 0, 1] = cy * sp * sr - sy * cr
    r[..., 0, 2] = cy * sp * cr + sy * sr
    r[..., 1, 0] = sy * cp
    r[..., 1, 1] = sy * sp * sr + cy * cr
    r[..., 1, 2] = sy * sp * cr - cy * sr
    r[..., 2, 0] = -sp
    r[..., 2, 1] = cp * sr
    r[..., 2, 2] = cp * cr
    return r


def _smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return 0.5 * (1.0 - np.cos(np.pi * x))


def _wrap_deg(a):
    return (a + 180.0) % 360.0 - 180.0


def box_attitude(pattern: BoxPattern, fs_hz: float):
    """Attitude for a calibration pattern.

    Returns ``(t, roll, pitch, yaw, course)`` with angles in radians;
    ``course`` is the yaw without the yaw maneuver, i.e. the direction of
    the ground track.
    """
    n = int(round(pattern.duration_s * fs_hz))
    t = np.arange(n) / fs_hz
    if pattern.kind == "constant":
        zero = np.zeros(n)
        course = np.full(n, np.radians(pattern.heading0_deg))
        return t, zero, zero.copy(), course, course.copy()

    n_total = pattern.n_legs * pattern.repeats
    leg = np.minimum((t // pattern.leg_length_s).astype(int), n_total - 1)
    tau = t - leg * pattern.leg_length_s

    # second, fourth, ... box is flown in the opposite direction
    step = 360.0 / pattern.n_legs
    headings = []
    for k in range(n_total):
        box, m = divmod(k, pattern.n_legs)
        sign = 1.0 if box % 2 == 0 else -1.0
        headings.append(pattern.heading0_deg + sign * step * m)
    headings = np.array(headings)
    previous = np.concatenate([[headings[0]], headings[:-1]])
    turn = _wrap_deg(headings - previous)
    heading = previous[leg] + turn[leg] * _smoothstep(tau / pattern.turn_s)

    seg_len = (pattern.leg_length_s - pattern.turn_s) / 3.0
    sigma = tau - pattern.turn_s
    seg = np.floor(sigma / seg_len).astype(int)
    local = sigma - seg * seg_len
    wave = np.sin(2 * np.pi * pattern.maneuver_hz * local) * np.sin(np.pi * local / seg_len) ** 2
    wave = np.where(sigma >= 0, wave, 0.0)
    roll = np.where(seg == 0, np.radians(pattern.roll_deg) * wave, 0.0)
    pitch = np.where(seg == 1, np.radians(pattern.pitch_deg) * wave, 0.0)
    course = np.radians(heading)
    yaw = course + np.where(seg == 2, np.radians(pattern.yaw_deg) * wave, 0.0)
    return t, roll, pitch, yaw, course


def integrate_track(yaw, fs_hz, start_lat_deg, start_lon_deg, speed_mps):
    """Dead-reckon lat/lon (deg) for constant ground speed along ``yaw``."""
    n = yaw.size
    lat = np.empty(n)
    lon = np.empty(n)
    lat[0], lon[0] = np.radians(start_lat_deg), np.radians(start_lon_deg)
    d = speed_mps / fs_hz
    north = d * np.cos(yaw)
    east = -d * np.sin(yaw)
    for i in range(1, n):
        lat[i] = lat[i - 1] + delta_lat(north[i - 1], lat[i - 1])
        lon[i] = lon[i - 1] + delta_lon(east[i - 1], lat[i - 1])
    return np.degrees(lat), np.degrees(lon)


def straight_track(start_lat_deg, start_lon_deg, heading_deg, speed_mps, fs_hz, duration_s):
    """Straight constant-speed track; ``heading_deg`` is clockwise from north."""
    n = int(round(duration_s * fs_hz))
    yaw = np.full(n, -np.radians(heading_deg))
    return integrate_track(yaw, fs_hz, start_lat_deg, start_lon_deg, speed_mps)


def _track_heading(lat_deg, lon_deg):
    lat = np.radians(lat_deg)
    dn = delta_north(np.gradient(lat), lat)
    de = delta_east(np.gradient(np.radians(lon_deg)), lat)
    return np.unwrap(np.arctan2(-de, dn))  # ccw yaw


def _disturbance_signal(rng, t, n_tones=8):
    freqs = rng.uniform(0.05, 1.0, n_tones)
    phases = rng.uniform(0.0, 2 * np.pi, n_tones)
    s = np.sin(2 * np.pi * freqs[:, None] * t[None, :] + phases[:, None]).sum(axis=0)
    return s / np.sqrt(np.mean(s ** 2))


def _forward(cfg: SimConfig, t, roll, pitch, yaw, lat_deg, lon_deg, alt_m, h_et):
    n = t.size
    c = rotation_nav_from_body(roll, pitch, yaw)
    earth = np.asarray(cfg.earth_field_nT, dtype=float)
    flux_true = np.einsum("nji,j->ni", c, earth)  # C^T @ earth
    u = direction_cosines(*flux_true.T)
    delta = build_design_matrix(u)

    sensors = cfg.sensors
    seeds = np.random.SeedSequence(cfg.seed).spawn(2 * len(sensors) + 3)
    h_at = np.column_stack([delta @ np.asarray(s.theta, dtype=float) for s in sensors])
    dist = np.zeros_like(h_at)
    for k, s in enumerate(sensors):
        if s.model_error_nT:
            rng = np.random.default_rng(seeds[2 * k + 1])
            direction = rng.standard_normal(3)
            direction /= np.linalg.norm(direction)
            dist[:, k] = s.model_error_nT * _disturbance_signal(rng, t) * (u @ direction)

    channels = {
        "LINE": np.full(n, float(cfg.line_id)),
        "FLT": np.full(n, float(cfg.flight_number)),
        "LAT": lat_deg,
        "LONG": lon_deg,
        "UTM-Z": alt_m,
        "BARO": alt_m,
        "ROLL": np.degrees(roll),
        "PITCH": np.degrees(pitch),
        "AZIMUTH": np.mod(-np.degrees(yaw), 360.0),
        "IGRFMAG1": h_et.copy(),
    }
    for k in range(len(sensors)):
        rng = np.random.default_rng(seeds[2 * k])
        noise = rng.standard_normal(n) * cfg.noise.scalar_sigma_nT
        channels[f"UNCOMPMAG{k + 1}"] = h_et + h_at[:, k] + dist[:, k] + noise
    for j, name in enumerate("BCD"):
        rng = np.random.default_rng(seeds[2 * len(sensors) + j])
        flux = flux_true + rng.standard_normal((n, 3)) * cfg.noise.flux_sigma_nT
        for ax, col in zip("XYZ", flux.T):
            channels[f"FLUX{name}_{ax}"] = col
        channels[f"FLUX{name}_TOT"] = np.linalg.norm(flux, axis=1)
    for name in ZERO_CHANNELS:
        channels[name] = np.zeros(n)

    frame = FlightFrame(t, channels, cfg.fs_hz, cfg.line_id)
    truth = SimTruth(
        attitude=np.column_stack([roll, pitch, yaw]),
        H_et_true=h_et,
        H_at_true=h_at[:, 0].copy(),
        flux_true=flux_true,
        H_at_sensors=h_at,
        disturbance=dist,
    )
    return frame, truth


def _core_magnitude(cfg):
    return float(np.linalg.norm(cfg.earth_field_nT))


def simulate_flight(cfg: SimConfig):
    """Calibration flight over the configured pattern; returns (frame, truth)."""
    t, roll, pitch, yaw, course = box_attitude(cfg.pattern, cfg.fs_hz)
    # yaw oscillations do not steer the ground track
    lat, lon = integrate_track(course, cfg.fs_hz, cfg.start_lat_deg, cfg.start_lon_deg,
                               cfg.speed_mps)
    h_et = np.full(t.size, _core_magnitude(cfg))
    if cfg.anomaly is not None:
        h_et = h_et + build_interpolant(cfg.anomaly)(lon, lat)
    alt = np.full(t.size, cfg.alt_m)
    return _forward(cfg, t, roll, pitch, yaw, lat, lon, alt, h_et)


def simulate_survey_line(cfg: SimConfig, track):
    """Survey line along ``track = (lon_deg, lat_deg[, alt_m])`` over ``cfg.anomaly``.

    Attitude follows the track heading with continuous small roll, pitch
    and yaw oscillations (amplitudes from ``cfg.pattern``, staggered
    frequencies around ``maneuver_hz``). The map is sampled as given, so
    it should already be at flight altitude (see ``upward_fft``); the
    ``alt_m`` values only fill the altitude channels.
    """
    if cfg.anomaly is None:
        raise DataError("survey simulation needs an anomaly map")
    lon = np.asarray(track[0], dtype=float)
    lat = np.asarray(track[1], dtype=float)
    alt = (np.asarray(track[2], dtype=float) if len(track) > 2
           else np.full(lon.size, cfg.alt_m))
    if not (lon.shape == lat.shape == alt.shape) or lon.size < 3:
        raise DataError("track vectors must share a length of at least 3")
    itp = build_interpolant(cfg.anomaly)
    h_et = _core_magnitude(cfg) + itp(lon, lat)

    p = cfg.pattern
    t = np.arange(lon.size) / cfg.fs_hz
    f = p.maneuver_hz
    roll = np.radians(p.roll_deg) * np.sin(2 * np.pi * f * t)
    pitch = np.radians(p.pitch_deg) * np.sin(2 * np.pi * 0.77 * f * t + 1.0)
    yaw = _track_heading(lat, lon) + np.radians(p.yaw_deg) * np.sin(2 * np.pi * 1.31 * f * t + 2.0)
    return _forward(cfg, t, roll, pitch, yaw, lat, lon, alt, h_et)


def with_seed(cfg: SimConfig, seed: int) -> SimConfig:
    return replace(cfg, seed=int(seed))


def synthetic_anomaly_map(center_lat_deg=45.5, center_lon_deg=-76.5, nx=128, ny=128,
                          spacing_m=200.0, alt_m=0.0, n_sources=12, amplitude_nT=300.0,
                          seed=0) -> AnomalyMap:
    """Smooth random anomaly grid built from Gaussian bumps of a few km width."""
    rng = np.random.default_rng(seed)
    lat0 = np.radians(center_lat_deg)
    dlat = np.degrees(delta_lat(spacing_m, lat0))
    dlon = np.degrees(delta_lon(spacing_m, lat0))
    lon = center_lon_deg + dlon * (np.arange(nx) - (nx - 1) / 2)
    lat = center_lat_deg + dlat * (np.arange(ny) - (ny - 1) / 2)
    x = spacing_m * (np.arange(nx) - (nx - 1) / 2)
    y = spacing_m * (np.arange(ny) - (ny - 1) / 2)
    xx, yy = np.meshgrid(x, y)
    values = np.zeros((ny, nx))
    half = spacing_m * max(nx, ny) / 2
    for _ in range(n_sources):
        cx, cy = rng.uniform(-half, half, 2)
        width = rng.uniform(1500.0, 5000.0)
        amp = rng.uniform(-1.0, 1.0) * amplitude_nT
        values += amp * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * width ** 2))
    return AnomalyMap(values, lon, lat, spacing_m, spacing_m, alt_m)
