import numpy as np
import pytest
from dataclasses import replace

from magcomp.errors import DataError
from magcomp.evaluation import rmse_detrended
from magcomp.map_tools import AnomalyMap
from magcomp.signal import bandpass, detrend
from magcomp.simulator import (BoxPattern, NoiseSpec, SensorSpec, SimConfig,
                               rotation_nav_from_body, simulate_flight, simulate_survey_line,
                               straight_track, synthetic_anomaly_map)
from magcomp.tolles_lawson import (EDDY, PERMANENT, compensate, design_matrix_from_flux,
                                   fit_coefficients)


def test_rotation_is_orthonormal(rng):
    angles = rng.uniform(-np.pi, np.pi, (3, 50))
    r = rotation_nav_from_body(*angles)
    np.testing.assert_allclose(r @ np.swapaxes(r, -1, -2), np.broadcast_to(np.eye(3), r.shape),
                               atol=1e-14)
    np.testing.assert_allclose(np.linalg.det(r), 1.0, atol=1e-14)


def test_yaw_then_pitch_then_roll():
    # 90 deg yaw turns the nose (body x) to the west (nav y in north-west-up)
    r = rotation_nav_from_body(0.0, 0.0, np.pi / 2)
    np.testing.assert_allclose(r @ [1, 0, 0], [0, 1, 0], atol=1e-15)
    r = rotation_nav_from_body(np.pi / 2, 0.0, 0.0)
    np.testing.assert_allclose(r @ [0, 1, 0], [0, 0, 1], atol=1e-15)


def test_zero_theta_gives_earth_field_exactly():
    fr, tr = simulate_flight(SimConfig(theta_true=np.zeros(18)))
    np.testing.assert_array_equal(fr["UNCOMPMAG1"], tr.H_et_true)


def test_constant_attitude_has_no_eddy_field():
    fr, _ = simulate_flight(SimConfig(pattern=BoxPattern(kind="constant")))
    cfg = SimConfig()
    d = design_matrix_from_flux(*fr.flux("B"))
    eddy = d[:, EDDY] @ cfg.theta_true[EDDY]
    perm = d[:, PERMANENT] @ cfg.theta_true[PERMANENT]
    assert np.sqrt(np.mean(eddy ** 2)) < 1e-6 * np.sqrt(np.mean(perm ** 2))


def test_eddy_field_vanishes_with_maneuver_amplitude():
    ratios = []
    for amp in (1e-1, 1e-2, 1e-3):
        cfg = SimConfig(pattern=BoxPattern(n_legs=1, repeats=1, roll_deg=amp, pitch_deg=amp,
                                           yaw_deg=amp))
        fr, _ = simulate_flight(cfg)
        d = design_matrix_from_flux(*fr.flux("B"))
        eddy = d[:, EDDY] @ cfg.theta_true[EDDY]
        perm = d[:, PERMANENT] @ cfg.theta_true[PERMANENT]
        ratios.append(np.sqrt(np.mean(eddy ** 2)) / np.sqrt(np.mean(perm ** 2)))
    # u' is linear in the amplitude, so the ratio shrinks tenfold per step
    np.testing.assert_allclose(np.array(ratios[:-1]) / np.array(ratios[1:]), 10.0, rtol=1e-3)
    assert ratios[-1] < 1e-5


def test_closes_loop_with_fit(cal_flight):
    cfg, frame, _ = cal_flight
    c = fit_coefficients(frame["UNCOMPMAG1"], *frame.flux("B"))
    assert np.max(np.abs(c.theta - cfg.theta_true)) < 1e-6 * np.linalg.norm(cfg.theta_true)


def test_noiseless_additivity(cal_flight):
    _, frame, truth = cal_flight
    resid = frame["UNCOMPMAG1"] - truth.H_at_true - truth.H_et_true
    # exact up to the rounding of one addition at ~5e4 nT
    assert np.max(np.abs(resid)) <= 2 * np.spacing(6e4)


def test_deterministic():
    cfg = SimConfig(noise=NoiseSpec(0.1, 0.5), seed=7, model_error_nT=0.3)
    a, ta = simulate_flight(cfg)
    b, tb = simulate_flight(cfg)
    for name in a.names:
        assert a[name].tobytes() == b[name].tobytes()
    assert ta.H_et_true.tobytes() == tb.H_et_true.tobytes()
    c, _ = simulate_flight(replace(cfg, seed=8))
    assert not np.array_equal(a["UNCOMPMAG1"], c["UNCOMPMAG1"])


def test_schema_and_zero_channels(cal_flight):
    _, frame, _ = cal_flight
    for name in ("LINE", "LAT", "LONG", "PITCH", "ROLL", "AZIMUTH", "IGRFMAG1", "UNCOMPMAG1",
                 "FLUXB_X", "FLUXC_Y", "FLUXD_TOT", "CUR_COMR", "V_BATR"):
        assert name in frame
    assert not frame["CUR_FLAP"].any()
    assert frame.line_id == "1001.01"


def test_box_pattern_reverses_direction(cal_flight):
    _, frame, truth = cal_flight
    yaw = np.degrees(truth.attitude[:, 2])
    # leg headings sampled mid-way through each leg turn-free window
    legs = [yaw[int((k * 75 + 20) * 10)] for k in range(8)]
    turns = np.round(((np.diff(legs) + 180.0) % 360.0 - 180.0) / 90.0)
    assert list(turns[:3]) == [1, 1, 1] and list(turns[4:]) == [-1, -1, -1]


def test_extra_sensors_and_model_error():
    theta2 = 2 * SimConfig().theta_true
    cfg = SimConfig(extra_sensors=(SensorSpec(theta2, 0.5),))
    fr, tr = simulate_flight(cfg)
    assert "UNCOMPMAG2" in fr and tr.H_at_sensors.shape[1] == 2
    np.testing.assert_allclose(tr.H_at_sensors[:, 1], 2 * tr.H_at_sensors[:, 0], rtol=1e-12)
    assert np.std(tr.disturbance[:, 1]) > 0 and not tr.disturbance[:, 0].any()


@pytest.mark.parametrize("bad", [
    dict(fs_hz=0.5),
    dict(pattern=BoxPattern(roll_deg=0.0)),
    dict(pattern=BoxPattern(pitch_deg=45.0)),
    dict(pattern=BoxPattern(kind="figure8")),
    dict(theta_true=np.zeros(17)),
])
def test_config_validation(bad):
    with pytest.raises(DataError):
        SimConfig(**bad)


def test_aircraft_field_dominates_calibration_band():
    # calibration region: smooth, low-gradient anomaly
    quiet = synthetic_anomaly_map(amplitude_nT=50.0, seed=3)
    fr, tr = simulate_flight(SimConfig(anomaly=quiet))
    e_at = np.sum(bandpass(tr.H_at_true) ** 2)
    e_et = np.sum(bandpass(tr.H_et_true) ** 2)
    assert 10 * np.log10(e_at / e_et) >= 20.0


# --- survey lines ---

def flat_map(values_fn, n=40):
    lon = np.linspace(-76.8, -76.2, n)
    lat = np.linspace(45.3, 45.7, n)
    return AnomalyMap(values_fn(lon[None, :], lat[:, None]) * np.ones((n, n)), lon, lat,
                      1000.0, 1000.0)


def test_survey_constant_map():
    cfg = SimConfig(anomaly=flat_map(lambda lo, la: 75.0 + 0 * lo))
    lat, lon = straight_track(45.5, -76.6, 90.0, 60.0, 10.0, 200.0)
    fr, tr = simulate_survey_line(cfg, (lon, lat))
    np.testing.assert_allclose(tr.H_et_true, np.linalg.norm(cfg.earth_field_nT) + 75.0,
                               rtol=1e-15)


def test_survey_planar_map_affine_truth():
    cfg = SimConfig(anomaly=flat_map(lambda lo, la: 30.0 * lo - 12.0 * la))
    lat, lon = straight_track(45.45, -76.6, 60.0, 60.0, 10.0, 300.0)
    _, tr = simulate_survey_line(cfg, (lon, lat))
    # bilinear interpolation reproduces a planar field exactly
    expected = np.linalg.norm(cfg.earth_field_nT) + 30.0 * lon - 12.0 * lat
    np.testing.assert_allclose(tr.H_et_true, expected, rtol=0, atol=1e-9)
    # a constant-heading track is nearly linear in lon/lat over a few km
    assert np.max(np.abs(detrend(tr.H_et_true))) < 1e-3 * np.ptp(tr.H_et_true)


def test_survey_out_of_bounds():
    cfg = SimConfig(anomaly=flat_map(lambda lo, la: 0 * lo))
    lat, lon = straight_track(45.5, -76.3, 90.0, 60.0, 10.0, 600.0)
    with pytest.raises(DataError):
        simulate_survey_line(cfg, (lon, lat))


def test_survey_needs_map():
    with pytest.raises(DataError):
        simulate_survey_line(SimConfig(), (np.zeros(5), np.zeros(5)))


def test_survey_end_to_end(anomaly_map, cal_flight):
    cfg, cal, _ = cal_flight
    c = fit_coefficients(cal["UNCOMPMAG1"], *cal.flux("B"))
    lat, lon = straight_track(45.5, -76.6, 90.0, 60.0, 10.0, 300.0)
    sv = replace(cfg, anomaly=anomaly_map, pattern=BoxPattern(roll_deg=3, pitch_deg=2, yaw_deg=2))
    fr, tr = simulate_survey_line(sv, (lon, lat))
    comp = compensate(c, fr["UNCOMPMAG1"], *fr.flux("B"))
    map_signal = tr.H_et_true - np.linalg.norm(cfg.earth_field_nT)
    assert rmse_detrended(comp, map_signal) < 0.01
    assert np.ptp(map_signal) > 10.0
