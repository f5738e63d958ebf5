"""``magcomp`` command line: simulate, calibrate, compensate, evaluate, map-upward.

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 numerical
failure (for example a singular calibration fit).
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from magcomp._io import fmt, write_text_atomic
from magcomp.errors import DataError, NumericalError
from magcomp.evaluation import evaluate_flight, format_report_csv, map_truth
from magcomp.flight_data import FlightFrame, format_flight, load_flight
from magcomp.map_tools import load_map, save_map, upward_fft
from magcomp.signal import DEFAULT_FS_HZ, BandpassSpec
from magcomp.simulator import (BoxPattern, NoiseSpec, SensorSpec, SimConfig,
                               earth_field_nwu, simulate_flight, simulate_survey_line,
                               straight_track)
from magcomp.tolles_lawson import (compensate, fit_coefficients, format_coefficients,
                                   load_coefficients)

log = logging.getLogger("magcomp")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3
SEED_ENV = "MAGCOMP_SEED"
COEFF_SUFFIXES = (".coef", ".txt")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# --- simulate config ------------------------------------------------------

_PATTERN_KEYS = {"leg_length_s": float, "n_legs": int, "repeats": int, "turn_s": float,
                 "roll_deg": float, "pitch_deg": float, "yaw_deg": float,
                 "maneuver_hz": float, "heading0_deg": float}
_SCALAR_KEYS = {"fs_hz": float, "seed": int, "model_error_nT": float,
                "start_lat_deg": float, "start_lon_deg": float, "alt_m": float,
                "speed_mps": float, "flight_number": int}
_OTHER_KEYS = {"kind", "pattern", "theta_true", "earth_field_nT", "scalar_sigma_nT",
               "flux_sigma_nT", "anomaly_map", "line_id", "survey_heading_deg",
               "survey_duration_s"}


def _floats(text, n, key):
    vals = [float(v) for v in text.replace(",", " ").split()]
    if len(vals) != n:
        raise DataError(f"config key {key}: expected {n} values, got {len(vals)}")
    return np.array(vals)


def parse_sim_config(path):
    """Read a flat ``key = value`` simulation config.

    Returns ``(SimConfig, survey)`` where ``survey`` is ``None`` for a
    calibration flight or ``(heading_deg, duration_s)`` for a survey line.
    Extra sensors are given as ``sensor<k>_theta`` and
    ``sensor<k>_model_error_nT`` with k = 2, 3, ...
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"config file not found: {path}")
    raw = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise DataError(f"{path}:{lineno}: expected key = value")
        raw[key.strip()] = val.strip()

    kwargs, pattern, sensors = {}, {}, {}
    noise = {}
    try:
        for key, val in raw.items():
            if key in _PATTERN_KEYS:
                pattern[key] = _PATTERN_KEYS[key](val)
            elif key in _SCALAR_KEYS:
                kwargs[key] = _SCALAR_KEYS[key](val)
            elif key == "pattern":
                pattern["kind"] = val
            elif key == "theta_true":
                kwargs["theta_true"] = _floats(val, 18, key)
            elif key == "earth_field_nT":
                kwargs["earth_field_nT"] = _floats(val, 3, key)
            elif key in ("scalar_sigma_nT", "flux_sigma_nT"):
                noise[key] = float(val)
            elif key == "line_id":
                kwargs["line_id"] = f"{float(val):.2f}"
            elif key.startswith("sensor") and "_" in key:
                idx, _, field = key[len("sensor"):].partition("_")
                entry = sensors.setdefault(int(idx), {})
                if field == "theta":
                    entry["theta"] = _floats(val, 18, key)
                elif field == "model_error_nT":
                    entry["model_error_nT"] = float(val)
                else:
                    raise DataError(f"unknown config key {key}")
            elif key not in _OTHER_KEYS:
                raise DataError(f"unknown config key {key}")
    except ValueError as exc:
        raise DataError(f"{path}: bad value ({exc})") from None

    if sensors:
        if sorted(sensors) != list(range(2, 2 + len(sensors))):
            raise DataError("extra sensors must be numbered 2, 3, ... without gaps")
        if any("theta" not in s for s in sensors.values()):
            raise DataError("every extra sensor needs sensor<k>_theta")
        kwargs["extra_sensors"] = tuple(SensorSpec(**sensors[k]) for k in sorted(sensors))
    if "anomaly_map" in raw:
        kwargs["anomaly"] = load_map(path.parent / raw["anomaly_map"])
    kwargs.setdefault("earth_field_nT", earth_field_nwu())
    cfg = SimConfig(pattern=BoxPattern(**pattern), noise=NoiseSpec(**noise), **kwargs)

    kind = raw.get("kind", "calibration")
    if kind == "calibration":
        return cfg, None
    if kind == "survey":
        try:
            return cfg, (float(raw.get("survey_heading_deg", 90.0)),
                         float(raw.get("survey_duration_s", 300.0)))
        except ValueError as exc:
            raise DataError(f"{path}: bad survey value ({exc})") from None
    raise DataError(f"unknown kind {kind!r}; expected calibration or survey")


def format_truth(frame: FlightFrame, truth) -> str:
    cols = {"TIME": frame.time_s,
            "ROLL_RAD": truth.attitude[:, 0], "PITCH_RAD": truth.attitude[:, 1],
            "YAW_RAD": truth.attitude[:, 2], "H_ET_TRUE": truth.H_et_true,
            "H_AT_TRUE": truth.H_at_true}
    for k in range(truth.H_at_sensors.shape[1]):
        cols[f"H_AT_TRUE{k + 1}"] = truth.H_at_sensors[:, k]
        cols[f"DISTURBANCE{k + 1}"] = truth.disturbance[:, k]
    for ax, col in zip("XYZ", truth.flux_true.T):
        cols[f"FLUX_TRUE_{ax}"] = col
    names = list(cols)
    lines = [",".join(names)]
    lines += [",".join(fmt(cols[n][i]) for n in names) for i in range(len(frame))]
    return "\n".join(lines) + "\n"


# --- subcommands ----------------------------------------------------------

def _band(args, fs):
    return BandpassSpec(args.pass1, args.pass2, fs, args.order)


def cmd_simulate(args):
    cfg, survey = parse_sim_config(args.config)
    seed = args.seed if args.seed is not None else os.environ.get(SEED_ENV)
    if seed is not None:
        cfg = replace(cfg, seed=int(seed))
    log.info("simulation seed %d", cfg.seed)
    if survey is None:
        frame, truth = simulate_flight(cfg)
    else:
        heading, duration = survey
        lat, lon = straight_track(cfg.start_lat_deg, cfg.start_lon_deg, heading,
                                  cfg.speed_mps, cfg.fs_hz, duration)
        frame, truth = simulate_survey_line(cfg, (lon, lat))
    write_text_atomic(args.out, format_flight(frame))
    if args.truth:
        write_text_atomic(args.truth, format_truth(frame, truth))
    log.info("wrote %d samples to %s", len(frame), args.out)


def cmd_calibrate(args):
    frame = load_flight(args.input, schema=[args.mag], sample_rate_hz=args.fs)
    coeffs = fit_coefficients(frame[args.mag], *frame.flux(args.flux),
                              band=_band(args, frame.sample_rate_hz), ridge_lambda=args.ridge)
    log.info("fit %s with flux %s: condition estimate %.3e", args.mag, args.flux,
             coeffs.condition)
    text = format_coefficients(coeffs)
    if args.out:
        write_text_atomic(args.out, text)
    else:
        sys.stdout.write(text)


def compensated_name(mag):
    return f"{mag}_TL"


def cmd_compensate(args):
    frame = load_flight(args.input, schema=[args.mag], sample_rate_hz=args.fs)
    coeffs = load_coefficients(args.coeffs)
    comp = compensate(coeffs, frame[args.mag], *frame.flux(args.flux))
    channels = dict(frame.channels)
    channels[compensated_name(args.mag)] = comp
    out = FlightFrame(frame.time_s, channels, frame.sample_rate_hz, frame.line_id)
    write_text_atomic(args.out, format_flight(out))


def _load_coeff_set(path, mag):
    path = Path(path)
    if path.is_dir():
        files = sorted(p for p in path.iterdir() if p.suffix in COEFF_SUFFIXES)
        if not files:
            raise DataError(f"no coefficient files in {path}")
        return {p.stem: load_coefficients(p) for p in files}
    if not path.is_file():
        raise DataError(f"coefficient file not found: {path}")
    return {mag or path.stem: load_coefficients(path)}


def cmd_evaluate(args):
    frame = load_flight(args.input, sample_rate_hz=args.fs)
    coeffs = _load_coeff_set(args.coeffs, args.mag)
    amap = load_map(args.map) if args.map else None
    if args.truth == "map" and amap is None:
        raise UsageError("--truth map requires --map")
    reports = evaluate_flight(frame, coeffs, args.truth, amap, flux=args.flux,
                              survey_alt_m=args.survey_alt, per_series=args.per_series)
    for r in reports:
        log.info("%s: rmse %.6g nT, detrended %.6g nT", r.channel, r.rmse_nT,
                 r.rmse_detrended_nT)
    write_text_atomic(args.report, format_report_csv(reports))
    if args.plot:
        truth = (frame["IGRFMAG1"] if args.truth == "stinger"
                 else map_truth(frame, amap, args.survey_alt))
        _plot(args.plot, frame, coeffs, truth, args.flux)


def _plot(path, frame, coeffs, truth, flux):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from magcomp.signal import detrend

    matplotlib.rcParams["svg.hashsalt"] = "magcomp"
    fig, ax = plt.subplots(figsize=(8, 4))
    t = frame.time_s - frame.time_s[0]
    ax.plot(t, detrend(truth), "k", lw=1.5, label="truth")
    for ch in sorted(coeffs):
        comp = compensate(coeffs[ch], frame[ch], *frame.flux(flux))
        ax.plot(t, detrend(comp), lw=0.8, label=ch)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("detrended field [nT]")
    ax.legend(loc="best", fontsize="small")
    fig.tight_layout()
    tmp = Path(path).with_name(f".{Path(path).name}.tmp")
    fig.savefig(tmp, format="svg", metadata={"Date": None})
    plt.close(fig)
    os.replace(tmp, path)


def cmd_map_upward(args):
    amap = load_map(args.input)
    if args.dz < 0 and not args.allow_downward:
        raise UsageError("negative --dz needs --allow-downward and --kcut")
    out = upward_fft(amap, args.dz, pad=args.pad, allow_downward=args.allow_downward,
                     kcut=args.kcut)
    save_map(out, args.out)


# --- parser ---------------------------------------------------------------

def build_parser():
    p = _Parser(prog="magcomp", description="Tolles-Lawson magnetic compensation toolkit")
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.add_argument("-q", "--quiet", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="generate a synthetic flight with ground truth")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--truth")
    s.add_argument("--seed", type=int, help=f"overrides config seed and ${SEED_ENV}")
    s.set_defaults(func=cmd_simulate)

    def add_flight_args(sp, need_mag=True):
        sp.add_argument("--in", dest="input", required=True)
        sp.add_argument("--mag", required=need_mag)
        sp.add_argument("--flux", default="B", choices=["B", "C", "D"])
        sp.add_argument("--fs", type=float, default=DEFAULT_FS_HZ,
                        help="sample rate (Hz), checked against TIME spacing")

    c = sub.add_parser("calibrate", help="fit Tolles-Lawson coefficients")
    add_flight_args(c)
    c.add_argument("--lambda", dest="ridge", type=float, default=0.0)
    c.add_argument("--pass1", type=float, default=BandpassSpec.pass1_hz)
    c.add_argument("--pass2", type=float, default=BandpassSpec.pass2_hz)
    c.add_argument("--order", type=int, default=BandpassSpec.order)
    c.add_argument("--out", help="coefficient file (default: stdout)")
    c.set_defaults(func=cmd_calibrate)

    m = sub.add_parser("compensate", help="remove the modelled aircraft field")
    add_flight_args(m)
    m.add_argument("--coeffs", required=True)
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_compensate)

    e = sub.add_parser("evaluate", help="detrended RMSE against a truth signal")
    add_flight_args(e, need_mag=False)
    e.add_argument("--coeffs", required=True, help="coefficient file or directory")
    e.add_argument("--truth", required=True, choices=["stinger", "map"])
    e.add_argument("--map")
    e.add_argument("--survey-alt", type=float, help="continue the map to this altitude (m)")
    e.add_argument("--per-series", action="store_true",
                   help="detrend each series separately instead of the residual")
    e.add_argument("--report", required=True)
    e.add_argument("--plot", help="write an SVG of truth vs compensated traces")
    e.set_defaults(func=cmd_evaluate)

    u = sub.add_parser("map-upward", help="upward-continue an anomaly map")
    u.add_argument("--in", dest="input", required=True)
    u.add_argument("--dz", type=float, required=True)
    u.add_argument("--out", required=True)
    u.add_argument("--pad", action="store_true")
    u.add_argument("--allow-downward", action="store_true")
    u.add_argument("--kcut", type=float)
    u.set_defaults(func=cmd_map_upward)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)

    level = logging.WARNING if args.quiet else (logging.DEBUG if args.verbose else logging.INFO)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr, force=True)
    resolved = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    resolved[SEED_ENV] = os.environ.get(SEED_ENV)
    log.info("configuration: %s", resolved)

    try:
        args.func(args)
    except UsageError as exc:
        print(f"magcomp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"magcomp: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DataError, OSError) as exc:
        print(f"magcomp: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
