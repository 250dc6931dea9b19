"""Command-line entry point: ``midair-texture <subcommand> ...``.

Exit codes: 0 success, 2 usage or schema error, 3 domain error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, field, geometry, psychophys, session, stimulus, synthesis

OUT_ENV = "MIDAIR_TEXTURE_OUT"
EXIT_OK, EXIT_USAGE, EXIT_DOMAIN = 0, 2, 3

log = logging.getLogger("midair_texture")


class UsageError(Exception):
    pass


class DomainError(Exception):
    pass


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _spec_from_args(args) -> stimulus.StimulusSpec:
    if bool(args.preset) == bool(args.spec):
        raise UsageError("give exactly one of --preset or --spec")
    try:
        spec = stimulus.preset(args.preset) if args.preset else stimulus.load_spec(args.spec)
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from None
    except (stimulus.StimulusError, OSError) as exc:
        raise UsageError(f"bad stimulus spec: {exc}") from None
    if getattr(args, "duration", None) is not None:
        spec = spec.with_(duration=args.duration)
    return spec


def _geometry(args) -> geometry.ArrayGeometry:
    if getattr(args, "array", None):
        try:
            cfg, medium = geometry.load_array_config(args.array)
        except (OSError, geometry.ConfigurationError) as exc:
            raise UsageError(f"bad array config: {exc}") from None
        return geometry.build_array(cfg, medium)
    return geometry.build_array()


def _center(args) -> np.ndarray:
    return np.asarray(args.center_mm, float) * 1e-3


def cmd_presets(args) -> int:
    specs = stimulus.presets()
    if args.json:
        print(json.dumps({name: s.to_dict() for name, s in specs.items()}, indent=2))
        return EXIT_OK
    print(f"{'stimulus':<11} {'set':<11} {'lambda':>6} {'A_AM':>5} {'A_max':>5} {'f_LM':>5} {'r_mm':>5} {'d_mm':>5} {'N':>2} {'dur_s':>5}")
    for name, s in specs.items():
        print(f"{name:<11} {stimulus.PRESET_GROUP[name]:<11} {s.lam:>6g} {s.a_am:>5g} {s.a_max:>5g} {s.f_lm:>5g} "
              f"{s.radius * 1e3:>5g} {s.spacing * 1e3:>5g} {s.foci_count:>2d} {s.duration:>5g}")
    return EXIT_OK


def cmd_render(args) -> int:
    spec = _spec_from_args(args)
    out = _out_dir(args)
    series = stimulus.envelope_series(spec, args.rate)
    frames = stimulus.render_stimulus(spec, _center(args), args.rate)
    series.to_csv(out / "envelope.csv")
    stimulus.write_trajectory_csv(frames, out / "foci.csv")
    print(f"wrote {len(series)} envelope rows and {len(frames)} frames to {out}")
    return EXIT_OK


def cmd_field(args) -> int:
    spec = _spec_from_args(args)
    geo = _geometry(args)
    out = _out_dir(args)
    center = _center(args)
    foci = stimulus.trajectory_at(spec, center, args.t)
    amp = float(stimulus.envelope_at(spec, args.t))
    frame = stimulus.FociFrame(args.t, foci, amp)
    try:
        drive = synthesis.drive_for_frame(geo, frame, args.mode)
        grid = field.GridSpec.plane(center, args.extent_mm * 1e-3, args.step_mm * 1e-3)
        fmap = field.field_map(geo, drive, grid, source_strength=field.CALIBRATED_SOURCE_STRENGTH)
    except synthesis.SingularityError as exc:
        raise DomainError(str(exc)) from None
    fmap.to_csv(out / "field.csv")
    fmap.to_pgm(out / "field.pgm")
    peak = float(fmap.magnitude.max())
    print(f"amplitude {amp:.6g}; peak |p| {peak:.6g} Pa; wrote field.csv and field.pgm to {out}")
    return EXIT_OK


SESSION_KEYS = {"sphere_center_xz_mm", "stroke_length_cm", "stroke_speed_cmps", "tracking_rate_hz",
                "frame_rate_hz", "hand", "preset", "stimulus", "duration_s", "mode"}


def load_session_config(path) -> tuple[session.SessionConfig, stimulus.StimulusSpec, str]:
    """Session JSON: all keys optional, units in the key names.

    ``hand`` is {"type": "stationary"|"sweep"|"absent", "y_mm": ..., "speed_cmps": ...,
    "contact_window_s": [t0, t1]}; the stimulus is a ``preset`` name or an inline
    ``stimulus`` object.
    """
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read session config: {exc}") from None
    if not isinstance(doc, dict):
        raise UsageError("session config must be a JSON object")
    unknown = sorted(set(doc) - SESSION_KEYS)
    if unknown:
        raise UsageError(f"unknown session keys {unknown}; allowed: {sorted(SESSION_KEYS)}")
    try:
        hand = doc.get("hand", {})
        kind = hand.get("type", "stationary")
        y = float(hand.get("y_mm", 200.0)) * 1e-3
        if kind == "stationary":
            script = session.stationary_hand(y)
        elif kind == "sweep":
            window = hand.get("contact_window_s")
            script = session.sweeping_hand(y, speed=float(hand.get("speed_cmps", 1.8)) * 1e-2,
                                           contact_window=tuple(window) if window else None)
        elif kind == "absent":
            script = session.absent_hand(y)
        else:
            raise UsageError(f"unknown hand type {kind!r}")
        xz = doc.get("sphere_center_xz_mm", [0.0, 0.0])
        cfg = session.SessionConfig(
            sphere_center_xz=(float(xz[0]) * 1e-3, float(xz[1]) * 1e-3),
            stroke_length=float(doc.get("stroke_length_cm", 7.0)) * 1e-2,
            stroke_speed=float(doc.get("stroke_speed_cmps", 1.8)) * 1e-2,
            tracking_rate=float(doc.get("tracking_rate_hz", 90.0)),
            frame_rate=float(doc.get("frame_rate_hz", 1000.0)),
            hand_trajectory=script,
            duration=float(doc["duration_s"]) if "duration_s" in doc else None,
        )
        if "stimulus" in doc:
            spec = stimulus.StimulusSpec.from_dict(doc["stimulus"])
        else:
            spec = stimulus.preset(doc.get("preset", "S-LM"))
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from None
    except (TypeError, ValueError, IndexError) as exc:
        raise UsageError(f"bad session config: {exc}") from None
    mode = doc.get("mode", "superposition")
    if mode not in synthesis.MODES:
        raise UsageError(f"mode must be one of {synthesis.MODES}")
    return cfg, spec, mode


def cmd_session(args) -> int:
    if args.verify:
        try:
            first = Path(args.verify).read_bytes()
            again = session.encode_drive_log(*session.decode_drive_log(first))
        except session.DriveLogFormatError as exc:
            print(f"drive log invalid: {exc}", file=sys.stderr)
            return EXIT_DOMAIN
        if again != first:
            print("round-trip MISMATCH", file=sys.stderr)
            return EXIT_DOMAIN
        frames, _ = session.decode_drive_log(first)
        print(f"round-trip OK: {len(frames)} frames")
        return EXIT_OK
    if not args.config:
        raise UsageError("session needs a config file (or --verify LOG)")
    cfg, spec, mode = load_session_config(args.config)
    geo = _geometry(args)
    out = _out_dir(args)
    result = session.run_stroke_session(cfg, spec, geo, mode)
    session.write_drive_log(result, out / "drive.udf")
    result.write_tracking_csv(out / "tracking.csv")
    result.write_summary(out / "summary.json")
    print(f"duration {cfg.session_duration:.6f} s; frames {len(result.drive_frames)}; "
          f"tracking events {len(result.tracking_events)}")
    return EXIT_OK


PSYCHO_TAGS = ("exp1", "exp2", "exp3", "exp4", "exp2-fit")


def cmd_psycho(args) -> int:
    if args.experiment not in PSYCHO_TAGS:
        raise UsageError(f"unknown experiment {args.experiment!r}; valid: {', '.join(PSYCHO_TAGS)}")
    out = _out_dir(args)
    if args.experiment == "exp1":
        try:
            model = psychophys.ObserverModel(args.threshold, args.lapse, args.seed)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        run = psychophys.run_interleaved(model, args.order)
        rows = [{"series": s, "value": v, "response": r} for s, v, r in run.trials]
        psychophys.write_estimates_csv(rows, out / "exp1_trials.csv")
        psychophys.write_estimates_csv([{
            "threshold": model.threshold, "lapse": model.lapse_rate, "seed": model.seed,
            "estimate": run.estimate, "reversals": run.reversal_count,
        }], out / "exp1_estimate.csv")
        print(f"estimate {run.estimate:.4f} from {run.reversal_count} reversals over {len(run.trials)} trials")
    elif args.experiment == "exp2-fit":
        if not args.input:
            raise UsageError("exp2-fit needs --input CSV with columns stimulus,a_am,intensity")
        try:
            groups = psychophys.read_points_csv(args.input)
        except (OSError, KeyError, ValueError) as exc:
            raise UsageError(f"bad input CSV: {exc}") from None
        model = args.model
        results = []
        for label, pts in groups.items():
            try:
                fit = psychophys.fit_linear(pts) if model == "linear" else psychophys.fit_exponential(pts)
            except psychophys.FitError as exc:
                raise DomainError(f"{label}: {exc}") from None
            results.append((label, fit))
            print(f"{label}: {fit.model} params {tuple(round(p, 9) for p in fit.params)} R^2 {fit.r_squared:.9f}")
        psychophys.write_fit_csv(results, out / "exp2_fit.csv")
    else:
        sched = psychophys.schedule(args.experiment, args.seed)
        path = out / f"{args.experiment}_schedule.csv"
        sched.to_csv(path)
        print(f"{len(sched)} trials written to {path}")
    return EXIT_OK


def cmd_verify(args) -> int:
    spec = _spec_from_args(args)
    series = stimulus.envelope_series(spec, args.rate)
    if args.envelope:
        try:
            series = stimulus.EnvelopeSeries.from_csv(args.envelope, args.rate)
        except (OSError, KeyError, ValueError) as exc:
            raise UsageError(f"bad envelope CSV: {exc}") from None
    try:
        check = analysis.verify_envelope(spec, series, args.tol)
    except analysis.WindowError as exc:
        raise DomainError(str(exc)) from None
    print(check.report.to_text())
    for f in check.failures:
        print(f"FAIL {f}")
    print("PASS" if check.passed else "FAIL")
    return EXIT_OK if check.passed else EXIT_DOMAIN


def _add_spec_args(p, duration=True):
    p.add_argument("--preset", help="preset name, see `presets`")
    p.add_argument("--spec", help="stimulus JSON file")
    if duration:
        p.add_argument("--duration", type=float, help="override duration, s")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="midair-texture", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("presets", help="list the stimulus presets")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_presets)

    p = sub.add_parser("render", help="envelope and foci trajectory CSVs")
    _add_spec_args(p)
    p.add_argument("--rate", type=float, default=1000.0, help="frame rate, Hz")
    p.add_argument("--center-mm", type=float, nargs=3, default=(0.0, 200.0, 0.0))
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or .)")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("field", help="pressure map in the focal plane at one instant")
    _add_spec_args(p, duration=False)
    p.add_argument("--t", type=float, default=0.0, help="time within the stimulus, s")
    p.add_argument("--center-mm", type=float, nargs=3, default=(0.0, 200.0, 0.0))
    p.add_argument("--extent-mm", type=float, default=100.0)
    p.add_argument("--step-mm", type=float, default=1.0)
    p.add_argument("--mode", choices=synthesis.MODES, default="superposition")
    p.add_argument("--array", help="array configuration JSON")
    p.add_argument("--out")
    p.set_defaults(func=cmd_field)

    p = sub.add_parser("session", help="run a stroke session and write the drive log")
    p.add_argument("config", nargs="?", help="session JSON")
    p.add_argument("--verify", metavar="LOG", help="re-encode a UDF1 log and check it is byte-identical")
    p.add_argument("--array")
    p.add_argument("--out")
    p.set_defaults(func=cmd_session)

    p = sub.add_parser("psycho", help="staircase runs, schedules and intensity fits")
    p.add_argument("experiment", help=", ".join(PSYCHO_TAGS))
    p.add_argument("--threshold", type=float, default=0.23)
    p.add_argument("--lapse", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--order", choices=("alternate", "random"), default="alternate")
    p.add_argument("--input", help="exp2-fit: CSV with stimulus,a_am,intensity")
    p.add_argument("--model", choices=("linear", "exponential"), default="linear")
    p.add_argument("--out")
    p.set_defaults(func=cmd_psycho)

    p = sub.add_parser("verify", help="check an envelope against its stimulus spec")
    _add_spec_args(p)
    p.add_argument("--envelope", help="envelope CSV (t_s,amplitude); rendered from the stimulus if omitted")
    p.add_argument("--rate", type=float, default=1000.0)
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s",
                        stream=sys.stderr, force=True)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
