"""Command-line entry point: synth, detect, correct, evaluate, report.

Exit status: 0 success, 1 data or validation error, 2 usage error. Diagnostics
go to stderr; results go to files under ``--out``.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import dataset as dio
from .errors import AtbqcError, EvaluationImpossibleError
from .harness import HarnessConfig, correct_dataset, detect_dataset, evaluate
from .synth import SynthParams, generate_dataset

log = logging.getLogger("atbqc")

_SYNTH_DEFAULTS = SynthParams()


def _common(p: argparse.ArgumentParser, manifest=True, config=True):
    if manifest:
        p.add_argument("--manifest", required=True, type=Path, help="dataset manifest.json")
    if config:
        p.add_argument("--config", type=Path, default=None, help="harness config (JSON); built-in defaults if omitted")
    p.add_argument("--out", required=True, type=Path, help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (per video or per fold)")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="atbqc", description=__doc__.splitlines()[0], formatter_class=fmt)
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more log output (repeatable)")
    parser.add_argument("-q", "--quiet", action="store_true", help="errors only")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a labelled synthetic dataset", formatter_class=fmt)
    s.add_argument("--out", required=True, type=Path, help="output dataset directory")
    s.add_argument("--seed", type=int, default=_SYNTH_DEFAULTS.seed, help="generator seed")
    s.add_argument("--frames", type=int, default=_SYNTH_DEFAULTS.frames_per_video, help="frames per video")
    s.add_argument("--videos-per-subject", type=int, default=_SYNTH_DEFAULTS.videos_per_subject,
                   help="videos per subject (10 subjects)")
    s.add_argument("--c1-incomplete-rate", type=float, default=_SYNTH_DEFAULTS.c1_incomplete_rate,
                   help="fraction of frames with a truncated C1")
    s.add_argument("--c1-frame-rate", type=float, default=_SYNTH_DEFAULTS.c1_frame_rate,
                   help="fraction of frames with a displaced C1")
    s.add_argument("--c2-tb-rate", type=float, default=_SYNTH_DEFAULTS.c2_tb_rate,
                   help="fraction of frames with a flattened tongue-base groove")
    s.add_argument("--c2-frame-rate", type=float, default=_SYNTH_DEFAULTS.c2_frame_rate,
                   help="fraction of frames with a truncated C2")
    s.add_argument("--amplitude", type=float, default=_SYNTH_DEFAULTS.articulation_amplitude,
                   help="articulation amplitude (px)")
    s.add_argument("--noise", type=int, default=_SYNTH_DEFAULTS.raster_noise, help="raster noise (grey levels, <= 20)")
    s.add_argument("--no-rasters", action="store_true", help="skip PGM frames")

    d = sub.add_parser("detect", help="flag erroneous frames with fixed thresholds", formatter_class=fmt)
    _common(d)

    c = sub.add_parser("correct", help="correct flagged frames", formatter_class=fmt)
    _common(c)
    c.add_argument("--flags", type=Path, default=None, help="flags.csv from detect; detection is rerun if omitted")

    e = sub.add_parser("evaluate", help="cross-validated detection, correction and metrics", formatter_class=fmt)
    _common(e)
    e.add_argument("--seed", type=int, default=None, help="fold seed (overrides the config)")

    r = sub.add_parser("report", help="render figures from evaluate output", formatter_class=fmt)
    r.add_argument("--results", required=True, type=Path, help="directory written by evaluate")
    r.add_argument("--out", type=Path, default=None, help="figure directory (defaults to --results)")
    return parser


def _config(args) -> HarnessConfig:
    return HarnessConfig.load(args.config) if args.config else HarnessConfig()


def cmd_synth(args):
    params = SynthParams(
        frames_per_video=args.frames,
        videos_per_subject=args.videos_per_subject,
        c1_incomplete_rate=args.c1_incomplete_rate,
        c1_frame_rate=args.c1_frame_rate,
        c2_tb_rate=args.c2_tb_rate,
        c2_frame_rate=args.c2_frame_rate,
        articulation_amplitude=args.amplitude,
        raster_noise=args.noise,
        paint_rasters=not args.no_rasters,
        seed=args.seed,
    )
    ds, _ = generate_dataset(params)
    path = dio.write_dataset(ds, args.out)
    log.info("wrote %s", path)


def cmd_detect(args):
    ds = dio.load_dataset(args.manifest)
    flags = detect_dataset(ds, _config(args), jobs=args.jobs)
    dio.write_flags_csv(args.out / "flags.csv", flags)
    n = sum(f.any for fl in flags.values() for f in fl)
    log.info("%d flagged frames -> %s", n, args.out / "flags.csv")


def cmd_correct(args):
    ds = dio.load_dataset(args.manifest)
    cfg = _config(args)
    if args.flags is not None:
        sparse = dio.read_flags_csv(args.flags, {v.video_id: len(v) for v in ds.videos})
        flags = {v.video_id: dio.dense_flags(sparse.get(v.video_id, {}), len(v)) for v in ds.videos}
    else:
        flags = detect_dataset(ds, cfg, jobs=args.jobs)
    corrected, entries = correct_dataset(ds, flags, cfg, jobs=args.jobs)
    dio.store_results(None, corrected, args.out)
    dio.write_log_csv(args.out / "correction_log.csv", entries)
    log.info("%d correction actions -> %s", len(entries), args.out)


def cmd_evaluate(args):
    ds = dio.load_dataset(args.manifest)
    cfg = _config(args)
    if args.seed is not None:
        cfg = HarnessConfig.from_dict({**cfg.to_dict(), "seed": args.seed})
    try:
        report = evaluate(ds, cfg=cfg, jobs=args.jobs)
    except EvaluationImpossibleError:
        # still run the pipeline so the flags and corrections are available
        flags = detect_dataset(ds, cfg, jobs=args.jobs)
        corrected, entries = correct_dataset(ds, flags, cfg, jobs=args.jobs)
        dio.write_flags_csv(args.out / "flags.csv", flags)
        dio.store_results(None, corrected, args.out)
        dio.write_log_csv(args.out / "correction_log.csv", entries)
        raise
    dio.store_results(report, None, args.out)
    entries = [e for fr in report.folds for e in fr.log]
    dio.write_log_csv(args.out / "correction_log.csv", entries)
    for name, s in report.combined_fscores().items():
        log.info("%s pooled F = %.3f (tp=%d fp=%d fn=%d)", name, s.value, s.tp, s.fp, s.fn)


def cmd_report(args):
    from .plotting import plot_error_positions, plot_metrics, read_table

    res = args.results
    out = args.out or res
    out.mkdir(parents=True, exist_ok=True)
    for name in ("metrics.csv", "error_positions.csv"):
        if not (res / name).is_file():
            raise dio.MissingFileError("evaluate output not found", res / name)
    plot_metrics(read_table(res / "metrics.csv"), out / "metrics.png")
    plot_error_positions(read_table(res / "error_positions.csv"), out / "error_positions.png")
    log.info("figures -> %s", out)


COMMANDS = {"synth": cmd_synth, "detect": cmd_detect, "correct": cmd_correct, "evaluate": cmd_evaluate,
            "report": cmd_report}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    level = logging.ERROR if args.quiet else (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s", force=True)
    if getattr(args, "jobs", 1) < 1:
        parser.print_usage(sys.stderr)
        print("atbqc: error: --jobs must be >= 1", file=sys.stderr)
        return 2
    try:
        COMMANDS[args.command](args)
    except (AtbqcError, ValueError) as exc:
        log.error("%s", exc)
        return 1
    except OSError as exc:
        log.error("%s: %s", getattr(exc, "filename", "") or "I/O error", exc.strerror or exc)
        return 1
    return 0


def main():
    sys.exit(run())
