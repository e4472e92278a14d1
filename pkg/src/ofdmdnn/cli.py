"""Command line interface.

Artifacts live under the ``--out`` directory::

    out/stats/<scenario_id>.json      correlation-statistics cache
    out/receivers/<scenario_id>/      trained receiver bundle
    out/results.csv                   sweep / eval results
    out/robustness.csv                mismatch-grid results
    out/report/                       charts and summary table

Exit codes: 0 success, 2 invalid config, 3 missing resource, 4 numeric
failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .config import AppConfig, load_config
from .errors import ConfigError, MissingResourceError, NumericError
from .estimators import (
    PilotPattern,
    estimate_correlation_stats,
    load_stats,
    save_stats,
)
from .experiments import (
    DETECTORS,
    SweepSpec,
    default_robustness_variations,
    emit_report,
    evaluate_ber,
    read_results,
    run_robustness_grid,
    run_sweep,
)
from .receiver import load_bundle, save_bundle, train_receiver
from .simulate import frame_rng

logger = logging.getLogger("ofdmdnn")


def _stats_path(out: Path, cfg: AppConfig) -> Path:
    return out / "stats" / f"{cfg.scenario.scenario_id}.json"


def _bundle_path(out: Path, cfg: AppConfig) -> Path:
    return out / "receivers" / cfg.scenario.scenario_id


def _load_stats_if_needed(detectors, out: Path, cfg: AppConfig):
    if "mmse" not in detectors:
        return None
    path = _stats_path(out, cfg)
    if not path.exists():
        raise MissingResourceError(
            f"correlation stats not found at {path}; run the 'stats' subcommand first"
        )
    return load_stats(path)


def _load_receiver_if_needed(detectors, out: Path, cfg: AppConfig):
    if "dnn" not in detectors:
        return None
    path = _bundle_path(out, cfg)
    if not (path / "manifest.json").exists():
        raise MissingResourceError(
            f"trained receiver not found at {path}; run the 'train' subcommand first"
        )
    return load_bundle(path)


def cmd_stats(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out)
    pattern = PilotPattern.from_frame_config(cfg.scenario.frame)
    draws = args.draws or cfg.stats_draws
    stats = estimate_correlation_stats(
        cfg.scenario.channel, pattern, draws,
        frame_rng(cfg.seed, ("stats",), 0),
        n_subcarriers=cfg.scenario.frame.n_subcarriers,
    )
    path = _stats_path(out, cfg)
    save_stats(stats, path)
    print(f"wrote correlation stats ({draws} draws) to {path}")
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out)
    rx = train_receiver(cfg.scenario, cfg.train, seed=cfg.seed,
                        log_every=args.log_every)
    path = _bundle_path(out, cfg)
    save_bundle(rx, path)
    losses = ", ".join(f"{l:.4f}" for l in rx.final_losses)
    print(f"wrote receiver bundle to {path} (final losses: {losses})")
    return 0


def _parse_detectors(arg, cfg: AppConfig):
    if not arg:
        return tuple(cfg.detectors)
    detectors = tuple(d.strip() for d in arg.split(",") if d.strip())
    for d in detectors:
        if d not in DETECTORS:
            raise ConfigError(f"unknown detector {d!r} (choose from {DETECTORS})")
    return detectors


def cmd_eval(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out)
    detectors = _parse_detectors(args.detectors, cfg)
    stats = _load_stats_if_needed(detectors, out, cfg)
    receiver = _load_receiver_if_needed(detectors, out, cfg)
    spec = SweepSpec(
        scenario=cfg.scenario, snr_grid=(args.snr,), detectors=detectors,
        min_bits=args.min_bits or cfg.min_bits, seed=cfg.seed,
    )
    points = run_sweep(spec, stats=stats, receiver=receiver,
                       out_csv=out / "results.csv", jobs=args.jobs)
    for p in points:
        print(f"{p.scenario_id} {p.detector} @ {p.snr_db} dB: "
              f"BER {p.ber:.4e} ({p.n_errors}/{p.n_bits})")
    return 0


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out)
    detectors = _parse_detectors(args.detectors, cfg)
    stats = _load_stats_if_needed(detectors, out, cfg)
    receiver = _load_receiver_if_needed(detectors, out, cfg)
    spec = SweepSpec(
        scenario=cfg.scenario, snr_grid=cfg.snr_grid, detectors=detectors,
        min_bits=args.min_bits or cfg.min_bits, seed=cfg.seed,
    )
    points = run_sweep(spec, stats=stats, receiver=receiver,
                       out_csv=out / "results.csv", jobs=args.jobs)
    print(f"sweep complete: {len(points)} points in {out / 'results.csv'}")
    return 0


def cmd_robustness(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out)
    receiver = _load_receiver_if_needed(("dnn",), out, cfg)
    points = run_robustness_grid(
        cfg.scenario, default_robustness_variations(cfg.scenario.channel),
        receiver, cfg.snr_grid, cfg.seed,
        min_bits=args.min_bits or cfg.min_bits,
        out_csv=out / "robustness.csv", jobs=args.jobs,
    )
    print(f"robustness grid complete: {len(points)} points in {out / 'robustness.csv'}")
    return 0


def cmd_report(args) -> int:
    out = Path(args.out)
    csvs = [Path(c) for c in args.csv] if args.csv else [
        p for p in (out / "results.csv", out / "robustness.csv") if p.exists()
    ]
    if not csvs:
        raise MissingResourceError(f"no results CSV found under {out}")
    points = []
    for path in csvs:
        points.extend(read_results(path))
    written = emit_report(points, out / "report")
    for path in written:
        print(f"wrote {path}")
    return 0


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    return 0 if run_selftest() else 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ofdmdnn",
        description="OFDM link simulator: LS/LMMSE baselines and a trained "
                    "neural-network receiver, with BER sweep tooling.",
    )
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="debug-level logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="scenario file (JSON/YAML)")
        p.add_argument("--out", default="artifacts", help="artifact directory")
        p.add_argument("--jobs", type=int, default=1, help="parallel workers")

    p = sub.add_parser("stats", help="build the correlation-statistics cache")
    common(p)
    p.add_argument("--draws", type=int, default=0,
                   help="override the number of channel draws")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", help="train a receiver bundle for a scenario")
    common(p)
    p.add_argument("--log-every", type=int, default=500,
                   help="progress logging interval in steps (0 silences)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate one BER point per detector")
    common(p)
    p.add_argument("--snr", type=float, required=True, help="SNR in dB")
    p.add_argument("--detectors", default="", help="comma list, e.g. ls,mmse,dnn")
    p.add_argument("--min-bits", type=int, default=0, help="override min_bits")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="run the full detector x SNR grid")
    common(p)
    p.add_argument("--detectors", default="", help="comma list, e.g. ls,mmse,dnn")
    p.add_argument("--min-bits", type=int, default=0, help="override min_bits")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("robustness",
                       help="evaluate a trained receiver under mismatched channels")
    common(p)
    p.add_argument("--min-bits", type=int, default=0, help="override min_bits")
    p.set_defaults(func=cmd_robustness)

    p = sub.add_parser("report", help="render BER charts and a summary table")
    common(p, config=False)
    p.add_argument("--csv", action="append", default=[],
                   help="explicit results CSV (repeatable)")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("selftest", help="run the built-in invariant checks")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except MissingResourceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (NumericError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
