"""Command line entry point: ``moment-eot run | replay | list-scenarios``."""

from __future__ import annotations

import argparse
import json
import sys

from .config import ConfigError, builtin_scenarios, load_config
from .geometry import GeometryError
from .runner import read_bboxes, replay_bboxes, run_scenario
from .ukf import FilterError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="moment-eot",
        description="Extended object tracking with moment-based random hypersurfaces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a Monte Carlo scenario")
    run.add_argument("config", help="scenario YAML file or built-in scenario name")
    run.add_argument("--runs", type=int, default=None, help="override the run count")
    run.add_argument("--seed", type=int, default=None, help="override the base seed")
    run.add_argument("--out", default=None, help="directory for track CSVs and metrics JSON")
    run.add_argument("--workers", type=int, default=1, help="worker processes for the runs")

    replay = sub.add_parser("replay", help="replay a bounding-box log through the tracker")
    replay.add_argument("bbox", help="CSV with header frame,cx,cy,w,h,theta")
    replay.add_argument("config", help="scenario YAML file or built-in scenario name")
    replay.add_argument("--runs", type=int, default=None, help="override the run count")
    replay.add_argument("--seed", type=int, default=None, help="override the base seed")
    replay.add_argument("--out", default=None, help="output directory")

    sub.add_parser("list-scenarios", help="list built-in scenario names")
    return parser


def _load(args):
    cfg = load_config(args.config)
    if args.runs is not None:
        if args.runs < 1:
            raise ConfigError("--runs: must be >= 1")
        cfg.runs = args.runs
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed: must be >= 0")
        cfg.seed = args.seed
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list-scenarios":
        for name in builtin_scenarios():
            print(name)
        return EXIT_OK
    try:
        cfg = _load(args)
        if args.command == "run":
            outcome = run_scenario(cfg, out_dir=args.out, workers=args.workers)
        else:
            try:
                records = read_bboxes(args.bbox)
            except (OSError, ValueError) as exc:
                raise ConfigError(f"bbox: {exc}") from None
            if not records:
                raise ConfigError("bbox: log contains no records")
            frames = [r.frame for r in records]
            if any(b <= a for a, b in zip(frames, frames[1:])):
                raise ConfigError("bbox: frame indices must be strictly increasing")
            outcome = replay_bboxes(records, cfg, out_dir=args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FilterError, GeometryError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(json.dumps(outcome.report.summary, indent=2, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
