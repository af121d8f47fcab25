"""Command-line entry point: run pipeline stages over a run directory.

Exit status: 0 on success, 1 on validation/sequencing errors, 2 on data
errors inside a stage.
"""
from __future__ import annotations

import argparse
import sys

from .pipeline import (
    STAGE_ORDER,
    ConfigError,
    StageDataError,
    load_config,
    run_stage,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="archive-rank",
        description="Rank web-archive documents from non-content evidence.",
    )
    parser.add_argument("stage", nargs="?", choices=STAGE_ORDER, help="pipeline stage to run")
    parser.add_argument("--stage", dest="stage_flag", choices=STAGE_ORDER, help="alias for the positional stage")
    parser.add_argument("--config", required=True, help="flat key=value config file")
    parser.add_argument("--run-dir", required=True, help="directory holding stage artifacts")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    stage = args.stage or args.stage_flag
    if stage is None:
        print("error: no stage given (positional or --stage)", file=sys.stderr)
        return 1
    if args.stage and args.stage_flag and args.stage != args.stage_flag:
        print("error: positional stage and --stage disagree", file=sys.stderr)
        return 1
    try:
        cfg = load_config(args.config, seed_override=args.seed)
        counts = run_stage(stage, cfg, args.run_dir)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (StageDataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    summary = " ".join(f"{k}={v}" for k, v in sorted(counts.items()))
    print(f"{stage}: ok {summary}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
