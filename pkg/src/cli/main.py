"""
`recast` command-line entry point.

    recast fit-source --data source.csv --kind linear --out model.json
    recast calibrate  --model model.json --data target.csv --out posterior.csv
    recast predict    --model model.json --posterior posterior.csv --data test.csv --alpha 0.05 --out pred.csv
    recast replicate  --desk-scale --threads 8 --out-dir outputs/desk
    recast diagnostics outputs/desk/results.csv

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure, 5 I/O error.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from recast.errors import RecastError

from . import commands

EXIT_IO_ERROR = 5


def _shared_flags() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--config", type=Path, default=None, help="run configuration (.toml or .json)")
    parent.add_argument("--seed", type=int, default=None, help="master seed (overrides the config and RECAST_MASTER_SEED)")
    parent.add_argument("--threads", type=int, default=None, help="worker processes / torch threads")
    parent.add_argument("--desk-scale", action="store_true", help="apply the reduced desk-scale profile")
    parent.add_argument("--label-col", default="y", help="name of the label column in input CSVs (default: y)")
    parent.add_argument("--verbose", "-v", action="store_true", help="debug-level console logging")
    parent.add_argument("--log-dir", type=Path, default=None, help="root directory for log files")
    return parent


def build_parser() -> argparse.ArgumentParser:
    shared = _shared_flags()
    parser = argparse.ArgumentParser(
        prog="recast",
        description="Calibrate pre-trained source models to small target datasets and predict with uncertainty.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-source", parents=[shared], help="fit and save a source model from a CSV")
    p.add_argument("--data", type=Path, required=True, help="source CSV")
    p.add_argument("--kind", choices=["linear", "logistic", "mlp"], required=True)
    p.add_argument("--response-kind", choices=["continuous", "binary"], default=None,
                   help="label type; required for --kind mlp")
    p.add_argument("--out", type=Path, required=True, help="model container path")
    p.add_argument("--no-intercept", action="store_true", help="do not prepend an intercept column")
    p.add_argument("--no-standardize", action="store_true", help="fit on raw features")
    p.set_defaults(handler=commands.cmd_fit_source)

    p = sub.add_parser("calibrate", parents=[shared], help="sample the calibration posterior on target data")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True, help="target CSV")
    p.add_argument("--out", type=Path, required=True, help="posterior sample CSV")
    p.add_argument("--chain-out", type=Path, default=None, help="also dump the retained chain to this CSV")
    p.set_defaults(handler=commands.cmd_calibrate)

    p = sub.add_parser("predict", parents=[shared], help="posterior predictive sets for test rows")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--posterior", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True, help="test CSV (label column optional)")
    p.add_argument("--alpha", type=float, action="append", default=None,
                   help="miscoverage level; repeat for several (default from config: 0.05)")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(handler=commands.cmd_predict)

    p = sub.add_parser("replicate", parents=[shared], help="run the synthetic experiment grid")
    p.add_argument("--out-dir", type=Path, default=None, help="directory for results.csv and summaries")
    p.add_argument("--resume", action="store_true", help="skip replicates already in results.csv")
    p.set_defaults(handler=commands.cmd_replicate)

    p = sub.add_parser("diagnostics", parents=[shared], help="summarize a chain dump or a results file")
    p.add_argument("input", type=Path)
    p.add_argument("--out-dir", type=Path, default=None)
    p.add_argument("--level", type=float, action="append", default=None,
                   help="nominal coverage level to summarize; repeatable (default 0.95)")
    p.add_argument("--method", action="append", default=None,
                   help="keep only these methods in a results summary; repeatable")
    p.add_argument("--response-kind", choices=["continuous", "binary"], default=None)
    p.set_defaults(handler=commands.cmd_diagnostics)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    from utils.loggings import setup_logging

    args = build_parser().parse_args(argv)
    setup_logging(
        mode="cli",
        log_name=args.command,
        console_level=logging.DEBUG if args.verbose else logging.INFO,
        log_dir=args.log_dir,
    )
    logger = logging.getLogger(__name__)
    try:
        return args.handler(args)
    except RecastError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        logger.error(f"I/O error: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO_ERROR


if __name__ == "__main__":
    sys.exit(main())
