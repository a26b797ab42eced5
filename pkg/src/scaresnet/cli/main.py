"""Command-line interface for scaresnet."""

import argparse
import json
import logging
import sys
from typing import List, Optional

from scaresnet import __version__
from scaresnet.checks import MODULE_TAGS
from scaresnet.cli import display
from scaresnet.cli.commands import HANDLERS
from scaresnet.config import (
    DEFAULT_DTYPE,
    DEFAULT_SEED,
    LOG_FILE,
    LOG_LEVEL,
    SYNTHETIC_SIZE_MAX,
    SYNTHETIC_SIZE_MIN,
    SYNTHETIC_WORKERS,
    TRAIN_LR,
    TRAIN_STEPS,
)
from scaresnet.errors import ScaresnetError
from scaresnet.logger import setup_logging
from scaresnet.nn import PRESETS
from scaresnet.sppr import Interpretation

logger = logging.getLogger(__name__)

INTERPRETATIONS = [i.value for i in Interpretation]


def _network_options() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument(
        "--preset",
        choices=PRESETS,
        help="Backbone preset (default from model.toml).",
    )
    parent.add_argument(
        "--config",
        metavar="PATH",
        help="JSON document with backbone settings; flags override it.",
    )
    return parent


def _size_options() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--h", type=int, required=True, help="Input height.")
    parent.add_argument("--w", type=int, help="Input width (defaults to --h).")
    return parent


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scaresnet",
        description="SPPR level arithmetic, backbone inspection, gradient checks and a training demo.\n"
        "Every command prints one JSON document on stdout.",
        formatter_class=argparse.RawTextHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "-v",
        "--verbose",
        action="store_true",
        help="Print the effective configuration on stderr.",
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    network = _network_options()
    size = _size_options()

    p = sub.add_parser("solve-levels", help="Enumerate valid SPPR level sets.")
    p.add_argument("--max", type=int, required=True, help="Upper bound for a, b, c, d.")

    p = sub.add_parser("pool-params", help="Pooling kernel/stride/padding for h -> l.")
    p.add_argument("--h", type=int, required=True, help="Input extent (h_max with --sweep).")
    p.add_argument("--l", type=int, help="Target level.")
    p.add_argument("--interpretation", choices=INTERPRETATIONS)
    p.add_argument(
        "--sweep",
        action="store_true",
        help="Check every h in [l, H] for each level; both readings unless --interpretation.",
    )
    p.add_argument(
        "--levels", type=int, nargs="+", help="Levels for --sweep (default 2 6 9)."
    )

    p = sub.add_parser("shape-trace", parents=[network, size], help="Per-block shapes and counts.")
    p.add_argument("--interpretation", choices=INTERPRETATIONS)

    p = sub.add_parser("param-count", parents=[network, size], help="Parameter and mult-add totals.")
    p.add_argument("--interpretation", choices=INTERPRETATIONS)
    p.add_argument(
        "--compare-plain",
        action="store_true",
        help="Also count the variant with plain convolutions instead of DSEConv.",
    )

    p = sub.add_parser("grad-check", help="Finite-difference gradient check.")
    p.add_argument("--module", choices=list(MODULE_TAGS) + ["all"], required=True)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)

    p = sub.add_parser("gen-data", parents=[network], help="Write a synthetic dataset.")
    p.add_argument("--n", type=int, required=True, help="Number of samples.")
    p.add_argument("--size-min", type=int, default=SYNTHETIC_SIZE_MIN)
    p.add_argument("--size-max", type=int, default=SYNTHETIC_SIZE_MAX)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", required=True, help="Output directory.")
    p.add_argument("--workers", type=int, default=SYNTHETIC_WORKERS)

    p = sub.add_parser("train-demo", parents=[network], help="Train the demo classifier.")
    p.add_argument("--data", required=True, help="Dataset directory from gen-data.")
    p.add_argument("--steps", type=int, default=TRAIN_STEPS)
    p.add_argument("--lr", type=float, default=TRAIN_LR)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--checkpoint", metavar="DIR", help="Save trained weights here.")
    p.add_argument("--report", metavar="PATH", help="Also write the report JSON here.")
    p.add_argument(
        "--dtype", choices=["float32", "float64"], default=DEFAULT_DTYPE, help="Element type."
    )
    p.add_argument(
        "--ablation",
        action="store_true",
        help="Train the baseline, +CCA, +SPPRCSP and full variants and compare them.",
    )

    return parser


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    return build_parser().parse_args(argv)


def emit(doc) -> None:
    print(json.dumps(doc, sort_keys=True))


def run_cli(argv: Optional[List[str]] = None) -> int:
    """Run one subcommand and return its exit status."""
    setup_logging(LOG_LEVEL, LOG_FILE)
    try:
        args = parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2

    logger.info(f"command {args.command}: {vars(args)}")
    try:
        doc, status = HANDLERS[args.command](args)
    except (ScaresnetError, ValueError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        display.show_error(str(e))
        emit({"error": str(e)})
        return 1
    emit(doc)
    return status


def main() -> None:
    """Main entry point."""
    sys.exit(run_cli(sys.argv[1:]))
