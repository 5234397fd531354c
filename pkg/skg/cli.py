"""
SKG Command Line - Entry Point
Combines the subcommands of every area and maps toolkit errors to exit codes:
0 success, 2 validation failure, 3 numerical blow-up or non-convergence,
4 configuration error.
"""

import argparse
import logging
import sys
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from skg import __version__
from skg.config import parse_config
from skg.diagrams.commands import register as register_trees
from skg.errors import BlowUpError, ConfigError, NonConvergenceError, SKGError
from skg.simulation.commands import register as register_simulation
from skg.solvers.commands import register as register_solvers
from skg.spectral.commands import register as register_spectral
from skg.validation.suite import register as register_validation

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_CONFIG = 4

# flag -> (config key, type)
CONFIG_FLAGS = [
    ("--seed", "seed", int),
    ("--gamma", "gamma", float),
    ("--mu2", "mu2", float),
    ("--lambda", "lambda", float),
    ("--power", "power", int),
    ("--sigma", "sigma", float),
    ("--dim", "dim", int),
    ("--n-sites", "n_sites", int),
    ("--delta", "delta", float),
    ("--dt", "dt", float),
    ("--horizon", "horizon", float),
    ("--order", "order", int),
    ("--tol", "tol", float),
    ("--max-iter", "max_iter", int),
    ("--record-every", "record_every", int),
    ("--ensemble", "ensemble", int),
    ("--snapshot-times", "snapshot_times", str),
    ("--initial-amplitude", "initial_amplitude", float),
]


class ToolkitArgumentParser(argparse.ArgumentParser):
    """Reports bad flags as configuration errors instead of exiting with 2"""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise ConfigError("arguments", message)


def common_parser() -> argparse.ArgumentParser:
    common = ToolkitArgumentParser(add_help=False)
    common.add_argument("--config", help="INI-style config file")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--verbose", action="store_true", help="debug logging")
    for flag, key, kind in CONFIG_FLAGS:
        common.add_argument(flag, dest=f"cfg_{key}", type=kind, default=None)
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = ToolkitArgumentParser(prog="skg", description="Damped stochastic Klein-Gordon lattice toolkit")
    parser.add_argument("--version", action="version", version=f"skg {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    parents = [common_parser()]

    # Include commands
    register_spectral(subparsers, parents)
    register_solvers(subparsers, parents)
    register_trees(subparsers, parents)
    register_simulation(subparsers, parents)
    register_validation(subparsers, parents)
    return parser


def collect_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides = {key: getattr(args, f"cfg_{key}") for _, key, _ in CONFIG_FLAGS}
    if getattr(args, "level", None) is not None:
        overrides["level"] = args.level
    return overrides


def configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        configure_logging(args.verbose)
        cfg = parse_config(args.config, collect_overrides(args))
        return args.handler(cfg, args)
    except ConfigError as exc:
        print(f"✗ configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValidationError as exc:
        print(f"✗ invalid parameters: {exc.errors()[0]['msg']}", file=sys.stderr)
        return EXIT_CONFIG
    except (BlowUpError, NonConvergenceError) as exc:
        print(f"✗ {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except SKGError as exc:
        print(f"✗ {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
