"""CLI entry point for ``onehomog`` (see pyproject.toml [project.scripts]).

Usage::

    onehomog construct                      # flagship scenario, ./results
    onehomog verify --config configs/flagship.cfg --out runs/verify
    onehomog suite --grid-scale 2 --seed 7

Exit status: 0 when every asserted check passes, 1 when one fails, 2 for
configuration or construction errors.
"""

import argparse
import sys
from pathlib import Path

from onehomog.errors import ConfigError, NonConvergence
from onehomog.pipeline import COMMANDS, run_timed
from onehomog.report import write_report, write_timings
from onehomog.schema import load_config
from onehomog.utils.logger import get_logger

logger = get_logger(__name__)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2

_HELP = {
    "construct": "Build Lambda, its spectrum and u_bar; pointwise identities",
    "verify": "Weak forms, determinant identity and hypothesis probe",
    "minimize": "CG minimization of the discrete E from seeded inits",
    "compare": "Lifted competitors against the k-covering map",
    "meyers": "Power-radial maps of the Meyers-type system",
    "unique": "Integrals of the uniqueness criterion",
    "suite": "All of the above, one report",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="onehomog", description="One-homogeneous stationary map laboratory"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in [*COMMANDS, "suite"]:
        cmd = sub.add_parser(name, help=_HELP[name])
        cmd.add_argument(
            "--config",
            type=Path,
            default=None,
            help="Scenario file (default: the flagship scenario)",
        )
        cmd.add_argument(
            "--out",
            type=Path,
            default=None,
            help="Output directory (default: [output] dir of the scenario)",
        )
        cmd.add_argument(
            "--grid-scale",
            type=float,
            default=None,
            help="Multiply N_R and N_theta, e.g. 2 for a refinement study",
        )
        cmd.add_argument(
            "--seed",
            type=int,
            default=None,
            help="Override [scenario] seed",
        )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)

    try:
        config = load_config(args.config).with_overrides(
            seed=args.seed, out=args.out, grid_scale=args.grid_scale
        )
        out_dir = config.output.dir
        report, timings = run_timed(args.command, config, out_dir)
    except ConfigError as e:
        logger.error(f"Invalid scenario configuration: {e}")
        return EXIT_CONFIG
    except NonConvergence as e:
        logger.error(f"{args.command} did not converge: {e}")
        return EXIT_FAIL
    except ValueError as e:
        logger.error(f"Scenario could not be built: {type(e).__name__}: {e}")
        return EXIT_CONFIG

    write_report(report, out_dir)
    write_timings(timings, out_dir)

    if report.passed:
        logger.info(f"{args.command}: all {len(report.checks)} checks passed")
        return EXIT_PASS
    for check in report.failures:
        logger.error(f"Failed check [{check.suite}] {check.name}: {check.value:.6e}")
    return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
