"""Command-line entry point: ``qvilab <command> --config <path> [--out <dir>]``.

Exit status: 0 all checks passed, 1 a check failed, 2 configuration
error, 3 solver non-convergence.
"""
from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, ConvergenceError, MonotonicityError, PreconditionError, QviError
from .harness import COMMANDS, load_problem, run

EXIT_PASS, EXIT_CHECK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3


def _parser():
    p = argparse.ArgumentParser(prog="qvilab", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="experiment config file")
    p.add_argument("--out", default="out", help="artifact directory (default: ./out)")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        inst, cfg = load_problem(args.config)
    except (ConfigError, PreconditionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, MonotonicityError) as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except QviError as exc:
        print(f"check failed at load: {exc}", file=sys.stderr)
        return EXIT_CHECK
    try:
        result = run(args.command, inst, cfg, args.out)
    except (ConvergenceError, MonotonicityError) as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except PreconditionError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    sys.stdout.write(result.summary())
    return EXIT_PASS if result.passed else EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
