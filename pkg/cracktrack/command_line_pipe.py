"""The entry-point for the command line script `cracktrack`.

This module parses the command-line arguments given to the entry-point of the CrackTrack
pipeline and hands them to `run_pipeline.start`.

Example:
    One would run the full acceptance suite with `cracktrack verify --config configs/flagship.yaml`,
    or a coarse smoke run with `cracktrack verify --config configs/smoke.yaml`. Any
    configuration entry can be overridden with `--set mesh.h=0.1`.

Attributes:
   - subcommand: One of spectrum, solve, frequency, blowup, fourier, audit, approx, verify
   - config: The yaml file describing the crack, the potential, the meshes and the checks
   - output: Run directory, overriding `output_dir` of the configuration
   - threads, seed, tolerance-scale: Override the matching configuration entries
   - verbose: Self-explanatory

Exit status is 0 when every check passes, 1 on a failed check or a numerical error and 2
for an invalid configuration.
"""

import argparse
import logging
import sys

from cracktrack import run_pipeline
from cracktrack.errors import ConfigError, CrackTrackError
from cracktrack.utils.logging_utils import configure_logging

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2


def parse_pipeline(argv=None):
    """Parse command line arguments."""

    parser = argparse.ArgumentParser("cracktrack")
    add_arg = parser.add_argument
    add_arg("subcommand", choices=sorted(run_pipeline.SUBCOMMANDS))
    add_arg("--config", default="configs/flagship.yaml")
    add_arg("--output", default=None)
    add_arg("--threads", type=int, default=None)
    add_arg("--seed", type=int, default=None)
    add_arg("--tolerance-scale", type=float, default=None)
    add_arg("--verbose", action="store_true")
    add_arg("--log-file", default=None)
    add_arg("--set", action="append", default=[], metavar="KEY=VALUE")

    return parser.parse_args(argv)


def main(argv=None):

    args = parse_pipeline(argv)
    configure_logging(args.log_file, args.verbose)
    logging.info(f"Parsed run args: {args}")

    try:
        passed = run_pipeline.start(args)
    except ConfigError as e:
        logging.error(f"Invalid configuration: {e}")
        print(f"cracktrack: invalid configuration: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except CrackTrackError as e:
        logging.error(f"{type(e).__name__}: {e}")
        print(f"cracktrack: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK if passed else EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
