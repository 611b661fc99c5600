"""Command line entry point: ``mfeit <subcommand> --config <path>``."""

# Import built-in modules
import argparse
import sys
from collections.abc import Sequence

# Import third-party modules
from loguru import logger

# Import local modules
from mfeit import pipeline
from mfeit.app import APP_DESCRIPTION, APP_NAME, __version__, configure_logging
from mfeit.config import load_run_config
from mfeit.errors import MfeitError

COMMANDS = {
    "simulate": pipeline.run_simulate,
    "reconstruct": pipeline.run_reconstruct,
    "detect": pipeline.run_detect,
    "fuse": pipeline.run_fuse,
    "validate-jump": pipeline.run_validate_jump,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=APP_NAME, description=APP_DESCRIPTION)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command, stage in COMMANDS.items():
        sub = subparsers.add_parser(command, help=(stage.__doc__ or "").splitlines()[0])
        sub.add_argument("--config", required=True, help="JSON run configuration")
        sub.add_argument("--out", help="Output directory (overrides output_dir)")
        sub.add_argument("--seed", type=int, help="Noise seed (overrides seed)")
        sub.add_argument("--sign-flag", choices=["plus", "minus"], help="Boundary operator sign for detection")
        sub.add_argument("--debug", action="store_true", help="Enable debug logging")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """Run one pipeline stage and return its exit code.

    Exit codes: 0 success, 2 configuration, 3 solver, 4 I/O, 5 detection.
    """
    args = build_parser().parse_args(argv)
    configure_logging(args.debug)
    try:
        config = load_run_config(args.config, out=args.out, seed=args.seed, sign=args.sign_flag)
        written = COMMANDS[args.command](config)
    except MfeitError as exc:
        logger.error(f"{args.command} failed: {exc}")
        return exc.exit_code
    except Exception:
        logger.exception(f"{args.command} failed unexpectedly")
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
