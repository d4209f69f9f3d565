import argparse
import asyncio
import logging
import os
import sys

from dotenv import load_dotenv

from simulation_handler.handler import SimulationHandler
from src.config import parse_config
from src.errors import ConfigError
from utils.log_utils import setup_logging

load_dotenv()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="simulate",
                                     description="NPZ water-column simulator with invariant checks.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", help="Run configuration file (dotted key = value lines)")
    common.add_argument("--out", default=None, help="Output directory (overrides output.dir)")
    common.add_argument("--quiet", action="store_true", help="Only log warnings and errors")

    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("run", parents=[common], help="Integrate one configuration")
    sweep = commands.add_parser("sweep", parents=[common], help="One run per value of a numeric key")
    sweep.add_argument("--key", required=True, help="Dotted key to vary, e.g. params.m_p")
    sweep.add_argument("--values", required=True, help="Comma-separated values")
    sweep.add_argument("--max-workers", type=int, default=None,
                       help="Concurrent runs (default: NPZ_MAX_WORKERS or CPU count)")
    commands.add_parser("check", parents=[common], help="Rerun the checks on stored trajectory files")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    log_path = setup_logging(os.getenv("NPZ_LOG_DIR", "logs"), args.command, args.quiet)
    logging.info(f"simulate {args.command} {args.config} (log: {log_path})")

    try:
        with open(args.config, "r", encoding="utf-8") as f:
            config = parse_config(f.read())
    except OSError as e:
        logging.error(f"Cannot read config {args.config}: {e}")
        return ConfigError.exit_code
    except ConfigError as e:
        logging.error(f"Invalid config {args.config}: {e}")
        return e.exit_code

    handler = SimulationHandler(config, output_dir=args.out, quiet=args.quiet,
                                max_workers=getattr(args, "max_workers", None))
    if args.command == "run":
        return handler.run().exit_code
    if args.command == "check":
        return handler.check().exit_code

    values = [v.strip() for v in args.values.split(",") if v.strip()]
    try:
        return asyncio.run(handler.sweep(args.key, values))
    except ConfigError as e:
        logging.error(f"Invalid sweep: {e}")
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
