import argparse
import sys
from typing import List, Optional

from commands import register_commands
from utils.config import VERSION, RenderMode, RunConfig, RuntimePolicy
from utils.logger import Logger, logger

EXIT_USAGE = 2


def _global_options(parser: argparse.ArgumentParser, suppress: bool = False) -> None:
    """Options accepted both before and after the subcommand.

    The copy attached to each subcommand uses ``SUPPRESS`` defaults so that a
    value given before the subcommand is not reset by the subparser.
    """
    def default(value):
        return argparse.SUPPRESS if suppress else value

    parser.add_argument("--root", default=default("."), help="project root (default: current directory)")
    parser.add_argument("--out", default=default(None), help="output directory (default: <root>/_verdad)")
    parser.add_argument("--mode", choices=[m.value for m in RenderMode], default=default(None),
                        help="strict skips incomplete templates, permissive renders MISSING(...) placeholders")
    parser.add_argument("--runtime", choices=[p.value for p in RuntimePolicy], default=default(None),
                        help="container runtime requirement (default: auto)")
    parser.add_argument("--timeout", type=float, default=default(None), help="per-bundle timeout in seconds")
    parser.add_argument("--dump-store", action="store_true", default=default(False),
                        help="write the final store as canonical JSON to <out>/store.json")
    parser.add_argument("--json", action="store_true", default=default(False),
                        help="echo the run report as JSON on standard output")
    parser.add_argument("--force", action="store_true", default=default(False),
                        help="overwrite existing scaffold files")
    parser.add_argument("--engine", default=default(None), help="container engine binary (default: docker)")
    parser.add_argument("--network", action="store_true", default=default(False),
                        help="allow network access inside analysis containers")
    parser.add_argument("--verbose", "-v", action="store_true", default=default(False), help="debug logging")
    parser.add_argument("--log-file", default=default(None), help="also write the debug log to this file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="verdad", description="Data-oriented engineering documents: "
                                                               "ingest project data, render templates, run analyses")
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    _global_options(parser)

    shared = argparse.ArgumentParser(add_help=False)
    _global_options(shared, suppress=True)

    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
    subparsers.required = True
    register_commands(subparsers, parents=[shared])
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    try:
        config = RunConfig.from_args(args)
    except ValueError as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_USAGE

    Logger().set_verbose(config.verbose)
    if config.log_file:
        Logger().attach_file(config.log_file)

    if not config.root.is_dir():
        logger.error(f"project root {config.root} does not exist")
        return EXIT_USAGE

    logger.debug(f"verdad {VERSION} {args.command} root={config.root} out={config.out} mode={config.mode.value}")
    return args.handler(config, args)


if __name__ == "__main__":
    sys.exit(main())
