import argparse
import logging
import sys
from typing import List, Optional

from .commands import evaluate, km, pipeline, preprocess, rank, report, synth, train
from .commands.common import common_arguments
from .errors import PipelineError

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"

COMMANDS = (synth, preprocess, rank, train, evaluate, report, pipeline, km)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="agreement-ensemble",
        description="Agreement-gated ensemble for five-year colorectal cancer survival",
    )
    subparsers = parser.add_subparsers(dest="command", metavar="command")
    subparsers.required = True
    parent = common_arguments()
    for command in COMMANDS:
        command.register(subparsers, parent)
    return parser


def configure_logging(verbose: bool = False, quiet: bool = False):
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on bad flags; usage errors are status 1 here
        return 0 if e.code == 0 else 1
    configure_logging(args.verbose, args.quiet)

    try:
        return args.handler(args)
    except PipelineError as e:
        logger.error("%s: %s", type(e).__name__, e.detail)
        return e.exit_status
    except Exception:
        logger.exception("internal error")
        return 3


if __name__ == "__main__":
    sys.exit(main())
