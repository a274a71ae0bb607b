from __future__ import annotations
import argparse
import logging
import sys
from logging.handlers import RotatingFileHandler
from typing import List, Optional

from src.config import settings
from src.errors import InvariantSetError
from src.handlers.check import check
from src.handlers.grid import grid
from src.handlers.help import DETAILED_HELP, help_cmd
from src.handlers.lift import lift
from src.handlers.solve import solve
from src.handlers.verify import verify

log = logging.getLogger("invariant-sets")


def setup_logging(verbose: bool = False) -> None:
    log_handler = RotatingFileHandler(
        settings.LOG_FILE, maxBytes=settings.LOG_MAX_BYTES, backupCount=settings.LOG_BACKUPS, encoding="utf-8"
    )
    handlers: List[logging.Handler] = [log_handler]
    level = getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO)
    if verbose:
        handlers.append(logging.StreamHandler(sys.stderr))
        level = logging.DEBUG
    logging.basicConfig(
        level=level,
        format="%(asctime)s | %(levelname)s | %(name)s | %(message)s",
        handlers=handlers,
        force=True,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="invariant-sets",
        description="Maximal admissible invariant sets of switching linear systems under polynomial constraints.",
        epilog=DETAILED_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="compute the maximal admissible invariant set")
    p.add_argument("problem")
    p.add_argument("--algorithm", type=int, choices=(1, 2, 3))
    p.add_argument("--max-iter", type=int)
    p.add_argument("--sos-degree", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--jsr-depth", type=int)
    p.add_argument("--skip-gate", action="store_true")
    p.add_argument("--no-sos", action="store_true")
    p.add_argument("--output")
    p.set_defaults(handler=solve)

    p = sub.add_parser("check", help="stability bounds and the invariance LP")
    p.add_argument("problem")
    p.add_argument("--jsr-depth", type=int)
    p.add_argument("--skip-gate", action="store_true")
    p.set_defaults(handler=check)

    p = sub.add_parser("grid", help="export a grid sample of a result")
    p.add_argument("result")
    p.add_argument("--grid-res", type=int, default=200)
    p.add_argument("--bounds", type=float, nargs="+")
    p.add_argument("--output")
    p.set_defaults(handler=grid)

    p = sub.add_parser("verify", help="check a result by exhaustive simulation")
    p.add_argument("result")
    p.add_argument("--problem")
    p.add_argument("--grid-res", type=int, default=200)
    p.add_argument("--horizon", type=int)
    p.add_argument("--margin", type=float, default=1e-3)
    p.add_argument("--convexity", type=int, default=0, metavar="SAMPLES")
    p.add_argument("--output")
    p.set_defaults(handler=verify)

    p = sub.add_parser("lift", help="print the lifted problem")
    p.add_argument("problem")
    p.set_defaults(handler=lift)

    p = sub.add_parser("help", help="detailed help")
    p.set_defaults(handler=help_cmd)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    try:
        return args.handler(args)
    except InvariantSetError as e:
        log.error(f"{type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        log.exception(f"Unexpected error: {e}")
        print(f"internal error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
