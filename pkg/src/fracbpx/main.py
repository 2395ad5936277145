import logging
import sys
from typing import Optional

from fracbpx.cli.commands import build_parser, dispatch
from fracbpx.config import get_settings


def main(argv: Optional[list[str]] = None) -> int:
    settings = get_settings()
    logging.basicConfig(
        level=settings.log_level.upper(),
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    args = build_parser(settings).parse_args(argv)
    return dispatch(args, settings)


if __name__ == "__main__":
    sys.exit(main())
