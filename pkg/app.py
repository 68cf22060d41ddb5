"""Local entry point for running graspkit subcommands."""

from __future__ import annotations

import sys

from app_factory import create_app


def main(argv: list[str] | None = None) -> int:
    app = create_app()
    return app.run(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    raise SystemExit(main())
