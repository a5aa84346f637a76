"""``mcnfli <subcommand> ...`` entry point over the management commands."""

from __future__ import annotations

import os
import sys
from typing import Sequence

COMMANDS = {
    "solve": "solve",
    "solve-bidm": "solve_bidm",
    "round": "round",
    "generate": "generate",
    "bench": "bench",
    "trace": "trace",
    "dump-basis": "dump_basis",
}


def _usage() -> str:
    names = ", ".join(COMMANDS)
    return f"usage: mcnfli <subcommand> [options]\nsubcommands: {names}\n"


def cli(argv: Sequence[str] | None = None) -> int:
    args = list(sys.argv[1:] if argv is None else argv)
    if not args or args[0] in ("-h", "--help"):
        (sys.stdout if args else sys.stderr).write(_usage())
        return 0 if args else 1
    name = COMMANDS.get(args[0]) or (args[0] if args[0] in COMMANDS.values() else None)
    if name is None:
        sys.stderr.write(f"mcnfli: unknown subcommand {args[0]!r}\n" + _usage())
        return 1

    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "core.settings")
    import django
    from django.core.management import load_command_class

    django.setup()
    command = load_command_class("mcnfli", name)
    try:
        command.run_from_argv(["mcnfli", name, *args[1:]])
    except SystemExit as exc:
        if exc.code is None:
            return 0
        return exc.code if isinstance(exc.code, int) else 1
    return 0


def main() -> None:
    sys.exit(cli())


if __name__ == "__main__":
    main()
