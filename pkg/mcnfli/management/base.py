"""Shared plumbing for the solver commands.

Exit codes: 0 success, 1 usage or unreadable input, 2 solver failure,
3 infeasible input when ``--require-feasible`` is given.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path
from typing import Any

from django.core.management.base import BaseCommand, CommandError
from rest_framework import serializers

from mcnfli.exceptions import InstanceError, InstanceFormatError, MCNFLIError
from mcnfli.instance import Instance, ensure_valid, read_instance

USAGE = 1
SOLVE_ERROR = 2
INFEASIBLE = 3


def _usage_error(parser, message: str):
    if parser.called_from_command_line:
        parser.print_usage(sys.stderr)
        parser.exit(USAGE, f"{parser.prog}: error: {message}\n")
    raise CommandError(f"Error: {message}", returncode=USAGE)


def boolean(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ValueError(value)


class SolverCommand(BaseCommand):
    requires_system_checks: list[str] = []

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        parser.error = lambda message: _usage_error(parser, message)
        return parser

    # -- arguments ---------------------------------------------------------

    def add_input_argument(self, parser) -> None:
        parser.add_argument("--input", required=True, help="Instance file (extended DIMACS).")

    def add_output_arguments(self, parser, formats=("json",)) -> None:
        parser.add_argument("--output", default="", help="Write here instead of standard output.")
        parser.add_argument("--format", choices=formats, default=formats[0])

    def add_solver_arguments(self, parser) -> None:
        parser.add_argument("--rule", choices=["dantzig", "bland"], default=None, help="Pricing rule.")
        parser.add_argument(
            "--use-dhat", type=boolean, default=None, help="Solve through the reduced certificate (true/false)."
        )

    def add_feasibility_argument(self, parser) -> None:
        parser.add_argument(
            "--require-feasible", action="store_true", help="Exit with status 3 when the input is infeasible."
        )

    # -- helpers -----------------------------------------------------------

    def load_instance(self, path: str) -> Instance:
        try:
            return ensure_valid(read_instance(path))
        except OSError as exc:
            raise CommandError(f"cannot read {path}: {exc.strerror or exc}", returncode=USAGE)
        except (InstanceFormatError, InstanceError) as exc:
            raise CommandError(f"{path}: {exc}", returncode=USAGE)

    def load_json(self, path: str) -> Any:
        try:
            return json.loads(Path(path).read_text())
        except OSError as exc:
            raise CommandError(f"cannot read {path}: {exc.strerror or exc}", returncode=USAGE)
        except json.JSONDecodeError as exc:
            raise CommandError(f"{path}: invalid JSON ({exc})", returncode=USAGE)

    def validated(self, serializer: serializers.Serializer, source: str):
        if not serializer.is_valid():
            raise CommandError(f"{source}: {json.dumps(serializer.errors)}", returncode=USAGE)
        try:
            return serializer.save()
        except serializers.ValidationError as exc:
            raise CommandError(f"{source}: {json.dumps(exc.detail)}", returncode=USAGE)

    def solver_failure(self, exc: MCNFLIError) -> CommandError:
        return CommandError(f"{type(exc).__name__}: {exc}", returncode=SOLVE_ERROR)

    def infeasible(self, message: str, options) -> None:
        if options.get("require_feasible"):
            raise CommandError(message, returncode=INFEASIBLE)
        self.stderr.write(self.style.WARNING(message))

    def emit(self, text: str, options) -> None:
        path = options.get("output")
        if path:
            Path(path).write_text(text if text.endswith("\n") else text + "\n")
        else:
            self.stdout.write(text)

    def emit_json(self, data: Any, options) -> None:
        self.emit(json.dumps(data, indent=2), options)
