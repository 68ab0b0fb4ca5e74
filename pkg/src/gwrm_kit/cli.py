"""
Entry point of the ``gwrm-kit`` console script.

Subcommands are Django management commands in
``gwrm_kit.management.commands``, discovered and run with Django's
``find_commands``, ``load_command_class`` and ``call_command``.
"""

from __future__ import annotations

import logging
import sys
from pathlib import Path
from typing import Optional, Sequence, TextIO

from django.core.management import call_command, find_commands, load_command_class
from django.core.management.base import CommandError

from . import __version__
from .constants import EXIT_INTERNAL, EXIT_OK, EXIT_USAGE

logger = logging.getLogger(__name__)

PROG = "gwrm-kit"
_MANAGEMENT_DIR = str(Path(__file__).resolve().parent / "management")


def available_commands() -> list[str]:
    return sorted(find_commands(_MANAGEMENT_DIR))


def usage() -> str:
    lines = [
        f"usage: {PROG} <command> [options]",
        "",
        "Chebyshev-in-time spectral ODE solver, reference steppers and diagnostics.",
        "",
        "commands:",
    ]
    for name in available_commands():
        lines.append(f"  {name:<10} {load_command_class('gwrm_kit', name).help}")
    lines.append("")
    lines.append(f"Run '{PROG} <command> --help' for the options of one command.")
    return "\n".join(lines) + "\n"


def run_command(
    name: str, *args: str, stdout: Optional[TextIO] = None, stderr: Optional[TextIO] = None
) -> int:
    """Run one subcommand, e.g. ``run_command("modes", "--extrema", "2")``, for its exit code."""

    err = stderr or sys.stderr
    names = available_commands()
    if name not in names:
        err.write(f"CommandError: Unknown command {name!r}. Available: {', '.join(names)}\n")
        return EXIT_USAGE

    command = load_command_class("gwrm_kit", name)
    if "-h" in args or "--help" in args:
        (stdout or sys.stdout).write(command.create_parser(PROG, name).format_help())
        return EXIT_OK

    try:
        call_command(command, *args, stdout=stdout or sys.stdout, stderr=err)
    except CommandError as exc:
        err.write(f"CommandError: {exc}\n")
        return exc.returncode
    except Exception as exc:
        logger.exception("Unexpected failure in %s", name)
        err.write(f"Internal error: {exc}\n")
        return EXIT_INTERNAL
    return EXIT_OK


def main(
    argv: Optional[Sequence[str]] = None,
    stdout: Optional[TextIO] = None,
    stderr: Optional[TextIO] = None,
) -> int:
    """Dispatch ``argv`` to a subcommand and return its exit code."""

    args = list(sys.argv[1:] if argv is None else argv)
    if not args:
        (stderr or sys.stderr).write(usage())
        return EXIT_USAGE
    if args[0] in ("-h", "--help"):
        (stdout or sys.stdout).write(usage())
        return EXIT_OK
    if args[0] == "--version":
        (stdout or sys.stdout).write(f"{PROG} {__version__}\n")
        return EXIT_OK
    return run_command(args[0], *args[1:], stdout=stdout, stderr=stderr)


def cmd_solve(*args: str, stdout=None, stderr=None) -> int:
    return run_command("solve", *args, stdout=stdout, stderr=stderr)


def cmd_compare(*args: str, stdout=None, stderr=None) -> int:
    return run_command("compare", *args, stdout=stdout, stderr=stderr)


def cmd_lle(*args: str, stdout=None, stderr=None) -> int:
    return run_command("lle", *args, stdout=stdout, stderr=stderr)


def cmd_modes(*args: str, stdout=None, stderr=None) -> int:
    return run_command("modes", *args, stdout=stdout, stderr=stderr)


def cmd_steepness(*args: str, stdout=None, stderr=None) -> int:
    return run_command("steepness", *args, stdout=stdout, stderr=stderr)


if __name__ == "__main__":
    sys.exit(main())
