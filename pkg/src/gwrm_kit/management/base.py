"""
Shared base for the ``gwrm-kit`` management commands.

Commands are Django management commands: ``add_arguments`` registers flags
and ``handle`` does the work. ``GwrmCommand`` adds the flags every command
shares, fills unset flags from a ``--config`` file, routes package logging to
stderr and turns library errors into ``CommandError`` with the matching exit
code. No Django settings are needed.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Optional, TextIO

from django.core.management.base import BaseCommand, CommandError
from dotenv import dotenv_values

from .. import __version__
from ..base import ConfigurationError, GwrmError, UnsupportedAccuracyError
from ..constants import EXIT_INTERNAL, EXIT_USAGE
from ..gwrm import GwrmConfig
from ..problems import OdeProblem, get_problem, parse_param_overrides
from ..refsolvers import StepperConfig
from ..runs import MethodSettings, default_newton
from ..sir import SolverConfig

logger = logging.getLogger(__name__)

DEFAULT_VERBOSITY = 1

_VERBOSITY_LEVELS = {0: logging.ERROR, 1: logging.WARNING, 2: logging.INFO, 3: logging.DEBUG}


def configure_logging(verbosity: int, stream: Optional[TextIO] = None) -> None:
    """Route ``gwrm_kit`` log records to ``stream`` at the level ``verbosity`` selects."""

    package_logger = logging.getLogger("gwrm_kit")
    for handler in list(package_logger.handlers):
        if getattr(handler, "_gwrm_cli", False):
            package_logger.removeHandler(handler)

    handler = logging.StreamHandler(stream or sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    handler._gwrm_cli = True
    package_logger.addHandler(handler)
    package_logger.setLevel(_VERBOSITY_LEVELS.get(verbosity, logging.WARNING))


def normalize_key(key: str) -> str:
    return key.strip().lower().replace("-", "_")


def read_config_file(path: Optional[str]) -> dict[str, str]:
    """Read ``key = value`` lines; keys are matched case-insensitively with ``-`` or ``_``."""

    if not path:
        return {}
    config_path = Path(path)
    if not config_path.is_file():
        raise CommandError(f"Config file {config_path} does not exist")
    return {
        normalize_key(key): value
        for key, value in dotenv_values(config_path).items()
        if value is not None
    }


def add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--problem", help="Registry problem name")
    parser.add_argument(
        "--param",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override a problem parameter (repeatable)",
    )
    parser.add_argument("--out", help="Directory receiving output files")
    parser.add_argument("--seed", type=int, help="Seed for statistical commands")
    parser.add_argument("--config", help="File of key = value defaults for any flag")
    # Resolved after the config file is merged.
    parser.set_defaults(verbosity=None)


def add_span_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--t-start", type=float, help="Start of the integration span")
    parser.add_argument("--t-end", type=float, help="End of the integration span")


def add_gwrm_arguments(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("spectral solver")
    group.add_argument("--K", type=int, help="Temporal Chebyshev order per interval")
    group.add_argument("--epsilon", type=float, help="Tail-ratio acceptance threshold")
    group.add_argument("--initial-dt", type=float, help="First interval length")
    group.add_argument("--min-dt", type=float, help="Shortest interval before aborting")
    group.add_argument("--max-dt", type=float, help="Longest interval")
    group.add_argument("--initial-guess", choices=GwrmConfig.GUESSES, help="Interval start guess")
    group.add_argument("--jacobian", choices=GwrmConfig.JACOBIANS, help="Jacobian of the map")
    group.add_argument("--solver-mode", choices=SolverConfig.MODES, help="Fixed-point solver mode")
    group.add_argument("--solver-tol", type=float, help="Fixed-point residual tolerance")
    group.add_argument("--max-iters", type=int, help="Fixed-point iteration budget")
    group.add_argument("--jacobian-reuse", type=int, help="Iterations per Jacobian refresh")


def add_stepper_arguments(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("reference steppers")
    group.add_argument("--rel-tol", type=float, help="Relative local error tolerance")
    group.add_argument("--abs-tol", type=float, help="Absolute local error tolerance")
    group.add_argument("--h0", type=float, help="Initial step")
    group.add_argument("--h-min", type=float, help="Smallest step")
    group.add_argument("--h-max", type=float, help="Largest step")
    group.add_argument("--max-steps", type=int, help="Accepted step budget")
    group.add_argument(
        "--stagnation-window", type=int, help="Consecutive short steps declaring stagnation"
    )


class GwrmCommand(BaseCommand):
    """Base class for ``gwrm-kit`` subcommands."""

    requires_system_checks = []

    def get_version(self) -> str:
        return __version__

    def create_parser(self, prog_name: str, subcommand: str, **kwargs: Any):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        add_common_arguments(parser)
        self._parser = parser
        return parser

    def merge_config(self, options: dict[str, Any]) -> dict[str, Any]:
        """Fill flags left unset on the command line from the ``--config`` file."""

        config = read_config_file(options.get("config"))
        parser = getattr(self, "_parser", None)
        if not config or parser is None:
            return options

        merged = dict(options)
        for action in parser._actions:
            key = normalize_key(action.dest)
            current = merged.get(action.dest)
            unset = current is None or current == [] or (action.const is True and current is False)
            if key not in config or not unset:
                continue
            raw = config[key]
            try:
                if action.dest == "param":
                    merged[action.dest] = [item for item in raw.split(",") if item.strip()]
                elif action.type is not None:
                    merged[action.dest] = action.type(raw)
                elif action.const is True:
                    merged[action.dest] = raw.strip().lower() in ("1", "true", "yes", "on")
                else:
                    merged[action.dest] = raw
            except (TypeError, ValueError) as exc:
                raise CommandError(f"Config value {key}={raw!r} is invalid: {exc}") from exc
            if action.choices is not None and merged[action.dest] not in action.choices:
                raise CommandError(
                    f"Config value {key}={raw!r} is not one of {list(action.choices)}"
                )
        return merged

    def execute(self, *args: Any, **options: Any):
        options = self.merge_config(options)
        if options.get("verbosity") is None:
            options["verbosity"] = DEFAULT_VERBOSITY
        configure_logging(options["verbosity"], options.get("stderr") or sys.stderr)

        try:
            return super().execute(*args, **options)
        except (ConfigurationError, UnsupportedAccuracyError) as exc:
            raise CommandError(str(exc), returncode=EXIT_USAGE) from exc
        except GwrmError as exc:
            raise CommandError(str(exc), returncode=EXIT_INTERNAL) from exc

    # Shared option handling -------------------------------------------------

    def load_problem(self, options: dict[str, Any], required: bool = True) -> Optional[OdeProblem]:
        name = options.get("problem")
        if not name:
            if required:
                raise CommandError("--problem is required")
            return None

        params = parse_param_overrides(options.get("param"))
        problem = get_problem(name, **params)
        start = options.get("t_start")
        end = options.get("t_end")
        if start is not None or end is not None:
            problem = problem.with_span(
                problem.span[0] if start is None else start,
                problem.span[1] if end is None else end,
            )
        return problem

    def method_settings(self, options: dict[str, Any]) -> MethodSettings:
        def present(**values: Any) -> dict[str, Any]:
            return {key: value for key, value in values.items() if value is not None}

        solver = SolverConfig.from_mapping(
            present(
                mode=options.get("solver_mode"),
                tol=options.get("solver_tol"),
                max_iters=options.get("max_iters"),
                jacobian_reuse=options.get("jacobian_reuse"),
            )
        )
        gwrm = GwrmConfig.from_mapping(
            present(
                order=options.get("K"),
                epsilon=options.get("epsilon"),
                initial_dt=options.get("initial_dt"),
                min_dt=options.get("min_dt"),
                max_dt=options.get("max_dt"),
                initial_guess=options.get("initial_guess"),
                jacobian=options.get("jacobian"),
            )
            | {"solver": solver}
        )
        stepper = StepperConfig.from_mapping(
            present(
                rel_tol=options.get("rel_tol"),
                abs_tol=options.get("abs_tol"),
                h0=options.get("h0"),
                h_min=options.get("h_min"),
                h_max=options.get("h_max"),
                max_steps=options.get("max_steps"),
                stagnation_window=options.get("stagnation_window"),
            )
        )
        return MethodSettings(gwrm=gwrm, stepper=stepper, newton=default_newton())

    def output_dir(self, options: dict[str, Any]) -> Optional[Path]:
        out = options.get("out")
        if not out:
            return None
        path = Path(out)
        path.mkdir(parents=True, exist_ok=True)
        return path
