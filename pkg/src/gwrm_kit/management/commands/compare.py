from __future__ import annotations

import logging

from django.core.management.base import CommandError

from gwrm_kit.formatters import format_table, write_json, write_table_csv
from gwrm_kit.management.base import (
    GwrmCommand,
    add_gwrm_arguments,
    add_span_arguments,
    add_stepper_arguments,
)
from gwrm_kit.refsolvers import reference_solution
from gwrm_kit.runs import METHODS, max_abs_error, result_series, run_method

logger = logging.getLogger(__name__)

COLUMNS = ("method", "status", "completed", "work", "wall_time", "max_error")


class Command(GwrmCommand):
    help = "Run several methods at equal tolerance and tabulate work, time and error."

    def add_arguments(self, parser):
        parser.add_argument(
            "--methods",
            help=f"Comma-separated methods to compare (default {','.join(METHODS)})",
        )
        parser.add_argument(
            "--tolerance",
            type=float,
            help="Shared tolerance: GWRM epsilon and stepper rel_tol (default 1e-3)",
        )
        parser.add_argument(
            "--reference-rtol", type=float, help="Tolerance of the reference run (1e-10)"
        )
        parser.add_argument(
            "--reference-method", help="scipy solve_ivp method for the reference (Radau)"
        )
        parser.add_argument("--samples", type=int, help="Samples per spectral run (200)")
        add_span_arguments(parser)
        add_gwrm_arguments(parser)
        add_stepper_arguments(parser)

    def handle(self, *args, **options):
        methods = [
            name.strip() for name in (options.get("methods") or ",".join(METHODS)).split(",")
        ]
        methods = [name for name in methods if name]
        unknown = sorted(set(methods) - set(METHODS))
        if unknown:
            raise CommandError(
                f"Unknown method(s) {', '.join(unknown)}; available: {', '.join(METHODS)}"
            )
        if len(set(methods)) < 2:
            raise CommandError("compare needs at least two distinct methods")

        tolerance = options.get("tolerance")
        if tolerance is not None:
            options = {**options, "rel_tol": options.get("rel_tol") or tolerance}
            options["epsilon"] = options.get("epsilon") or tolerance

        problem = self.load_problem(options)
        settings = self.method_settings(options)
        reference = reference_solution(
            problem,
            rtol=options.get("reference_rtol") or 1e-10,
            method=options.get("reference_method") or "Radau",
        )

        out = self.output_dir(options)
        rows = []
        for method in dict.fromkeys(methods):
            result, record = run_method(problem, method, settings, seed=options.get("seed"))
            times, values = result_series(result, problem, options.get("samples") or 200)
            record.stats["max_error"] = max_abs_error(times, values, reference)
            if out is not None:
                record.outputs["run"] = str(out / method / "run.json")
                write_json(out / method / "run.json", record.as_dict())
            rows.append(record.row())

        self.stdout.write(format_table(rows, COLUMNS))
        if out is not None:
            write_table_csv(out / "compare.csv", rows, COLUMNS)
            logger.info("Comparison written to %s", out / "compare.csv")
