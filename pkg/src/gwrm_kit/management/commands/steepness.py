from __future__ import annotations

from django.core.management.base import CommandError

from gwrm_kit.formatters import dumps_json, read_series_csv, write_json
from gwrm_kit.gwrm import solve_adaptive
from gwrm_kit.management.base import (
    GwrmCommand,
    add_gwrm_arguments,
    add_span_arguments,
)
from gwrm_kit.smoothing import steepness


class Command(GwrmCommand):
    help = "Report the steepness of sampled data or of a spectral solution per variable."

    def add_arguments(self, parser):
        parser.add_argument("--input", help="Series CSV (t,<labels...>) to measure")
        add_span_arguments(parser)
        add_gwrm_arguments(parser)

    def handle(self, *args, **options):
        if options.get("input"):
            labels, times, values = read_series_csv(options["input"])
            reports = {
                label: steepness((times, values[index])).as_dict()
                for index, label in enumerate(labels)
            }
        else:
            problem = self.load_problem(options, required=False)
            if problem is None:
                raise CommandError("Either --input or --problem is required")
            solution = solve_adaptive(problem, self.method_settings(options).gwrm)
            reports = {
                label: steepness(solution, index).as_dict()
                for index, label in enumerate(problem.labels)
            }

        self.stdout.write(dumps_json(reports))
        out = self.output_dir(options)
        if out is not None:
            write_json(out / "steepness.json", reports)
