from __future__ import annotations

import numpy as np
from django.core.management.base import CommandError

from gwrm_kit.diagnostics import ClassifyThresholds, lle, lle_along
from gwrm_kit.formatters import dumps_json, read_series_csv, write_json
from gwrm_kit.management.base import GwrmCommand


class Command(GwrmCommand):
    help = "Report frozen-Jacobian Lyapunov exponents and a stiff/chaotic classification."

    def add_arguments(self, parser):
        parser.add_argument(
            "--at", type=float, help="Time of the frozen Jacobian (default span start)"
        )
        parser.add_argument("--state", help="Comma-separated state (default the initial state)")
        parser.add_argument(
            "--along-trajectory", help="Series CSV (t,<labels...>) to evaluate at every row"
        )
        parser.add_argument("--dt", type=float, help="Interval length used to report |Re g| * dt")
        parser.add_argument("--chaos-threshold", type=float, help="Positive real-part threshold")
        parser.add_argument("--stiff-threshold", type=float, help="Stiff magnitude threshold")
        parser.add_argument("--spread", type=float, help="Required stiff/slow magnitude ratio")

    def handle(self, *args, **options):
        problem = self.load_problem(options)
        thresholds = ClassifyThresholds.from_mapping(
            {
                "chaos": options.get("chaos_threshold"),
                "stiff": options.get("stiff_threshold"),
                "spread": options.get("spread"),
            }
        )
        dt = options.get("dt")

        if options.get("along_trajectory"):
            _, times, values = read_series_csv(options["along_trajectory"])
            reports = lle_along(problem, times, values[: problem.dim].T, dt, thresholds)
            payload = [report.as_dict() for report in reports]
        else:
            state = self._state(options.get("state"), problem)
            t = problem.span[0] if options.get("at") is None else options["at"]
            payload = lle(problem, t, state, dt, thresholds).as_dict()

        self.stdout.write(dumps_json(payload))
        out = self.output_dir(options)
        if out is not None:
            write_json(out / "lle.json", payload)

    def _state(self, raw, problem):
        if raw is None:
            return problem.u0
        try:
            state = np.array([float(item) for item in raw.split(",")])
        except ValueError as exc:
            raise CommandError(f"--state must be comma-separated numbers, got {raw!r}") from exc
        if state.size != problem.dim:
            raise CommandError(f"--state needs {problem.dim} values for {problem.name}")
        return state
