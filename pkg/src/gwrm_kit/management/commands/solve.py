from __future__ import annotations

import numpy as np
from django.core.management.base import CommandError

from gwrm_kit.constants import EXIT_PARTIAL
from gwrm_kit.formatters import write_json, write_series_csv
from gwrm_kit.gwrm import GwrmSolution
from gwrm_kit.management.base import (
    GwrmCommand,
    add_gwrm_arguments,
    add_span_arguments,
    add_stepper_arguments,
)
from gwrm_kit.runs import METHODS, result_series, run_method
from gwrm_kit.smoothing import (
    auto_ti_offset,
    recover_from_ta,
    recover_from_ti,
    transform_lta,
    transform_ta,
    transform_ti,
)


class Command(GwrmCommand):
    help = "Solve a registry problem and write sampled series, coefficients and run statistics."

    def add_arguments(self, parser):
        parser.add_argument("--method", choices=METHODS, default=None, help="Solver (default gwrm)")
        parser.add_argument("--samples", type=int, help="Output samples for spectral runs (1000)")
        parser.add_argument(
            "--spacing", choices=["linear", "log"], help="Output grid spacing (default linear)"
        )
        parser.add_argument(
            "--smoothing",
            choices=["none", "ti", "lta", "ta"],
            help="Solve a smoothed reformulation instead of the problem itself",
        )
        parser.add_argument(
            "--ti-offset",
            help="TI offset A: a number, comma-separated values or 'auto' (default 0)",
        )
        parser.add_argument("--delta", type=float, help="TA averaging half-width")
        add_span_arguments(parser)
        add_gwrm_arguments(parser)
        add_stepper_arguments(parser)

    def handle(self, *args, **options):
        problem = self.load_problem(options)
        method = options.get("method") or "gwrm"
        settings = self.method_settings(options)
        smoothing = options.get("smoothing") or "none"
        samples = options.get("samples") or 1000
        spacing = options.get("spacing") or "linear"

        target, offset, ta = problem, None, None
        if smoothing == "ti":
            offset = self._offset(options.get("ti_offset"), problem, settings.gwrm)
            target = transform_ti(problem, offset)
        elif smoothing == "lta":
            target = transform_lta(problem)
        elif smoothing == "ta":
            if options.get("delta") is None:
                raise CommandError("--smoothing ta requires --delta")
            ta = transform_ta(problem, options["delta"])
            target = ta.problem

        result, record = run_method(target, method, settings, seed=options.get("seed"))
        record.config["smoothing"] = smoothing

        out = self.output_dir(options)
        if out is not None:
            written = self._write_outputs(
                out, problem, target, result, samples, spacing, offset, ta
            )
            record.outputs.update(written)
            write_json(out / "run.json", record.as_dict())

        stats = record.stats
        work = record.work
        unit = "intervals" if method == "gwrm" else "steps"
        self.stdout.write(
            f"{method} on {target.name}: {stats['status']}, {work} {unit}, "
            f"t reached {stats.get('t_reached')}, {record.wall_time:.3f}s"
        )
        if not record.completed:
            raise CommandError(
                stats.get("message") or f"{method} stopped before the end of the span",
                returncode=EXIT_PARTIAL,
            )

    def _offset(self, raw, problem, gwrm_config):
        if raw is None:
            return None
        if raw.strip().lower() == "auto":
            return auto_ti_offset(problem, gwrm_config)
        try:
            return np.array([float(item) for item in raw.split(",")])
        except ValueError as exc:
            raise CommandError(f"--ti-offset must be numbers or 'auto', got {raw!r}") from exc

    def _write_outputs(self, out, problem, target, result, samples, spacing, offset, ta):
        times, values = result_series(result, target, samples, spacing)
        scaled = target.metadata.get("scaled_columns") if target is problem else None
        outputs = {
            "series": str(
                write_series_csv(out / "series.csv", times, values, target.labels, scaled)
            )
        }
        outputs["stats"] = str(write_json(out / "stats.json", result.stats()))

        if not isinstance(result, GwrmSolution) or not result.pieces:
            return outputs

        outputs["coefficients"] = str(write_json(out / "coefficients.json", result.to_dict()))
        if offset is not None or target.metadata.get("transform") in ("ti", "lta"):
            u, long_time_average = recover_from_ti(result, offset)
            labels = [f"u_{label}" for label in problem.labels] + [
                f"W_{label}" for label in problem.labels
            ]
            recovered = np.vstack([u.evaluate(times), long_time_average(times)])
            outputs["recovered"] = str(
                write_series_csv(out / "recovered.csv", times, recovered, labels)
            )
        elif ta is not None:
            averaged = recover_from_ta(result, ta)
            labels = [f"U_{label}" for label in problem.labels]
            outputs["recovered"] = str(
                write_series_csv(out / "recovered.csv", times, averaged.evaluate(times), labels)
            )
        return outputs
