from __future__ import annotations

from django.core.management.base import CommandError

from gwrm_kit.diagnostics import calibrate_modes, estimate_modes
from gwrm_kit.formatters import dumps_json, write_json
from gwrm_kit.management.base import GwrmCommand


class Command(GwrmCommand):
    help = "Estimate Chebyshev modes from an extrema count, or calibrate the estimator."

    def add_arguments(self, parser):
        parser.add_argument("--extrema", type=float, help="Extrema per interval (N_e)")
        parser.add_argument("--epsilon", type=float, help="Target accuracy: 0.01 or 0.001")
        parser.add_argument(
            "--order", type=int, help="Temporal order O_t of the system (default 0)"
        )
        parser.add_argument(
            "--calibrate",
            action="store_true",
            help="Measure minimal orders of random oscillating signals instead",
        )
        parser.add_argument("--signals", type=int, help="Signals used by --calibrate (100)")

    def handle(self, *args, **options):
        epsilon = options.get("epsilon") or 0.01
        if options.get("calibrate"):
            seed = options.get("seed") or 0
            payload = calibrate_modes(options.get("signals") or 100, epsilon, seed).as_dict()
        else:
            if options.get("extrema") is None:
                raise CommandError("--extrema is required unless --calibrate is given")
            estimate = estimate_modes(options["extrema"], epsilon, options.get("order") or 0)
            payload = estimate.as_dict()

        self.stdout.write(dumps_json(payload))
        out = self.output_dir(options)
        if out is not None:
            write_json(out / "modes.json", payload)
