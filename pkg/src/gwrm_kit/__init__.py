"""
gwrm-kit: Chebyshev-in-time weighted residual ODE solver with stiffness and chaos diagnostics
"""

__version__ = "0.1.0"

# Lazy exports keep `import gwrm_kit` cheap and free of scipy imports.
__all__ = [
    "ChebSeries",
    "GwrmConfig",
    "GwrmSolution",
    "Interval",
    "OdeProblem",
    "SolverConfig",
    "StepperConfig",
    "get_problem",
    "lle",
    "solve_adaptive",
    "solve_fixed_point",
]

_EXPORTS = {
    "ChebSeries": "chebyshev",
    "Interval": "chebyshev",
    "GwrmConfig": "gwrm",
    "GwrmSolution": "gwrm",
    "solve_adaptive": "gwrm",
    "OdeProblem": "problems",
    "get_problem": "problems",
    "SolverConfig": "sir",
    "solve_fixed_point": "sir",
    "StepperConfig": "refsolvers",
    "lle": "diagnostics",
}


def __getattr__(name):
    """Lazy import to avoid loading every module on package import."""
    if name in _EXPORTS:
        from importlib import import_module

        return getattr(import_module(f".{_EXPORTS[name]}", __name__), name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
