"""Parametrized Lyapunov equations with low-rank parameter dependence."""

from ._core import (
    Evaluator,
    ParamLyapError,
    h2_sq,
    is_stable,
    laplacian,
    lyap_residual,
    mass_config,
    network_matrix,
    optimize_viscosities,
    selftest,
    smw_solution,
    solve_lyap,
    vibration_model,
)

__all__ = [
    "Evaluator",
    "ParamLyapError",
    "h2_sq",
    "is_stable",
    "laplacian",
    "lyap_residual",
    "mass_config",
    "network_matrix",
    "optimize_viscosities",
    "selftest",
    "smw_solution",
    "solve_lyap",
    "vibration_model",
]
