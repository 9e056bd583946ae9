"""Optimal quoting for an inventory-constrained market maker.

The value function reduces to a linear ODE ladder ``v' = M v`` with a
symmetric tridiagonal ``M``; everything else (quotes, long-horizon limits,
approximations, simulation, backtests) is built on top of that.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConvergenceError,
    DegenerateFit,
    DomainError,
    InsufficientData,
    MissingQuotes,
    OrderingError,
    ParseError,
)
from .model import LadderMatrix, ModelParams, Variant, build_matrix, load_params, validate_params  # noqa: E402
from .ode import SpectralDecomposition, ValueLadder, decompose, integrate_ode_oracle, value_ladder  # noqa: E402
from .quotes import (  # noqa: E402
    AsymptoticSolution,
    QuotePair,
    asymptotic_quotes,
    comparative_statics_report,
    gaussian_approximation,
    gaussian_f0_density,
    optimal_quotes,
    taylor_quotes_near_T,
)

__all__ = [
    "AsymptoticSolution", "ConvergenceError", "DegenerateFit", "DomainError", "InsufficientData",
    "LadderMatrix", "MissingQuotes", "ModelParams", "OrderingError", "ParseError", "QuotePair",
    "SpectralDecomposition", "ValueLadder", "Variant", "asymptotic_quotes", "build_matrix",
    "comparative_statics_report", "decompose", "gaussian_approximation", "gaussian_f0_density",
    "integrate_ode_oracle", "load_params", "optimal_quotes", "taylor_quotes_near_T",
    "validate_params", "value_ladder",
]
