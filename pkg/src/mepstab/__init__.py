"""Minimum energy paths on analytic landscapes and numerical certification of their stability."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    AssumptionASuspect,
    ConfigurationError,
    DegeneratePathError,
    DegenerateSaddleError,
    FrameError,
    InputError,
    MepError,
    ModelEvaluationError,
    NotCriticalError,
    NotInYError,
    PreconditionError,
    SolverError,
    WrongCriticalPointError,
)
from .geometry import (  # noqa: E402
    DiscretePath,
    NodeField,
    gamma,
    reparameterize,
    tangent_field,
    x_norm,
    y_norm,
)
from .landscape import (  # noqa: E402
    DoubleWell,
    EnergyModel,
    MuellerBrown,
    PerturbedModel,
    evaluate,
    fd_consistency,
    make_builtin,
)
from .mep import MepSolution, find_minimizer, residual_F, solve_string  # noqa: E402
from .stability import apply_dF, estimate_gamma, lambda_bar, solve_dF  # noqa: E402

__all__ = [
    "AssumptionASuspect",
    "ConfigurationError",
    "DegeneratePathError",
    "DegenerateSaddleError",
    "FrameError",
    "InputError",
    "MepError",
    "ModelEvaluationError",
    "NotCriticalError",
    "NotInYError",
    "PreconditionError",
    "SolverError",
    "WrongCriticalPointError",
    "DiscretePath",
    "NodeField",
    "gamma",
    "reparameterize",
    "tangent_field",
    "x_norm",
    "y_norm",
    "DoubleWell",
    "EnergyModel",
    "MuellerBrown",
    "PerturbedModel",
    "evaluate",
    "fd_consistency",
    "make_builtin",
    "MepSolution",
    "find_minimizer",
    "residual_F",
    "solve_string",
    "apply_dF",
    "estimate_gamma",
    "lambda_bar",
    "solve_dF",
]
