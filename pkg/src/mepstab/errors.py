"""Exception hierarchy shared by all modules."""


class MepError(Exception):
    """Base class for all errors raised by mepstab."""


class InputError(MepError, ValueError):
    """Malformed arguments: wrong shapes, violated preconditions on data."""


class ConfigurationError(MepError, ValueError):
    """Unknown model names, invalid parameters, bad experiment configuration."""


class ModelEvaluationError(MepError, ArithmeticError):
    """An energy model produced non-finite output."""


class DegeneratePathError(MepError):
    """A path with zero speed or coincident consecutive nodes."""


class SolverError(MepError, RuntimeError):
    """An iterative or linear solve did not reach its tolerance."""


class WrongCriticalPointError(SolverError):
    """A solve converged to a critical point of the wrong kind."""


class NotCriticalError(MepError):
    """The point handed to a critical-point classifier has a large gradient."""


class NotInYError(InputError):
    """A field does not vanish at both endpoints."""


class FrameError(MepError):
    """Rank deficiency while transporting an orthonormal frame."""


class DegenerateSaddleError(SolverError):
    """The frozen operator at the saddle is singular."""


class PreconditionError(InputError):
    """A counterexample was requested on a landscape that does not realize it."""


class AssumptionASuspect(UserWarning):
    """The tangential multiplier changes sign away from the three expected critical points."""
