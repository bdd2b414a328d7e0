"""Exception hierarchy shared by all modules."""


class HomogLabError(Exception):
    """Base class for every failure raised by the lab."""


class ConfigurationError(HomogLabError, ValueError):
    """Invalid experiment or grid configuration (e.g. resolution rule violated)."""


class PreconditionError(HomogLabError, ValueError):
    """Input does not satisfy an operation's precondition."""


class PrecisionError(HomogLabError, ValueError):
    """A ball or radius is too small relative to the grid spacing."""


class DegenerateSolutionError(HomogLabError, ValueError):
    """A normalizing quantity vanished (zero solution)."""


class SolverFailure(HomogLabError, RuntimeError):
    """Iterative solver hit its iteration cap before reaching tolerance."""

    def __init__(self, message, residual):
        super().__init__(f"{message} (final relative residual {residual:.3e})")
        self.residual = residual
