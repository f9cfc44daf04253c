"""Exception and warning types shared across the package."""


class BohmReduceError(Exception):
    """Base class for all package errors."""


class GridError(BohmReduceError, ValueError):
    pass


class PhaseUndefinedError(BohmReduceError, ValueError):
    """Too much of the grid has vanishing amplitude for a phase to exist."""


class ConventionError(BohmReduceError, ValueError):
    pass


class NumericalAbort(BohmReduceError, RuntimeError):
    """A solver gave up. ``diagnostics`` carries whatever state explains why."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class PicardConvergenceError(NumericalAbort):
    pass


class NormDriftError(NumericalAbort):
    pass


class ConstraintDriftError(NumericalAbort):
    pass


class TachyonicError(NumericalAbort, ValueError):
    """1 + Q <= 0: the quantum mass would be imaginary."""


class MonotoneRegimeError(NumericalAbort):
    """The energy profile has no interior minimum on the scanned range."""


class CollapseDivergenceError(NumericalAbort):
    pass


class NoLocalizedSolutionError(CollapseDivergenceError):
    pass


class DomainWarning(UserWarning):
    """The grid is narrower than the packet needs."""
