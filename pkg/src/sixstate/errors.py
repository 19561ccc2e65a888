"""Exception types shared across the package."""


class ParameterError(ValueError):
    """An input violates a documented domain constraint or invariant."""


class EmptyPESampleError(ParameterError):
    """The parameter-estimation sample rounds down to zero bits."""


class ConvergenceError(RuntimeError):
    """A truncated series did not meet its tail tolerance within the hard cap."""


class InfeasibleError(RuntimeError):
    """No positive key exists anywhere in the searched parameter region."""
