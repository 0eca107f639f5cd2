"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """An input violates a documented precondition."""


class NumericFailure(ArithmeticError):
    """An iterative routine failed to converge or produced non-finite values."""


class UnsupportedGate(InvalidArgument):
    """A gate cannot be handled by the requested differentiation rule."""
