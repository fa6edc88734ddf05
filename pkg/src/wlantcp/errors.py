class InvalidParameterError(ValueError):
    """Raised when an input violates a documented precondition."""


class NumericalFailureError(ArithmeticError):
    """Raised when an iterative solver fails to converge or a quantity degenerates."""


class LatticeBudgetError(RuntimeError):
    """Exact MVA would need more population-lattice points than allowed."""
