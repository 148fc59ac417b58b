class ParameterError(ValueError):
    """A parameter is outside its allowed domain."""


class DomainError(ValueError):
    """A point is outside the support of a density."""


class ConsistencyError(ValueError):
    """Weights or masses violate a conservation invariant."""


class UnsupportedInputError(ValueError):
    """Input is well formed but not handled by this operation."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""
