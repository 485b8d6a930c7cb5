class BilliardError(Exception):
    """Base class for all library errors."""


class GeometryError(BilliardError, ValueError):
    """Invalid curve, ellipse or map (non-embedded, non-convex, bad determinant...)."""


class DomainError(BilliardError, ValueError):
    """Phase point outside the domain of the billiard map."""


class BracketError(BilliardError, RuntimeError):
    """A root could not be bracketed; usually a sign of a non-convex curve."""


class ConvergenceError(BilliardError, RuntimeError):
    """An iterative solver failed to converge."""

    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations
