"""Exception types shared across the package."""


class FrackinError(Exception):
    """Base class for all package errors."""


class InvalidInputError(FrackinError, ValueError):
    """Non-finite, non-positive or otherwise malformed input."""


class DomainError(FrackinError, ValueError):
    """A mathematical precondition (e.g. integrability) does not hold."""


class QuadratureError(FrackinError, RuntimeError):
    """A quadrature failed to reach its tolerance."""


class StabilityError(FrackinError, ValueError):
    """A time step violates a stability bound; ``suggested`` holds a safe value."""

    def __init__(self, msg, suggested=None):
        super().__init__(msg)
        self.suggested = suggested


class SolverAbort(FrackinError, RuntimeError):
    """A solver produced an invalid state (e.g. negative density)."""
