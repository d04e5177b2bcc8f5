"""Exception hierarchy.

Numerical failures (``NumericalFailure`` subclasses) map to exit status 3 in the
CLI, hypothesis violations (``EndpointConjugateError``) to exit status 2.
"""


class MorseIndexError(Exception):
    """Base class for all errors raised by this package."""


class RejectedInputError(MorseIndexError, ValueError):
    """Malformed or out-of-tolerance problem input."""


class DerivativeUnavailableError(MorseIndexError):
    """The curvature profile cannot supply ``S'(x)``."""


class EndpointConjugateError(MorseIndexError):
    """``t = 1`` is (numerically) a conjugate instant."""


class NumericalFailure(MorseIndexError):
    """A numerical procedure did not deliver a trustworthy result."""


class PropagationDivergedError(NumericalFailure):
    def __init__(self, step: int, message: str | None = None):
        self.step = step
        super().__init__(message or f"non-finite values at integration step {step}")


class ContourDegenerateError(NumericalFailure):
    """``|f|`` dropped below the modulus floor on the contour."""


class NonResolvableWindingError(NumericalFailure):
    """Adaptive refinement exceeded its depth limit."""


class EndpointDegenerateError(NumericalFailure):
    """A Galerkin matrix at ``t = 0`` or ``t = 1`` has a zero pivot."""


class StabilizationError(NumericalFailure):
    """The Galerkin inertia difference did not settle under refinement."""


class CrossingIrregularError(NumericalFailure):
    """Every attempted shift left a degenerate crossing form."""
