"""Exception types shared across the pricing modules."""


class PricingError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(PricingError):
    """Model, contract, or configuration input violates a precondition.

    The message names the first offending field, e.g. ``"generator row 0
    sums to -0.5"`` or ``"sigma[1] not > 0"``.
    """


class DegenerateVolatilities(PricingError):
    """The closed-form European put requires distinct regime variances.

    Raised when ``|sigma1**2 - sigma2**2| < 1e-10``; callers should fall
    back to the Monte Carlo or finite-difference oracles (or plain
    Black-Scholes when the short rates coincide as well).
    """


class QuadratureNotConverged(PricingError):
    """The adaptive quadrature could not meet its error tolerances."""


class ExtrapolationRefused(PricingError):
    """A price was requested at a state outside the computed grid."""


class InterpolationOutOfRange(PricingError):
    """A grid interpolation was asked for a point outside the grid."""


class NotApplicable(PricingError):
    """The requested mapping is undefined for the given state.

    Used by the fixed/floating symmetry, which only holds at inception
    (t = 0 and empty running average).
    """


class LinearSolveFailure(PricingError):
    """A banded or sparse linear solve failed inside the FD scheme."""
