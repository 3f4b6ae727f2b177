"""Exception types shared across the library."""


class ThetaGeoError(Exception):
    """Base class for all library errors."""


class LatticeError(ThetaGeoError):
    """Invalid period matrix (not symmetric, or Im Z not positive definite)."""


class TruncationOverflowError(ThetaGeoError):
    """Certified theta truncation radius would exceed the allowed cap."""


class ConvexityError(ThetaGeoError):
    """A Kahler potential failed its positivity certificate."""


class NoConvergenceError(ThetaGeoError):
    """Newton iteration did not reach the requested tolerance."""


class QuadratureError(ThetaGeoError):
    """Quadrature value moved more than the allowed amount under refinement."""


class CrossCheckError(ThetaGeoError):
    """Two independent evaluation routes disagreed beyond tolerance."""


class FitConditioningError(ThetaGeoError):
    """Design matrix of an asymptotic fit exceeded the condition bound."""


class BlendConvexityError(ThetaGeoError):
    """Poisson blend of boundary duals is not convex on the test grid."""


class ConfigError(ThetaGeoError):
    """Malformed experiment configuration."""
