"""Exception types shared across the library."""


class DimensionMismatch(ValueError):
    """Array arguments have incompatible shapes."""


class NotPositiveDefinite(ValueError):
    """A matrix required to be symmetric positive definite is not."""


class SingularGram(ValueError):
    """A Gram matrix is numerically singular (linearly dependent vectors)."""


class SingularKernel(ValueError):
    """A kernel matrix is numerically singular (duplicate design points)."""


class RankDeficientFeatures(ValueError):
    """The feature matrix does not have full column rank."""


class DegenerateObservation(ValueError):
    """Observations lie in the excluded measure-zero subspace."""


class QuadratureNotConverged(RuntimeError):
    """Successive quadrature refinements did not agree to tolerance."""


class TooManyUndefined(RuntimeError):
    """More than the tolerated fraction of Monte Carlo samples was degenerate."""


class InvalidSpec(ValueError):
    """A risk-experiment specification is internally inconsistent."""


class ConfigError(ValueError):
    """A run-configuration file could not be parsed or validated."""
