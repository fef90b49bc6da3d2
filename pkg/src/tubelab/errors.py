"""Exception types shared across the package."""


class TubelabError(Exception):
    """Base class for all package-specific errors."""


class FocalRadiusExceeded(TubelabError):
    """The tube radius reaches past a focal point: the Fermi-coordinate
    chart degenerates and metric quantities are no longer defined."""


class ResolutionError(TubelabError):
    """A grid is too coarse for the requested computation (for example,
    more eigenmodes than the grid can resolve)."""


class CoercivityViolation(TubelabError):
    """A quadratic form expected to be positive definite is not, typically
    because the tube parameter epsilon is outside the admissible range."""


class DegenerateConditioning(TubelabError):
    """The survival factor in a conditioned-flow ratio is numerically zero,
    so the conditional expectation is undefined."""


class StepSizeError(TubelabError):
    """A time step is too large to resolve the fiber scale."""


class EmptyEnsemble(TubelabError):
    """A path ensemble contains no paths."""


class LowEffectiveSampleSize(TubelabError):
    """A self-normalized estimate rests on too few surviving paths to be
    meaningful."""


class ConfigError(TubelabError):
    """A run configuration failed validation."""
