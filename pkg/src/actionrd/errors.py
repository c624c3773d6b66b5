"""Exception types raised across the toolkit."""


class ActionRDError(Exception):
    """Base class for all toolkit errors."""


class AbsoluteContinuityViolation(ActionRDError, ValueError):
    """A divergence needs log(p/q) where q vanishes but p does not."""


class AxisMismatch(ActionRDError, ValueError):
    pass


class SizeLimitExceeded(ActionRDError):
    pass


class DivergenceDetected(ActionRDError, FloatingPointError):
    pass


class MaxIterations(ActionRDError):
    """An iterative loop hit its cap. ``best`` holds the last iterate."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class InfeasibleTarget(ActionRDError, ValueError):
    pass


class ToleranceUnachievable(ActionRDError, ValueError):
    pass


class ProfileInfeasible(ActionRDError, ValueError):
    pass


class PaddingOverflow(ActionRDError):
    pass


class DecodingAmbiguity(ActionRDError):
    pass


class DecodeFailure(ActionRDError):
    pass


class ConfigError(ActionRDError, ValueError):
    pass
