"""Exception types raised across the package."""


class DimensionError(ValueError):
    """Array shapes do not agree."""


class ParameterError(ValueError):
    """A scalar parameter is outside its admissible range."""


class NotPSDError(ValueError):
    """A matrix expected to be symmetric PSD is not, beyond tolerance."""


class DareDivergenceError(RuntimeError):
    """Riccati fixed-point iteration did not converge.

    ``residual`` holds the last Frobenius residual and ``action_index`` the
    offending action when the failure happened inside a per-action sweep.
    """

    def __init__(self, message, residual=float("nan"), action_index=None):
        super().__init__(message)
        self.residual = residual
        self.action_index = action_index


class SpecGenerationError(RuntimeError):
    """Random environment generation could not produce a valid draw."""


class UnsupportedEnvironmentError(ValueError):
    """The environment lacks a property an evaluator needs (e.g. stability)."""


class InvalidFloorError(ValueError):
    """Covariance floor exceeds the stationary covariance."""


class PerturbationError(RuntimeError):
    """No well-conditioned similarity transform could be drawn."""


class ConfigError(ValueError):
    """Experiment configuration is malformed."""
