class EvaluationError(RuntimeError):
    """A blackbox evaluation failed: process exit, malformed reply or non-finite value."""


class EvaluationTimeout(EvaluationError):
    """The blackbox did not answer within the per-call timeout."""


class NonFiniteGradientError(FloatingPointError):
    """A gradient estimate contained NaN or infinite components."""


class ConfigError(ValueError):
    """Invalid run configuration. ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
