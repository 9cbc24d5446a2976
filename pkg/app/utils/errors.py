"""
Domain exceptions.

Every error raised by the services derives from FaaError so the CLI and the
HTTP routers can map it onto an exit code / status code in one place.
"""


class FaaError(Exception):
    """Base class for all simulator errors."""

    exit_code = 3


class ConfigError(FaaError):
    """Malformed or inconsistent scenario / settings input."""

    exit_code = 1


class GuardValidationFailed(FaaError):
    """Schedule guard gaps do not satisfy the separability budget."""

    exit_code = 2

    def __init__(self, message: str, margin_s: float):
        super().__init__(message)
        self.margin_s = margin_s


class ScheduleError(FaaError):
    pass


class FabricError(FaaError):
    pass


class SynthesisError(FaaError):
    pass


class DspError(FaaError):
    pass


class CalibrationError(FaaError):
    pass


class ImagingError(FaaError):
    pass


class StageError(FaaError):
    """Wraps a failure inside one pipeline stage."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 3)
