"""Exception types shared across the toolkit.

ValidationError covers bad inputs and configuration (CLI exit code 1);
the ToolkitError family covers runtime failures (CLI exit code 2).
"""


class ToolkitError(Exception):
    """Base class for runtime failures."""


class ValidationError(ValueError):
    """Invalid input data, arguments, or configuration."""


class ModelFormatError(ToolkitError):
    """Model file is missing, truncated, corrupt, or has an unknown version."""


class ScorerProtocolError(ToolkitError):
    """An external scorer violated the wire protocol."""

    def __init__(self, message: str, request_id: int | None = None):
        if request_id is not None:
            message = f"{message} (request id {request_id})"
        super().__init__(message)
        self.request_id = request_id


class TrainingDivergedError(ToolkitError):
    """Training produced a non-finite loss (learning rate too high)."""
