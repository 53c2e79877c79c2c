"""Exception types raised across the package."""


class ExaltError(Exception):
    """Base class for all library errors."""


class DataError(ExaltError, ValueError):
    """Malformed or unusable input data."""


class ConfigError(ExaltError, ValueError):
    """Invalid pipeline configuration."""


class StageError(ExaltError, RuntimeError):
    """A pipeline stage failed at runtime."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage '{stage}' failed: {message}")
        self.stage = stage
