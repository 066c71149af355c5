"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Array dimensions do not match what an operation requires."""


class ConfigError(ValueError):
    """A run-configuration file or value is invalid."""


class FileFormatError(ValueError):
    """A serialized artifact file is malformed."""


class BadMagicError(FileFormatError):
    """File does not start with the expected magic bytes."""


class UnsupportedVersionError(FileFormatError):
    """File carries a format version this code cannot read."""


class TruncatedFileError(FileFormatError):
    """File ends before the declared payload is complete."""


class NumericBlowupError(RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, message: str | None = None):
        self.epoch = epoch
        super().__init__(message or f"non-finite training loss at epoch {epoch}")
