"""Exception hierarchy shared by every authformer package."""


class AuthFormerError(Exception):
    """Base class for all authformer errors."""


class AuthFormerValidationError(AuthFormerError, ValueError):
    """Invalid input, configuration or combination (CLI exit code 2)."""


class ShapeError(AuthFormerValidationError):
    """Tensor shapes do not satisfy an operation's contract."""


class ConfigError(AuthFormerValidationError):
    """Model or run configuration is inconsistent."""


class RouteError(AuthFormerValidationError):
    """A modality bundle cannot be routed."""


class ContractError(AuthFormerError, RuntimeError):
    """An API was used outside its contract (e.g. backward on a non-scalar)."""


class DivergenceError(AuthFormerError, RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, batch: int, loss: float):
        self.epoch = epoch
        self.batch = batch
        self.loss = loss
        super().__init__(
            f"Training diverged at epoch {epoch}, batch {batch}: loss={loss}"
        )


class StorageError(AuthFormerError, OSError):
    """A dataset, blob or checkpoint file could not be read or written."""


class FormatError(StorageError):
    """A file does not follow its binary or JSON layout."""


class ChecksumError(StorageError):
    """A checkpoint's CRC-32 does not match its contents."""


class UnsupportedVersionError(StorageError):
    """A file was written by an unsupported format version."""
