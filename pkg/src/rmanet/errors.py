"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operands have incompatible shapes or ranks."""


class ConfigError(ValueError):
    """Invalid or mutually inconsistent configuration."""


class DataError(ValueError):
    """Dataset file is missing, malformed, or violates an invariant."""


class FormatError(ValueError):
    """Checkpoint bytes do not conform to the container format."""


class ProtocolError(ValueError):
    """An operation was invoked in a way that violates its calling protocol."""


class NonFiniteLossError(RuntimeError):
    """Training produced a NaN/Inf loss; carries the offending batch."""

    def __init__(self, message, batch_indices=(), losses=()):
        super().__init__(message)
        self.batch_indices = list(batch_indices)
        self.losses = list(losses)
