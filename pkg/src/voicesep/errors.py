"""Exception hierarchy shared across the package."""


class VoicesepError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(VoicesepError):
    """Input file is not syntactically valid (bad JSON/CSV)."""


class ValidationError(VoicesepError):
    """Input violates a score invariant; message names the offending field."""


class MissingVoiceError(ValidationError):
    """A note required to carry a voice label does not have one."""


class NotMonophonicError(ValidationError):
    """Two notes of the same voice share an onset (preprocessing skipped)."""


class ConfigError(VoicesepError):
    """Invalid configuration value."""


class StateError(VoicesepError):
    """Operation requires state that is not present (e.g. missing targets)."""


class ConsistencyError(VoicesepError):
    """Two inputs that must agree (note ids, node order) do not."""


class ShapeError(VoicesepError):
    """Tensor operands have incompatible shapes."""


class ContractError(VoicesepError):
    """An operation was called outside its contract (e.g. backward on a non-scalar)."""


class NumericalError(VoicesepError):
    """A numerical routine failed its accuracy contract."""


class DegreeError(VoicesepError):
    """A link set violates the one-incoming/one-outgoing degree constraint."""


class CheckpointError(VoicesepError):
    """Checkpoint file is unreadable or inconsistent with the requested model."""


class TrainingDivergedError(VoicesepError):
    """Training produced a non-finite loss."""

    def __init__(self, message: str, epoch: int | None = None, piece: str | None = None):
        super().__init__(message)
        self.epoch = epoch
        self.piece = piece


class SizeError(VoicesepError):
    """Requested export is too large; message suggests a remedy."""
