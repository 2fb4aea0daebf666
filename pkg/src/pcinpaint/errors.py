"""Exception hierarchy shared by all modules."""


class PcError(Exception):
    """Base class for all package errors."""


class MalformedFile(PcError):
    """A cloud file has a bad header, row, or non-finite coordinate."""


class EmptyCloud(PcError):
    """An operation that needs at least one point got zero."""


class IoFailure(PcError):
    """Reading or writing a file failed at the OS level."""


class InvalidPose(PcError):
    """Rotation is not orthonormal with determinant +1."""


class AllRemoved(PcError):
    """Every kept-eligible region was dropped; caller should redraw."""


class SizeMismatch(PcError):
    """Two clouds that must have equal size do not."""


class CapExceeded(PcError):
    """Exact assignment requested above the configured size cap."""


class ShapeMismatch(PcError):
    """A tensor does not have the shape an operation requires."""


class NonScalarLoss(PcError):
    """backward() called on a tensor that is not a scalar."""


class CheckpointMismatch(PcError):
    """Checkpoint tensors do not match the current model config."""


class ConfigError(PcError):
    """A config file is missing, unparseable, or inconsistent."""


class InvalidSpec(PcError):
    """A dataset spec has out-of-range fields."""


class TooFewPoints(PcError):
    """The densification baseline needs at least 11 input points."""


class TrainingDiverged(PcError):
    """A non-finite loss was encountered during training."""
