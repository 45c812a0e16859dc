"""
Errors
Exception hierarchy shared by the whole pipeline
"""

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_INVARIANT = 3


class SalgradError(Exception):
    """Base class for every error raised by this package"""

    exit_code = EXIT_RUNTIME


class DimensionError(SalgradError):
    """Shape mismatch between operands"""

    def __init__(self, message, *shapes):
        if shapes:
            message = f"{message}: " + " vs ".join(str(tuple(s)) for s in shapes)
        super().__init__(message)
        self.shapes = [tuple(s) for s in shapes]


class ParameterError(SalgradError):
    """Hyperparameter or argument outside its valid range"""


class ContractError(SalgradError):
    """A pre-condition of an operation was violated"""


class LabelIndexError(SalgradError, IndexError):
    """Class label outside [0, num_classes)"""

    def __init__(self, sample, label, num_classes):
        super().__init__(
            f"Label {label} of sample {sample} outside [0, {num_classes})"
        )
        self.sample = sample
        self.label = label


class NonFiniteError(SalgradError):
    """NaN or Inf produced by a public operation"""


class DatasetFormatError(SalgradError):
    """Malformed dataset file"""


class IdxMagicError(DatasetFormatError):
    """IDX file starts with an unexpected magic number"""


class IdxCountMismatchError(DatasetFormatError):
    """Image and label files disagree on the item count"""


class IdxTruncatedError(DatasetFormatError):
    """IDX payload shorter than its header announces"""


class ArtifactIOError(SalgradError):
    """Reading or writing a pipeline artifact failed"""


class CheckpointError(SalgradError):
    """Unreadable checkpoint"""


class CheckpointMagicError(CheckpointError):
    """File does not start with the checkpoint magic"""


class CheckpointVersionError(CheckpointError):
    """Unknown checkpoint format version"""


class CheckpointManifestError(CheckpointError):
    """Stored tensors do not match the architecture manifest"""


class CheckpointTruncatedError(CheckpointError):
    """Checkpoint payload shorter than announced"""


class ConfigError(SalgradError):
    """Configuration failed schema validation"""

    exit_code = EXIT_USAGE

    def __init__(self, message, errors=None):
        super().__init__(message)
        self.errors = errors or []


class UsageError(SalgradError):
    """Invalid command line"""

    exit_code = EXIT_USAGE


class InvariantViolation(SalgradError):
    """A hard invariant failed during a run"""

    exit_code = EXIT_INVARIANT
