"""Exception hierarchy shared by all toolkit modules."""


class OcrToolkitError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(OcrToolkitError, ValueError):
    """Invalid option, threshold, pattern or configuration file."""


class DataError(OcrToolkitError, ValueError):
    """Malformed input data (bad JSONL line, schema mismatch, ...)."""

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class PairingError(DataError):
    """Predictions and ground truth cannot be paired by doc_id."""

    def __init__(self, message, orphans=()):
        self.orphans = list(orphans)
        super().__init__(message)


class NoRewardSignal(OcrToolkitError, ValueError):
    """Every reward component is absent (or carries zero weight)."""


class MergeError(OcrToolkitError, ValueError):
    """Checkpoints are structurally incompatible."""

    def __init__(self, message, tensor=None):
        self.tensor = tensor
        super().__init__(message)


class InfeasibleTargetError(OcrToolkitError, ValueError):
    """Requested vocabulary size is smaller than the mandatory token set."""

    def __init__(self, message, minimal_size):
        self.minimal_size = minimal_size
        super().__init__(message)


class TokenizationError(OcrToolkitError):
    """A document could not be tokenized."""

    def __init__(self, message, doc_id=None):
        self.doc_id = doc_id
        super().__init__(message)
