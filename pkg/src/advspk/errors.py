"""Exception types shared across the toolkit."""


class AdvspkError(Exception):
    """Base class for all toolkit errors."""


class UtteranceTooShort(AdvspkError):
    pass


class InvalidFilter(AdvspkError):
    pass


class SilentInput(AdvspkError):
    pass


class SegmentTooShort(AdvspkError):
    pass


class InputTooShort(AdvspkError):
    pass


class DimensionMismatch(AdvspkError):
    pass


class ZeroVector(AdvspkError):
    pass


class BatchEmpty(AdvspkError):
    pass


class ManifestTooSmall(AdvspkError):
    pass


class DegenerateLabels(AdvspkError):
    pass


class TrainingDiverged(AdvspkError):
    """Raised on non-finite losses; carries the offending batch's ids."""

    def __init__(self, message, utterance_ids=None, dump_path=None):
        super().__init__(message)
        self.utterance_ids = list(utterance_ids or [])
        self.dump_path = dump_path


class SubsetExhausted(AdvspkError):
    pass


class DuplicateAnnotation(AdvspkError):
    pass


class InvalidScore(AdvspkError):
    pass


class NotAssigned(AdvspkError):
    pass
