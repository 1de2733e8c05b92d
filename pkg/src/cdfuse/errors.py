"""Exception types shared across the engine.

Data errors (bad files, missing records) are distinguished from usage
errors so the CLI can map them to distinct exit codes.
"""


class EngineError(Exception):
    """Base class for all engine errors."""


class InvalidLogits(EngineError):
    """Logit vector contains NaN or is otherwise unusable."""


class InvalidVocab(EngineError):
    """Vocabulary size below 2 or inconsistent."""


class ShapeMismatch(EngineError):
    """Operands do not share a vocabulary size."""


class EmptyVariantSet(EngineError):
    """A fusion operation received no variants."""


class InvalidBeta(EngineError):
    """Plausibility parameter outside [0, 1]."""


class InvalidImage(EngineError):
    """Pixel array has NaN entries or a bad shape."""


class StepOutOfRange(EngineError):
    """Requested noise step exceeds the schedule length."""


class RatioTooLarge(EngineError):
    """Downsampling ratio exceeds an image side."""


class InvalidAnswerMap(EngineError):
    """Yes/no token-id sets overlap."""


class InvalidGold(EngineError):
    """Gold answer is neither yes nor no."""


class RecordFormatError(EngineError):
    """Logit-record file violates the JSONL schema."""


class DatasetFormatError(EngineError):
    """Dataset file violates the JSONL schema."""


class EmptyDataset(EngineError):
    """Evaluation was asked to run over zero items."""


class MissingVariant(EngineError):
    """A required (sample_id, variant) record is absent."""

    def __init__(self, sample_id: str, kind: str):
        self.sample_id = sample_id
        self.kind = kind
        super().__init__(f"missing variant record: sample_id={sample_id!r} kind={kind!r}")


class AmbiguousVariant(EngineError):
    """A kind selector matched more than one record for a sample."""

    def __init__(self, sample_id: str, kind: str, count: int):
        self.sample_id = sample_id
        self.kind = kind
        super().__init__(
            f"ambiguous variant selector: sample_id={sample_id!r} kind={kind!r} matches {count} records"
        )
