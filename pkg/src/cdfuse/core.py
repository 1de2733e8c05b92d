"""Core domain types: logit vectors, distributions, variant kinds, configs.

All probability math runs in 64-bit floats. Values are immutable after
construction so every operation in the engine stays a pure function and
is safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Union

import numpy as np

from .errors import InvalidLogits, InvalidVocab, ShapeMismatch

__all__ = [
    "LogitVector",
    "Distribution",
    "Original",
    "DiffusionNoise",
    "Downsample",
    "NoImage",
    "Edited",
    "VariantKind",
    "VariantRecord",
    "WeightMetric",
    "Single",
    "Naive",
    "Weighted",
    "FusionMode",
    "CalibrationConfig",
    "softmax",
    "densify",
]

NEG_INF = float("-inf")


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LogitVector:
    """Pre-softmax scores over a vocabulary, for one decoding step.

    Either dense (``values`` covers every token) or sparse (``ids``/``values``
    list a subset, every unlisted token scores ``floor``). Entries may be
    -inf (a token ruled out entirely) but never NaN or +inf.
    """

    vocab_size: int
    values: np.ndarray
    ids: np.ndarray | None = None
    floor: float = NEG_INF

    def __post_init__(self):
        if self.vocab_size < 2:
            raise InvalidVocab(f"vocab_size must be >= 2, got {self.vocab_size}")
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise InvalidLogits(f"logit values must be 1-D, got shape {values.shape}")
        if np.isnan(values).any():
            raise InvalidLogits("logit values contain NaN")
        if np.isposinf(values).any():
            raise InvalidLogits("logit values contain +inf")
        object.__setattr__(self, "values", _freeze(values))
        if self.ids is None:
            if len(values) != self.vocab_size:
                raise InvalidVocab(
                    f"dense length {len(values)} != vocab_size {self.vocab_size}"
                )
        else:
            ids = np.asarray(self.ids, dtype=np.int64)
            if ids.ndim != 1 or len(ids) != len(values):
                raise InvalidLogits("sparse ids and values must align")
            if len(ids) and (ids.min() < 0 or ids.max() >= self.vocab_size):
                raise InvalidVocab("sparse token id outside vocabulary")
            if len(np.unique(ids)) != len(ids):
                raise InvalidLogits("sparse ids contain duplicates")
            if np.isinf(values).any():
                raise InvalidLogits("sparse listed values must be finite")
            if math.isnan(self.floor):
                raise InvalidLogits("sparse floor is NaN")
            if self.floor == float("inf"):
                raise InvalidLogits("sparse floor is +inf")
            object.__setattr__(self, "ids", _freeze(ids))

    @classmethod
    def dense(cls, values) -> "LogitVector":
        values = np.asarray(values, dtype=np.float64)
        return cls(vocab_size=len(values), values=values)

    @classmethod
    def sparse(cls, vocab_size: int, entries: Mapping[int, float], floor: float = NEG_INF) -> "LogitVector":
        ids = np.fromiter(entries.keys(), dtype=np.int64, count=len(entries))
        vals = np.fromiter(entries.values(), dtype=np.float64, count=len(entries))
        return cls(vocab_size=vocab_size, values=vals, ids=ids, floor=floor)

    @property
    def is_dense(self) -> bool:
        return self.ids is None


def densify(logits: LogitVector) -> LogitVector:
    """Expand a sparse vector: listed tokens keep their scores, the rest take floor."""
    if logits.is_dense:
        return logits
    out = np.full(logits.vocab_size, logits.floor, dtype=np.float64)
    out[logits.ids] = logits.values
    return LogitVector(vocab_size=logits.vocab_size, values=out)


@dataclass(frozen=True)
class Distribution:
    """Normalized probability vector with cached entropy (nats) and confidence."""

    probs: np.ndarray
    entropy_nats: float = field(init=False)
    confidence: float = field(init=False)

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 1 or len(probs) < 2:
            raise InvalidVocab(f"distribution needs >= 2 entries, got shape {probs.shape}")
        if np.isnan(probs).any() or (probs < 0).any():
            raise InvalidLogits("probabilities must be finite and non-negative")
        total = float(probs.sum())
        if abs(total - 1.0) > 1e-9:
            raise InvalidLogits(f"probabilities sum to {total}, expected 1 within 1e-9")
        object.__setattr__(self, "probs", _freeze(probs))
        object.__setattr__(self, "entropy_nats", _entropy_nats(probs))
        object.__setattr__(self, "confidence", float(probs.max()))

    @property
    def vocab_size(self) -> int:
        return len(self.probs)

    @property
    def argmax(self) -> int:
        # np.argmax returns the first maximum, i.e. the lowest token id on ties
        return int(np.argmax(self.probs))


def _entropy_nats(probs: np.ndarray) -> float:
    nz = probs[probs > 0.0]
    return float(-(nz * np.log(nz)).sum())


def softmax(logits: LogitVector) -> Distribution:
    """Numerically stable softmax (max-subtraction); sparse inputs are densified first."""
    dense = densify(logits)
    x = dense.values
    m = float(x.max())
    if m == NEG_INF:
        raise InvalidLogits("all logits are -inf")
    z = np.exp(x - m)
    return Distribution(probs=z / z.sum())


# ---------------------------------------------------------------------------
# Variant kinds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Original:
    name = "original"

    def params(self) -> dict:
        return {}


@dataclass(frozen=True)
class DiffusionNoise:
    steps: int
    schedule: str = "linear999"
    name = "noise"

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError(f"noise steps must be positive, got {self.steps}")

    def params(self) -> dict:
        return {"steps": self.steps, "schedule": self.schedule}


@dataclass(frozen=True)
class Downsample:
    ratio: int
    name = "downsample"

    def __post_init__(self):
        if self.ratio < 1:
            raise ValueError(f"downsample ratio must be positive, got {self.ratio}")

    def params(self) -> dict:
        return {"ratio": self.ratio}


@dataclass(frozen=True)
class NoImage:
    name = "noimage"

    def params(self) -> dict:
        return {}


@dataclass(frozen=True)
class Edited:
    cfg_text: float
    instruction: str = ""
    name = "edited"

    def params(self) -> dict:
        return {"cfg_text": self.cfg_text, "instruction": self.instruction}


VariantKind = Union[Original, DiffusionNoise, Downsample, NoImage, Edited]

# canonical presentation order for variant kinds, used in reports and fusion
KIND_ORDER = ("original", "noise", "downsample", "noimage", "edited")


def kind_key(kind: VariantKind) -> str:
    """Stable string key for a kind including its parameters."""
    params = kind.params()
    if not params:
        return kind.name
    inner = ",".join(f"{k}={params[k]}" for k in sorted(params))
    return f"{kind.name}[{inner}]"


@dataclass(frozen=True)
class VariantRecord:
    """One (sample, variant) row of a logit-record file."""

    sample_id: str
    variant: VariantKind
    logits: LogitVector
    answer_token_map: tuple[frozenset[int], frozenset[int]] | None = None


# ---------------------------------------------------------------------------
# Calibration configuration
# ---------------------------------------------------------------------------

class WeightMetric(Enum):
    ENTROPY = "entropy"
    CONFIDENCE = "confidence"
    UNCONFIDENCE = "unconfidence"
    PDD = "pdd"


@dataclass(frozen=True)
class Single:
    pass


@dataclass(frozen=True)
class Naive:
    pass


@dataclass(frozen=True)
class Weighted:
    metric: WeightMetric


FusionMode = Union[Single, Naive, Weighted]


@dataclass(frozen=True)
class CalibrationConfig:
    """Knobs of the calibration pipeline.

    alpha scales the contrastive correction; beta is the plausibility cutoff
    (fraction of the original max probability a token must reach to survive).
    weight_scale is an optional global multiplier on metric-derived fusion
    weights, kept at 1.0 so metric weights apply raw.
    """

    alpha: float = 1.0
    beta: float = 0.2
    fusion: FusionMode = Single()
    normalize_naive: bool = False
    weight_scale: float = 1.0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")


def require_same_vocab(*vectors: LogitVector) -> int:
    sizes = {v.vocab_size for v in vectors}
    if len(sizes) != 1:
        raise ShapeMismatch(f"vocab sizes differ: {sorted(sizes)}")
    return sizes.pop()
