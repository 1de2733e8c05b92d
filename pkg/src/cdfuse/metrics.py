"""Probability-level analysis: entropy, Hellinger distance, answer and
revision classification, and Jaccard overlap of rectified-answer sets.
"""

from __future__ import annotations

from enum import Enum
from typing import Iterable, Set

import numpy as np

from .core import Distribution
from .errors import InvalidAnswerMap, InvalidGold, ShapeMismatch

__all__ = [
    "AnswerClass",
    "RevisionClass",
    "entropy",
    "hellinger",
    "classify_answer",
    "classify_revision",
    "jaccard",
]


class AnswerClass(Enum):
    YES = "yes"
    NO = "no"
    OTHER = "other"


class RevisionClass(Enum):
    UNCHANGED_CORRECT = "unchanged_correct"
    UNCHANGED_WRONG = "unchanged_wrong"
    REVISE_CORRECT = "revise_correct"
    REVISE_WRONG = "revise_wrong"


def entropy(d: Distribution) -> float:
    """Shannon entropy in nats, -sum(p ln p) with 0 ln 0 := 0 (cached on the value)."""
    return d.entropy_nats


def hellinger(p: Distribution, q: Distribution) -> float:
    """Hellinger distance, normalized so the range is [0, 1].

    H(p, q) = sqrt(sum((sqrt(p_i) - sqrt(q_i))^2) / 2); clipped at 1.0 to
    absorb last-ulp float excess on disjoint supports.
    """
    if p.vocab_size != q.vocab_size:
        raise ShapeMismatch(f"distribution sizes differ: {p.vocab_size} vs {q.vocab_size}")
    diff = np.sqrt(p.probs) - np.sqrt(q.probs)
    return min(1.0, float(np.sqrt(np.dot(diff, diff) / 2.0)))


def classify_answer(d: Distribution, yes_ids: Set[int], no_ids: Set[int]) -> AnswerClass:
    """Map the argmax token (lowest id on ties) to yes / no / other."""
    if set(yes_ids) & set(no_ids):
        raise InvalidAnswerMap(f"yes/no token sets overlap: {sorted(set(yes_ids) & set(no_ids))}")
    top = d.argmax
    if top in yes_ids:
        return AnswerClass.YES
    if top in no_ids:
        return AnswerClass.NO
    return AnswerClass.OTHER


def classify_revision(
    orig: AnswerClass, cal: AnswerClass, gold: AnswerClass
) -> RevisionClass:
    if gold == AnswerClass.OTHER:
        raise InvalidGold("gold answer must be yes or no")
    if orig == cal:
        return (
            RevisionClass.UNCHANGED_CORRECT if cal == gold else RevisionClass.UNCHANGED_WRONG
        )
    return RevisionClass.REVISE_CORRECT if cal == gold else RevisionClass.REVISE_WRONG


def jaccard(a: Iterable, b: Iterable) -> float:
    """|a & b| / |a | b|; two empty sets count as identical (1.0)."""
    a, b = set(a), set(b)
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)
