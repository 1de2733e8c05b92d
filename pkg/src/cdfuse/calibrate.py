"""Contrastive calibration of next-token logits.

The single-variant rule amplifies the original scores and subtracts the
variant's: (1+a)*orig - a*variant, i.e. orig + a*(orig - variant). Fusion
generalizes the correction to a per-variant weighted sum of differences,

    out = orig + sum_i w_i * (orig - variant_i),

with w_i either a shared constant (naive fusion) or a metric of the
variant's own distribution (entropy, confidence, unconfidence, Hellinger
distance from the original). A plausibility constraint then zeroes every
token whose ORIGINAL probability falls below beta times the original
maximum; the constraint conditions on the raw distribution, not the
calibrated one.

-inf bookkeeping for sparse-derived vectors: a difference term touching an
-inf score contributes 0 for that variant (an unmeasured score must not
manufacture finite or infinite corrections), and a token the original
scores at -inf stays at -inf in the output.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    CalibrationConfig,
    Distribution,
    LogitVector,
    Naive,
    Single,
    VariantKind,
    Weighted,
    WeightMetric,
    densify,
    require_same_vocab,
    softmax,
)
from .errors import EmptyVariantSet, InvalidBeta, InvalidLogits
from .metrics import hellinger

__all__ = [
    "CalibrationInput",
    "CalibrationOutput",
    "cd_single",
    "fuse_naive",
    "fuse_weighted",
    "apply_plausibility",
    "calibrate",
]


@dataclass(frozen=True)
class CalibrationInput:
    original: LogitVector
    variants: tuple[tuple[VariantKind, LogitVector], ...]
    config: CalibrationConfig

    def __post_init__(self):
        if not self.variants:
            raise EmptyVariantSet("calibration requires at least one variant")
        require_same_vocab(self.original, *(lv for _, lv in self.variants))
        if isinstance(self.config.fusion, Single) and len(self.variants) != 1:
            raise EmptyVariantSet(
                f"fusion=Single takes exactly one variant, got {len(self.variants)}"
            )


@dataclass(frozen=True)
class CalibrationOutput:
    distribution: Distribution
    weights_used: tuple[float, ...]
    survivors: frozenset[int]


def _combine(
    orig: np.ndarray,
    variants: Sequence[np.ndarray],
    coefs: Sequence[float],
    extra_orig: float = 0.0,
) -> np.ndarray:
    """out = orig + sum_i coefs[i]*(orig - variants[i]) - extra_orig*orig."""
    out = orig.copy()
    orig_neginf = np.isneginf(orig)
    for coef, v in zip(coefs, variants):
        with np.errstate(invalid="ignore"):
            d = orig - v
        d[orig_neginf | np.isneginf(v)] = 0.0
        out = out + coef * d
    if extra_orig != 0.0:
        with np.errstate(invalid="ignore"):
            out = out - extra_orig * orig
    out[orig_neginf] = -np.inf
    return out


def _dense_values(lv: LogitVector) -> np.ndarray:
    return densify(lv).values


def cd_single(original: LogitVector, variant: LogitVector, alpha: float) -> LogitVector:
    """Contrast against one variant: (1+alpha)*orig - alpha*variant."""
    require_same_vocab(original, variant)
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    out = _combine(_dense_values(original), [_dense_values(variant)], [alpha])
    return LogitVector(vocab_size=original.vocab_size, values=out)


def fuse_naive(
    original: LogitVector,
    variants: Sequence[LogitVector],
    alpha: float,
    normalize: bool = False,
) -> LogitVector:
    """Equal-weight fusion of k variants.

    normalize=False is the literal form (1+alpha)*orig - alpha*sum_i variant_i,
    whose coefficients do not telescope for k > 1; normalize=True divides the
    correction by k so the net original weight stays 1+alpha.
    """
    if not variants:
        raise EmptyVariantSet("fuse_naive requires at least one variant")
    require_same_vocab(original, *variants)
    k = len(variants)
    coef = alpha / k if normalize else alpha
    extra = 0.0 if (normalize or k == 1) else alpha * (k - 1)
    out = _combine(
        _dense_values(original), [_dense_values(v) for v in variants], [coef] * k, extra
    )
    return LogitVector(vocab_size=original.vocab_size, values=out)


def variant_weight(original: LogitVector, variant: LogitVector, metric: WeightMetric) -> float:
    """Fusion weight of one variant under the given metric."""
    dist = softmax(variant)
    if metric == WeightMetric.ENTROPY:
        return dist.entropy_nats
    if metric == WeightMetric.CONFIDENCE:
        return dist.confidence
    if metric == WeightMetric.UNCONFIDENCE:
        return 1.0 / dist.confidence
    if metric == WeightMetric.PDD:
        return hellinger(softmax(original), dist)
    raise ValueError(f"unknown weight metric: {metric}")


def fuse_weighted(
    original: LogitVector,
    variants: Sequence[LogitVector],
    metric: WeightMetric,
    scale: float = 1.0,
) -> tuple[LogitVector, tuple[float, ...]]:
    """Metric-weighted fusion: orig + sum_i w_i*(orig - variant_i).

    w_i is computed from softmax(variant_i) (entropy in nats, confidence,
    its reciprocal, or Hellinger distance to the original), applied raw;
    scale is a global multiplier kept at 1.0 by default.
    """
    if not variants:
        raise EmptyVariantSet("fuse_weighted requires at least one variant")
    require_same_vocab(original, *variants)
    weights = tuple(scale * variant_weight(original, v, metric) for v in variants)
    out = _combine(_dense_values(original), [_dense_values(v) for v in variants], weights)
    return LogitVector(vocab_size=original.vocab_size, values=out), weights


def _fuse_forced(
    original: LogitVector, variants: Sequence[LogitVector], weights: Sequence[float]
) -> LogitVector:
    """Weighted fusion with externally supplied weights (test/identity hook)."""
    if not variants:
        raise EmptyVariantSet("fusion requires at least one variant")
    require_same_vocab(original, *variants)
    out = _combine(
        _dense_values(original), [_dense_values(v) for v in variants], list(weights)
    )
    return LogitVector(vocab_size=original.vocab_size, values=out)


def apply_plausibility(
    raw: LogitVector, calibrated: LogitVector, beta: float
) -> CalibrationOutput:
    """Zero out tokens implausible under the RAW (original) distribution.

    Survivors are the tokens with raw probability >= beta * max raw
    probability; the calibrated scores are softmaxed over survivors only.
    The raw argmax always survives (its probability equals the max and
    beta <= 1), so the survivor set is never empty.
    """
    if not 0.0 <= beta <= 1.0:
        raise InvalidBeta(f"beta must lie in [0, 1], got {beta}")
    require_same_vocab(raw, calibrated)
    raw_probs = softmax(raw).probs
    keep = raw_probs >= beta * raw_probs.max()
    masked = _dense_values(calibrated).copy()
    masked[~keep] = -np.inf
    dist = softmax(LogitVector(vocab_size=raw.vocab_size, values=masked))
    return CalibrationOutput(
        distribution=dist,
        weights_used=(),
        survivors=frozenset(int(i) for i in np.flatnonzero(keep)),
    )


def calibrate(inp: CalibrationInput) -> CalibrationOutput:
    """Full pipeline: fuse per config, then apply the plausibility constraint."""
    cfg = inp.config
    variant_vectors = [lv for _, lv in inp.variants]
    if isinstance(cfg.fusion, Single):
        calibrated = cd_single(inp.original, variant_vectors[0], cfg.alpha)
        weights = (cfg.alpha,)
    elif isinstance(cfg.fusion, Naive):
        calibrated = fuse_naive(
            inp.original, variant_vectors, cfg.alpha, normalize=cfg.normalize_naive
        )
        k = len(variant_vectors)
        weights = tuple([cfg.alpha / k if cfg.normalize_naive else cfg.alpha] * k)
    elif isinstance(cfg.fusion, Weighted):
        calibrated, weights = fuse_weighted(
            inp.original, variant_vectors, cfg.fusion.metric, scale=cfg.weight_scale
        )
    else:
        raise ValueError(f"unknown fusion mode: {cfg.fusion!r}")
    out = apply_plausibility(inp.original, calibrated, cfg.beta)
    return CalibrationOutput(
        distribution=out.distribution, weights_used=weights, survivors=out.survivors
    )
