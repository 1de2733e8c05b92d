"""Yes/No-QA benchmark runner over replayable logit records.

Questions are evaluated on the first answer token only: the argmax of a
method's calibrated distribution is mapped to yes / no / other through
configured token-id sets and scored against the gold answer. Providers
abstract where logits come from: a ReplayProvider serves them from a
record file, a MockProvider synthesizes them deterministically with
per-variant-kind behavior knobs for scripted scenarios.

Evaluation is embarrassingly parallel per item; per-item results are
folded in dataset order afterwards, so reports are identical for any
worker count.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .calibrate import CalibrationInput, calibrate
from .core import (
    CalibrationConfig,
    DiffusionNoise,
    Downsample,
    Edited,
    LogitVector,
    Naive,
    NoImage,
    Original,
    Single,
    VariantKind,
    VariantRecord,
    Weighted,
    WeightMetric,
    kind_key,
    softmax,
)
from .errors import (
    AmbiguousVariant,
    DatasetFormatError,
    EmptyDataset,
    EmptyVariantSet,
    MissingVariant,
    ShapeMismatch,
)
from .metrics import AnswerClass, RevisionClass, classify_answer, classify_revision, hellinger, jaccard
from .records import RecordFileHeader

__all__ = [
    "QAItem",
    "load_dataset",
    "derive_edit_instruction",
    "LogitProvider",
    "ReplayProvider",
    "MockKnobs",
    "MockProvider",
    "Method",
    "preset_methods",
    "PRESET_ORDER",
    "run_eval",
    "overlap_matrix",
    "EvalReport",
]

HISTOGRAM_BINS = 50

# ---------------------------------------------------------------------------
# Dataset
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QAItem:
    sample_id: str
    question: str
    gold: AnswerClass
    task_tag: str
    image_path: str | None = None
    edit_instruction: str | None = None

    def __post_init__(self):
        if self.gold not in (AnswerClass.YES, AnswerClass.NO):
            raise DatasetFormatError(f"gold must be yes or no, got {self.gold}")


_DATASET_FIELDS = {"sample_id", "question", "gold", "task_tag", "image_path", "edit_instruction"}


def load_dataset(path: str) -> list[QAItem]:
    """Read a JSONL dataset; duplicate sample ids or schema violations raise."""
    items: list[QAItem] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fp:
        for line_no, line in enumerate(fp, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(f"line {line_no}: invalid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise DatasetFormatError(f"line {line_no}: expected a JSON object")
            extra = set(obj) - _DATASET_FIELDS
            if extra:
                raise DatasetFormatError(f"line {line_no}: unknown fields {sorted(extra)}")
            missing = {"sample_id", "question", "gold", "task_tag"} - set(obj)
            if missing:
                raise DatasetFormatError(f"line {line_no}: missing fields {sorted(missing)}")
            gold_raw = str(obj["gold"]).strip().lower()
            if gold_raw not in ("yes", "no"):
                raise DatasetFormatError(f"line {line_no}: gold must be 'yes' or 'no', got {obj['gold']!r}")
            sample_id = str(obj["sample_id"])
            if sample_id in seen:
                raise DatasetFormatError(f"line {line_no}: duplicate sample_id {sample_id!r}")
            seen.add(sample_id)
            for optional in ("image_path", "edit_instruction"):
                if obj.get(optional) is not None and not isinstance(obj[optional], str):
                    raise DatasetFormatError(f"line {line_no}: {optional} must be a string")
            items.append(
                QAItem(
                    sample_id=sample_id,
                    question=str(obj["question"]),
                    gold=AnswerClass.YES if gold_raw == "yes" else AnswerClass.NO,
                    task_tag=str(obj["task_tag"]),
                    image_path=obj.get("image_path"),
                    edit_instruction=obj.get("edit_instruction"),
                )
            )
    return items


def save_dataset(path: str, items: list[QAItem]) -> None:
    with open(path, "w", encoding="utf-8") as fp:
        for it in items:
            obj = {
                "sample_id": it.sample_id,
                "question": it.question,
                "gold": it.gold.value,
                "task_tag": it.task_tag,
            }
            if it.image_path is not None:
                obj["image_path"] = it.image_path
            if it.edit_instruction is not None:
                obj["edit_instruction"] = it.edit_instruction
            fp.write(json.dumps(obj, sort_keys=True) + "\n")


_VOWELS = "aeiou"


def _fix_article(phrase: str) -> str:
    words = phrase.split(" ", 2)
    if len(words) >= 2 and words[0].lower() == "a" and words[1][:1].lower() in _VOWELS:
        return "an " + phrase[2:]
    return phrase


_EDIT_RULES: list[tuple[re.Pattern, object]] = [
    # object-existence phrasings: keep the noun phrase, fix the article
    (
        re.compile(r"^is there (.+?)(?: in (?:the|this) (?:image|picture|photo))?\?$", re.I),
        lambda m: _fix_article(m.group(1)),
    ),
    (
        re.compile(r"^are there (.+?)(?: in (?:the|this) (?:image|picture|photo))?\?$", re.I),
        lambda m: m.group(1),
    ),
    (
        re.compile(r"^is this movie titled (.+)\?$", re.I),
        lambda m: f"This movie is titled {m.group(1)}",
    ),
    (
        re.compile(r"^is (the person .+?) called (.+)\?$", re.I),
        lambda m: f"{m.group(1)} is called {m.group(2)}",
    ),
    (
        re.compile(r"^does this image describe a place of (.+)\?$", re.I),
        lambda m: _fix_article(f"a {m.group(1)}"),
    ),
    (
        re.compile(r"^is this a photo of (.+)\?$", re.I),
        lambda m: m.group(1),
    ),
    (
        re.compile(r"^does (this .+?) exist (.+)\?$", re.I),
        lambda m: f"{m.group(1)[0].upper()}{m.group(1)[1:]} exists {m.group(2)}",
    ),
    # generic copular question ("Is X?" -> "X"), covers position and OCR phrasings
    (
        re.compile(r"^is (the .+)\?$", re.I),
        lambda m: m.group(1),
    ),
]


def derive_edit_instruction(question: str, task_tag: str = "") -> str:
    """Editing instruction for a question: the queried object or an affirmative
    rewrite; questions with no matching pattern are used verbatim."""
    q = question.strip()
    for pattern, build in _EDIT_RULES:
        m = pattern.match(q)
        if m:
            return build(m)
    return q


# ---------------------------------------------------------------------------
# Providers
# ---------------------------------------------------------------------------


class LogitProvider(ABC):
    """Deterministic source of first-token logits per (sample, variant)."""

    @abstractmethod
    def get(self, sample_id: str, kind: VariantKind) -> LogitVector: ...

    @abstractmethod
    def resolve_kind(self, sample_id: str, selector: "str | VariantKind") -> VariantKind: ...

    def answer_tokens(self) -> tuple[frozenset[int], frozenset[int]] | None:
        return None

    def answer_map_for(self, sample_id: str) -> tuple[frozenset[int], frozenset[int]] | None:
        return None


_CANONICAL_KINDS: dict[str, VariantKind] = {
    "original": Original(),
    "noise": DiffusionNoise(steps=500),
    "downsample": Downsample(ratio=32),
    "noimage": NoImage(),
    "edited": Edited(cfg_text=20.0),
}


class ReplayProvider(LogitProvider):
    """Serves logits from parsed record-file contents; misses are errors."""

    def __init__(self, records: list[VariantRecord], header: RecordFileHeader | None = None):
        self._exact: dict[tuple[str, str], VariantRecord] = {}
        self._by_name: dict[tuple[str, str], list[VariantRecord]] = {}
        self._kinds_by_sample: dict[str, set[str]] = {}
        self._answer_maps: dict[str, tuple[frozenset[int], frozenset[int]]] = {}
        self._header = header
        for rec in records:
            self._exact[(rec.sample_id, kind_key(rec.variant))] = rec
            self._by_name.setdefault((rec.sample_id, rec.variant.name), []).append(rec)
            self._kinds_by_sample.setdefault(rec.sample_id, set()).add(rec.variant.name)
            if rec.answer_token_map is not None:
                # the original record's map wins over other variants' maps
                if rec.variant.name == "original" or rec.sample_id not in self._answer_maps:
                    self._answer_maps[rec.sample_id] = rec.answer_token_map

    def get(self, sample_id: str, kind: VariantKind) -> LogitVector:
        rec = self._exact.get((sample_id, kind_key(kind)))
        if rec is None:
            raise MissingVariant(sample_id, kind_key(kind))
        return rec.logits

    def resolve_kind(self, sample_id: str, selector: "str | VariantKind") -> VariantKind:
        if not isinstance(selector, str):
            return selector
        matches = self._by_name.get((sample_id, selector), [])
        if not matches:
            raise MissingVariant(sample_id, selector)
        if len(matches) > 1:
            raise AmbiguousVariant(sample_id, selector, len(matches))
        return matches[0].variant

    def kinds_for(self, sample_id: str) -> list[str]:
        return sorted(self._kinds_by_sample.get(sample_id, ()))

    def answer_tokens(self):
        if self._header and (self._header.yes_token_ids or self._header.no_token_ids):
            return (
                frozenset(self._header.yes_token_ids),
                frozenset(self._header.no_token_ids),
            )
        return None

    def answer_map_for(self, sample_id: str):
        return self._answer_maps.get(sample_id)


@dataclass(frozen=True)
class MockKnobs:
    """Behavior knobs of the synthetic provider.

    Temperatures < 1 flatten a variant's logits relative to the original
    (raising entropy); biases steer a variant toward a fixed token, mimicking
    language-prior answers when the image is absent or the inserted-content
    tendency of edited images.
    """

    vocab_size: int = 32
    yes_token: int = 0
    no_token: int = 1
    answer_boost: float = 4.0
    jitter: float = 0.25
    noise_temperature: float = 0.35
    downsample_temperature: float = 0.55
    noimage_prior_token: int = 2
    noimage_prior_bias: float = 6.0
    edited_yes_boost: float = 3.0


def _stable_rng(*parts) -> np.random.Generator:
    digest = hashlib.blake2b("|".join(str(p) for p in parts).encode(), digest_size=8).digest()
    return np.random.default_rng(int.from_bytes(digest, "little"))


class MockProvider(LogitProvider):
    """Seeded synthetic logits over a small vocabulary."""

    def __init__(self, seed: int = 0, knobs: MockKnobs = MockKnobs()):
        self.seed = seed
        self.knobs = knobs

    def _original_values(self, sample_id: str) -> np.ndarray:
        k = self.knobs
        rng = _stable_rng(self.seed, sample_id, "original")
        values = rng.normal(0.0, 1.0, k.vocab_size)
        favored = k.yes_token if rng.random() < 0.5 else k.no_token
        values[favored] += k.answer_boost
        return values

    def get(self, sample_id: str, kind: VariantKind) -> LogitVector:
        k = self.knobs
        orig = self._original_values(sample_id)
        if isinstance(kind, Original):
            return LogitVector.dense(orig)
        rng = _stable_rng(self.seed, sample_id, kind_key(kind))
        if isinstance(kind, DiffusionNoise):
            values = orig * k.noise_temperature + rng.normal(0.0, k.jitter, k.vocab_size)
        elif isinstance(kind, Downsample):
            values = orig * k.downsample_temperature + rng.normal(0.0, k.jitter, k.vocab_size)
        elif isinstance(kind, NoImage):
            values = rng.normal(0.0, 1.0, k.vocab_size)
            values[k.noimage_prior_token] += k.noimage_prior_bias
        elif isinstance(kind, Edited):
            values = orig * 0.8 + rng.normal(0.0, k.jitter, k.vocab_size)
            values[k.yes_token] += k.edited_yes_boost
        else:
            raise ValueError(f"unknown variant kind {kind!r}")
        return LogitVector.dense(values)

    def resolve_kind(self, sample_id: str, selector: "str | VariantKind") -> VariantKind:
        if isinstance(selector, str):
            if selector not in _CANONICAL_KINDS:
                raise MissingVariant(sample_id, selector)
            return _CANONICAL_KINDS[selector]
        return selector

    def answer_tokens(self):
        return frozenset({self.knobs.yes_token}), frozenset({self.knobs.no_token})


# ---------------------------------------------------------------------------
# Methods
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Method:
    """A named calibration recipe: config plus the variant kinds it contrasts with."""

    name: str
    config: CalibrationConfig | None  # None = no calibration (original baseline)
    selectors: tuple = ()


FUSION_KIND_NAMES = ("noise", "downsample", "noimage", "edited")

PRESET_ORDER = (
    "original",
    "single-noise",
    "single-noimage",
    "single-downsample",
    "single-edited",
    "naive-fusion",
    "entropy-fusion",
    "pdd-fusion",
    "confidence-fusion",
    "unconfidence-fusion",
)

_SINGLE_PRESETS = {
    "single-noise": "noise",
    "single-noimage": "noimage",
    "single-downsample": "downsample",
    "single-edited": "edited",
}

_WEIGHTED_PRESETS = {
    "entropy-fusion": WeightMetric.ENTROPY,
    "confidence-fusion": WeightMetric.CONFIDENCE,
    "unconfidence-fusion": WeightMetric.UNCONFIDENCE,
    "pdd-fusion": WeightMetric.PDD,
}


def preset_methods(
    names,
    alpha: float = 1.0,
    beta: float = 0.2,
    normalize_naive: bool = False,
    fusion_kinds: tuple = FUSION_KIND_NAMES,
) -> list[Method]:
    """Build Method objects from preset names (see PRESET_ORDER)."""
    methods = []
    for name in names:
        if name == "original":
            methods.append(Method(name="original", config=None))
        elif name in _SINGLE_PRESETS:
            methods.append(
                Method(
                    name=name,
                    config=CalibrationConfig(alpha=alpha, beta=beta, fusion=Single()),
                    selectors=(_SINGLE_PRESETS[name],),
                )
            )
        elif name == "naive-fusion":
            methods.append(
                Method(
                    name=name,
                    config=CalibrationConfig(
                        alpha=alpha, beta=beta, fusion=Naive(), normalize_naive=normalize_naive
                    ),
                    selectors=tuple(fusion_kinds),
                )
            )
        elif name in _WEIGHTED_PRESETS:
            methods.append(
                Method(
                    name=name,
                    config=CalibrationConfig(
                        alpha=alpha, beta=beta, fusion=Weighted(_WEIGHTED_PRESETS[name])
                    ),
                    selectors=tuple(fusion_kinds),
                )
            )
        else:
            raise ValueError(f"unknown method preset {name!r}")
    return methods


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


@dataclass
class _ItemResult:
    task_tag: str
    gold: AnswerClass
    answers: dict  # method -> AnswerClass
    revisions: dict  # method -> RevisionClass
    entropies: dict  # method -> float
    confidences: dict  # method -> float
    pdds: dict  # method -> float
    variant_stats: dict  # kind name -> (entropy, confidence, pdd vs original)
    vocab_size: int


@dataclass(frozen=True)
class EvalReport:
    methods: tuple
    dataset_size: int
    vocab_size: int
    task_tags: tuple
    per_task_counts: dict  # method -> tag -> (correct, total)
    micro_counts: dict  # method -> (correct, total)
    revision_counts: dict  # method -> RevisionClass.value -> int
    tendency_counts: dict  # method -> AnswerClass.value -> int
    revise_correct_sets: dict  # method -> frozenset of sample ids
    overlap: dict  # "methods": [...], "matrix": [[...]]
    histograms: dict  # method -> metric -> list[int], over calibrated outputs
    variant_histograms: dict  # variant kind -> metric -> list[int], raw distributions
    histogram_edges: dict  # metric -> (lo, hi)

    def per_task_accuracy(self, method: str) -> dict:
        return {
            tag: c / t for tag, (c, t) in sorted(self.per_task_counts[method].items())
        }

    def overall_accuracy(self, method: str) -> float:
        """Plain mean of per-task accuracies (the Table-style 'All' column)."""
        accs = list(self.per_task_accuracy(method).values())
        return sum(accs) / len(accs)

    def micro_accuracy(self, method: str) -> float:
        c, t = self.micro_counts[method]
        return c / t

    def to_json_obj(self) -> dict:
        return {
            "schema": "cdfuse-report-v1",
            "dataset_size": self.dataset_size,
            "vocab_size": self.vocab_size,
            "task_tags": list(self.task_tags),
            "methods": list(self.methods),
            "accuracy": {
                m: {
                    "per_task": self.per_task_accuracy(m),
                    "overall_mean_of_tasks": self.overall_accuracy(m),
                    "micro": self.micro_accuracy(m),
                }
                for m in self.methods
            },
            "revision_counts": {m: dict(sorted(v.items())) for m, v in self.revision_counts.items()},
            "tendency_counts": {m: dict(sorted(v.items())) for m, v in self.tendency_counts.items()},
            "overlap": self.overlap,
            "histograms": {
                "bins": HISTOGRAM_BINS,
                "edges": {k: list(v) for k, v in sorted(self.histogram_edges.items())},
                "counts": {m: {k: list(v) for k, v in sorted(h.items())} for m, h in self.histograms.items()},
                "variant_counts": {
                    name: {k: list(v) for k, v in sorted(h.items())}
                    for name, h in sorted(self.variant_histograms.items())
                },
            },
        }

    def to_json_bytes(self) -> bytes:
        return (json.dumps(self.to_json_obj(), sort_keys=True, indent=2) + "\n").encode()

    def to_table_csv(self) -> str:
        """Accuracy table in the benchmark layout: method rows, task columns, All."""
        canonical = {"pope-random": "P-R", "pope-popular": "P-P", "pope-adversarial": "P-A"}
        col_order = ["P-R", "P-P", "P-A", "MME"]
        extra_tags = sorted(
            t for t in self.task_tags if t not in canonical and not t.startswith("mme")
        )
        columns = col_order + extra_tags

        def cells(method: str) -> list[str]:
            by_col: dict[str, list] = {}
            for tag, (c, t) in self.per_task_counts[method].items():
                col = canonical.get(tag, "MME" if tag.startswith("mme") else tag)
                by_col.setdefault(col, []).append((c, t))
            out, accs = [], []
            for col in columns:
                if col in by_col:
                    c = sum(x for x, _ in by_col[col])
                    t = sum(x for _, x in by_col[col])
                    acc = c / t
                    accs.append(acc)
                    out.append(f"{acc:.4f}")
                else:
                    out.append("")
            out.append(f"{sum(accs) / len(accs):.4f}")
            return out

        ordered = [m for m in PRESET_ORDER if m in self.methods]
        ordered += [m for m in self.methods if m not in ordered]
        lines = ["method," + ",".join(columns) + ",All"]
        for m in ordered:
            lines.append(m + "," + ",".join(cells(m)))
        return "\n".join(lines) + "\n"

    def histograms_csv(self) -> str:
        lines = ["series,metric,bin_lo,bin_hi,count"]

        def emit(series: str, metrics_map: dict) -> None:
            for metric in sorted(metrics_map):
                lo, hi = self.histogram_edges[metric]
                edges = np.linspace(lo, hi, HISTOGRAM_BINS + 1)
                for b, count in enumerate(metrics_map[metric]):
                    lines.append(f"{series},{metric},{edges[b]:.6f},{edges[b + 1]:.6f},{count}")

        for m in self.methods:
            emit(m, self.histograms[m])
        for name in sorted(self.variant_histograms):
            emit(f"variant:{name}", self.variant_histograms[name])
        return "\n".join(lines) + "\n"


def _default_threads() -> int:
    hardware = os.cpu_count() or 1
    env = os.environ.get("CD_ENGINE_THREADS")
    if env:
        try:
            return max(1, min(hardware, int(env)))
        except ValueError:
            pass
    return hardware


def _eval_item(
    item: QAItem,
    provider: LogitProvider,
    methods: list[Method],
    yes_ids: frozenset[int],
    no_ids: frozenset[int],
) -> _ItemResult:
    override = provider.answer_map_for(item.sample_id)
    if override is not None:
        yes_ids, no_ids = override
    original_lv = provider.get(item.sample_id, Original())
    orig_dist = softmax(original_lv)
    orig_answer = classify_answer(orig_dist, yes_ids, no_ids)

    answers, revisions, entropies, confidences, pdds = {}, {}, {}, {}, {}
    variant_stats = {
        "original": (orig_dist.entropy_nats, orig_dist.confidence, 0.0)
    }
    for method in methods:
        if method.config is None:
            dist = orig_dist
        else:
            variants = []
            for selector in method.selectors:
                kind = provider.resolve_kind(item.sample_id, selector)
                lv = provider.get(item.sample_id, kind)
                variants.append((kind, lv))
                if kind.name not in variant_stats:
                    vdist = softmax(lv)
                    variant_stats[kind.name] = (
                        vdist.entropy_nats,
                        vdist.confidence,
                        hellinger(orig_dist, vdist),
                    )
            if not variants:
                raise EmptyVariantSet(f"method {method.name!r} selects no variants")
            out = calibrate(
                CalibrationInput(
                    original=original_lv, variants=tuple(variants), config=method.config
                )
            )
            dist = out.distribution
        answer = classify_answer(dist, yes_ids, no_ids)
        answers[method.name] = answer
        revisions[method.name] = classify_revision(orig_answer, answer, item.gold)
        entropies[method.name] = dist.entropy_nats
        confidences[method.name] = dist.confidence
        pdds[method.name] = hellinger(orig_dist, dist)
    return _ItemResult(
        task_tag=item.task_tag,
        gold=item.gold,
        answers=answers,
        revisions=revisions,
        entropies=entropies,
        confidences=confidences,
        pdds=pdds,
        variant_stats=variant_stats,
        vocab_size=orig_dist.vocab_size,
    )


def run_eval(
    items: list[QAItem],
    provider: LogitProvider,
    methods: list[Method],
    yes_ids: frozenset[int] | None = None,
    no_ids: frozenset[int] | None = None,
    threads: int | None = None,
) -> EvalReport:
    """Evaluate every method over the dataset; always includes the original baseline.

    Deterministic for fixed inputs regardless of the thread count: items are
    processed independently and folded in dataset order.
    """
    if not items:
        raise EmptyDataset("dataset is empty")
    if yes_ids is None or no_ids is None:
        provided = provider.answer_tokens()
        if provided is not None:
            yes_ids = yes_ids if yes_ids is not None else provided[0]
            no_ids = no_ids if no_ids is not None else provided[1]
    yes_ids = frozenset(yes_ids) if yes_ids is not None else frozenset({0})
    no_ids = frozenset(no_ids) if no_ids is not None else frozenset({1})

    methods = list(methods)
    if not any(m.config is None for m in methods):
        methods.insert(0, Method(name="original", config=None))
    names = [m.name for m in methods]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate method names: {names}")

    threads = threads if threads is not None else _default_threads()
    if threads <= 1:
        results = [_eval_item(it, provider, methods, yes_ids, no_ids) for it in items]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(
                pool.map(lambda it: _eval_item(it, provider, methods, yes_ids, no_ids), items)
            )

    vocabs = {r.vocab_size for r in results}
    if len(vocabs) != 1:
        raise ShapeMismatch(f"dataset mixes vocab sizes: {sorted(vocabs)}")
    vocab_size = vocabs.pop()

    per_task: dict = {m.name: {} for m in methods}
    micro: dict = {m.name: [0, 0] for m in methods}
    revision_counts: dict = {
        m.name: {rc.value: 0 for rc in RevisionClass} for m in methods
    }
    tendency_counts: dict = {
        m.name: {ac.value: 0 for ac in AnswerClass} for m in methods
    }
    revise_sets: dict = {m.name: set() for m in methods}
    raw_metrics: dict = {m.name: {"entropy": [], "confidence": [], "pdd": []} for m in methods}
    variant_metrics: dict = {}

    for item, res in zip(items, results):
        for kind_name, (ent, conf, pdd) in res.variant_stats.items():
            bucket = variant_metrics.setdefault(
                kind_name, {"entropy": [], "confidence": [], "pdd": []}
            )
            bucket["entropy"].append(ent)
            bucket["confidence"].append(conf)
            bucket["pdd"].append(pdd)
        for m in methods:
            name = m.name
            answer = res.answers[name]
            correct = answer == res.gold
            counts = per_task[name].setdefault(res.task_tag, [0, 0])
            counts[0] += int(correct)
            counts[1] += 1
            micro[name][0] += int(correct)
            micro[name][1] += 1
            revision_counts[name][res.revisions[name].value] += 1
            tendency_counts[name][answer.value] += 1
            if res.revisions[name] == RevisionClass.REVISE_CORRECT:
                revise_sets[name].add(item.sample_id)
            raw_metrics[name]["entropy"].append(res.entropies[name])
            raw_metrics[name]["confidence"].append(res.confidences[name])
            raw_metrics[name]["pdd"].append(res.pdds[name])

    edges = {
        "entropy": (0.0, float(np.log(vocab_size))),
        "confidence": (0.0, 1.0),
        "pdd": (0.0, 1.0),
    }
    def bin_all(metrics_by_series: dict) -> dict:
        out: dict = {}
        for name, metrics_map in metrics_by_series.items():
            out[name] = {}
            for metric, values in metrics_map.items():
                lo, hi = edges[metric]
                clipped = np.clip(np.asarray(values, dtype=np.float64), lo, hi)
                counts, _ = np.histogram(clipped, bins=HISTOGRAM_BINS, range=(lo, hi))
                out[name][metric] = [int(c) for c in counts]
        return out

    histograms = bin_all(raw_metrics)
    variant_histograms = bin_all(variant_metrics)

    labels, matrix = overlap_matrix({name: frozenset(s) for name, s in revise_sets.items()})

    return EvalReport(
        methods=tuple(m.name for m in methods),
        dataset_size=len(items),
        vocab_size=vocab_size,
        task_tags=tuple(sorted({it.task_tag for it in items})),
        per_task_counts={
            name: {tag: (c, t) for tag, (c, t) in sorted(tags.items())}
            for name, tags in per_task.items()
        },
        micro_counts={name: (c, t) for name, (c, t) in micro.items()},
        revision_counts=revision_counts,
        tendency_counts=tendency_counts,
        revise_correct_sets={name: frozenset(s) for name, s in revise_sets.items()},
        overlap={"methods": labels, "matrix": matrix},
        histograms=histograms,
        variant_histograms=variant_histograms,
        histogram_edges=edges,
    )


def overlap_matrix(sets_by_method: dict) -> tuple[list, list]:
    """Symmetric Jaccard matrix over the methods' rectified-answer sets."""
    labels = list(sets_by_method)
    matrix = [
        [jaccard(sets_by_method[a], sets_by_method[b]) for b in labels] for a in labels
    ]
    return labels, matrix
