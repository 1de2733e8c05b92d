"""Capture pipeline: dataset in, engine-schema record file out.

For every question the requested variants are materialized (perturbing
the pixel input, dropping it, or loading an externally edited image), the
model is queried once per variant, and the first-answer-token logits are
written as sparse top-k records. A sidecar log keeps the top-k mass of
the densified record next to the model's full-softmax mass and the
floor-induced bound between them, plus any skipped edited variants.
"""

from __future__ import annotations

import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .model import ModelBackend
from .perturb import downsample_image, load_image, noise_image
from .records_out import (
    densified_softmax_topk_mass,
    full_softmax_topk_mass,
    header_line,
    record_line,
    top_k_sparse,
)


@dataclass(frozen=True)
class VariantSpec:
    """One requested variant: kind name plus its parameters."""

    kind: str  # original | noise | downsample | noimage | edited
    steps: int | None = None
    ratio: int | None = None
    cfg_text: float | None = None

    def params(self, instruction: str = "") -> dict:
        if self.kind == "noise":
            return {"steps": self.steps, "schedule": "linear999"}
        if self.kind == "downsample":
            return {"ratio": self.ratio}
        if self.kind == "edited":
            return {"cfg_text": self.cfg_text, "instruction": instruction}
        return {}

    @classmethod
    def parse(cls, text: str) -> "VariantSpec":
        kind, _, arg = text.partition(":")
        if kind == "noise":
            return cls(kind="noise", steps=int(arg) if arg else 500)
        if kind == "downsample":
            return cls(kind="downsample", ratio=int(arg) if arg else 32)
        if kind == "edited":
            return cls(kind="edited", cfg_text=float(arg) if arg else 20.0)
        if kind in ("original", "noimage"):
            if arg:
                raise ValueError(f"variant {kind!r} takes no parameter")
            return cls(kind=kind)
        raise ValueError(f"unknown variant kind {kind!r}")


@dataclass(frozen=True)
class CaptureJob:
    dataset_path: str
    output_path: str
    variants: tuple[VariantSpec, ...]
    top_k: int = 100
    seed: int = 0
    images_dir: str | None = None
    edited_dir: str | None = None


@dataclass
class CaptureStats:
    records: int = 0
    skipped: list = field(default_factory=list)


def _load_dataset(path: str) -> list[dict]:
    items = []
    with open(path, "r", encoding="utf-8") as fp:
        for line in fp:
            line = line.strip()
            if line:
                items.append(json.loads(line))
    return items


def _resolve_image(job: CaptureJob, item: dict) -> np.ndarray:
    rel = item.get("image_path")
    if not rel:
        raise FileNotFoundError(f"item {item['sample_id']!r} has no image_path")
    path = os.path.join(job.images_dir, rel) if job.images_dir else rel
    return load_image(path)


def _variant_input(job: CaptureJob, item: dict, spec: VariantSpec):
    """Pixel input for one variant; None means the image is withheld."""
    if spec.kind == "noimage":
        return None
    if spec.kind == "edited":
        if not job.edited_dir:
            raise FileNotFoundError("edited variant requested without --edited-dir")
        path = os.path.join(job.edited_dir, f"{item['sample_id']}.png")
        if not os.path.exists(path):
            raise FileNotFoundError(path)
        return load_image(path)
    image = _resolve_image(job, item)
    if spec.kind == "noise":
        return noise_image(image, spec.steps, seed=job.seed)
    if spec.kind == "downsample":
        return downsample_image(image, spec.ratio)
    return image


def capture(job: CaptureJob, backend: ModelBackend, log_fp=None) -> CaptureStats:
    """Run the job; writes the record file and a .capture-log.jsonl sidecar."""
    items = _load_dataset(job.dataset_path)
    yes_ids, no_ids = backend.answer_token_ids()
    stats = CaptureStats()
    log_path = job.output_path + ".capture-log.jsonl"
    with open(job.output_path, "w", encoding="utf-8") as out, open(
        log_path, "w", encoding="utf-8"
    ) as log:
        out.write(header_line(backend.vocab_size, yes_ids, no_ids) + "\n")
        for item in items:
            for spec in job.variants:
                sid = item["sample_id"]
                try:
                    pixels = _variant_input(job, item, spec)
                except FileNotFoundError as exc:
                    if spec.kind == "edited":
                        message = f"skipping edited variant for {sid!r}: {exc}"
                        print(f"warning: {message}", file=log_fp or sys.stderr)
                        stats.skipped.append(sid)
                        log.write(
                            json.dumps(
                                {"event": "skipped", "sample_id": sid, "reason": str(exc)},
                                sort_keys=True,
                            )
                            + "\n"
                        )
                        continue
                    raise RuntimeError(f"capture aborted at item {sid!r}: {exc}") from exc
                logits = np.asarray(
                    backend.first_token_logits(pixels, item["question"]), dtype=np.float64
                )
                instruction = item.get("edit_instruction", "") if spec.kind == "edited" else ""
                out.write(
                    record_line(sid, spec.kind, spec.params(instruction), logits, job.top_k)
                    + "\n"
                )
                stats.records += 1
                sparse = top_k_sparse(logits, job.top_k)
                if sparse is not None:
                    ids, values, floor = sparse
                    mass_dense = densified_softmax_topk_mass(
                        ids, values, floor, backend.vocab_size
                    )
                    entry = {
                        "event": "mass",
                        "sample_id": sid,
                        "kind": spec.kind,
                        "topk_mass_dense": mass_dense,
                        "topk_mass_full": full_softmax_topk_mass(logits, ids),
                        "floor_bound": 1.0 - mass_dense,
                    }
                    log.write(json.dumps(entry, sort_keys=True) + "\n")
    return stats
