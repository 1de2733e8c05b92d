"""Model backends producing first-answer-token logits.

Two implementations: a deterministic stub for tests and offline pipeline
work, and a transformers-backed wrapper for real vision-language models
(imported lazily; install the ``hf`` extra to use it).
"""

from __future__ import annotations

import hashlib
from abc import ABC, abstractmethod

import numpy as np


class ModelBackend(ABC):
    """Produces the logits of the first answer token for (image, question)."""

    vocab_size: int

    @abstractmethod
    def first_token_logits(self, image: "np.ndarray | None", question: str) -> np.ndarray: ...

    @abstractmethod
    def answer_token_ids(self) -> tuple[set, set]:
        """(yes ids, no ids) as the tokenizer assigns them, including
        leading-space surface forms."""


class StubModel(ModelBackend):
    """Deterministic synthetic VLM over a 512-token vocabulary.

    Logits depend on the question text and on simple image statistics
    (brightness tilts yes/no, high-frequency content flattens the
    distribution), so perturbed inputs produce plausibly different
    captures. No randomness beyond the stable per-input hash.
    """

    vocab_size = 512
    YES_IDS = {7, 8}  # "Yes", " Yes"
    NO_IDS = {9, 10}  # "No", " No"
    PRIOR_TOKEN = 11  # language-prior answer when no image is given

    def __init__(self, seed: int = 0):
        self.seed = seed

    def _rng(self, *parts) -> np.random.Generator:
        digest = hashlib.blake2b(
            "|".join(str(p) for p in parts).encode(), digest_size=8
        ).digest()
        return np.random.default_rng(int.from_bytes(digest, "little"))

    def first_token_logits(self, image, question: str) -> np.ndarray:
        rng = self._rng(self.seed, question)
        logits = rng.normal(0.0, 2.0, self.vocab_size)
        if image is None:
            logits[self.PRIOR_TOKEN] += 8.0
            return logits
        image = np.asarray(image, dtype=np.float64)
        brightness = float(image.mean())
        roughness = float(np.abs(np.diff(image, axis=0)).mean() + np.abs(np.diff(image, axis=1)).mean())
        image_rng = self._rng(self.seed, question, np.round(image, 6).tobytes())
        logits += image_rng.normal(0.0, 0.5, self.vocab_size)
        logits[sorted(self.YES_IDS)] += 6.0 * brightness
        logits[sorted(self.NO_IDS)] += 6.0 * (1.0 - brightness)
        # detail loss makes the stub less certain, mirroring real behavior
        return logits / (1.0 + 2.0 * roughness)

    def answer_token_ids(self):
        return set(self.YES_IDS), set(self.NO_IDS)


_TEMPLATES = (
    ("llava", "USER: <image>\n{question} Answer the question using a single word or phrase. ASSISTANT:"),
    ("instructblip", "{question} Answer:"),
    ("qwen", "{question} Answer:"),
)


class HFModel(ModelBackend):
    """transformers-backed vision-language model.

    The prompt template is a flag; the default is chosen from the model id
    (published evaluation templates differ per model family). Only the
    first generated token's logits are read.
    """

    def __init__(self, model_id: str, template: str | None = None, device: str = "cpu"):
        try:
            import torch
            from transformers import AutoModelForVision2Seq, AutoProcessor
        except ImportError as exc:  # pragma: no cover - requires the hf extra
            raise RuntimeError(
                "transformers/torch are required for HF capture; install cdfuse-adapter[hf]"
            ) from exc
        self._torch = torch
        self.model_id = model_id
        self.device = device
        self.processor = AutoProcessor.from_pretrained(model_id)
        self.model = AutoModelForVision2Seq.from_pretrained(model_id).to(device).eval()
        self.vocab_size = int(self.model.config.text_config.vocab_size
                              if hasattr(self.model.config, "text_config")
                              else self.model.config.vocab_size)
        if template is None:
            template = "{question}"
            for key, tpl in _TEMPLATES:
                if key in model_id.lower():
                    template = tpl
                    break
        self.template = template

    def first_token_logits(self, image, question: str) -> np.ndarray:  # pragma: no cover
        from PIL import Image

        prompt = self.template.format(question=question)
        pil = None
        if image is not None:
            pil = Image.fromarray((np.asarray(image) * 255).astype(np.uint8).squeeze())
        if pil is not None:
            inputs = self.processor(images=pil, text=prompt, return_tensors="pt").to(self.device)
        else:
            prompt = prompt.replace("<image>\n", "")
            inputs = self.processor(text=prompt, return_tensors="pt").to(self.device)
        with self._torch.no_grad():
            out = self.model(**inputs)
        return out.logits[0, -1, :].float().cpu().numpy()

    def answer_token_ids(self):  # pragma: no cover
        tokenizer = getattr(self.processor, "tokenizer", self.processor)
        yes_ids, no_ids = set(), set()
        for surface, bucket in (("Yes", yes_ids), ("yes", yes_ids), ("No", no_ids), ("no", no_ids)):
            for text in (surface, " " + surface):
                ids = tokenizer.encode(text, add_special_tokens=False)
                if len(ids) == 1:
                    bucket.add(int(ids[0]))
        return yes_ids, no_ids


def build_backend(spec: str, seed: int = 0, template: str | None = None, device: str = "cpu") -> ModelBackend:
    """'stub' or 'stub:<seed>' for the synthetic model, 'hf:<model id>' for transformers."""
    if spec == "stub":
        return StubModel(seed=seed)
    if spec.startswith("stub:"):
        return StubModel(seed=int(spec.split(":", 1)[1]))
    if spec.startswith("hf:"):
        return HFModel(spec.split(":", 1)[1], template=template, device=device)
    raise ValueError(f"unknown model spec {spec!r} (use 'stub', 'stub:<seed>' or 'hf:<id>')")
