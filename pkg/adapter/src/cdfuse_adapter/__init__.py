"""Capture tool: wraps a vision-language model, perturbs each question's
image, and records first-answer-token logits in the cdfuse JSONL schema."""

__version__ = "0.1.0"

from .capture import CaptureJob, CaptureStats, VariantSpec, capture
from .model import HFModel, ModelBackend, StubModel, build_backend

__all__ = [
    "CaptureJob",
    "CaptureStats",
    "HFModel",
    "ModelBackend",
    "StubModel",
    "VariantSpec",
    "build_backend",
    "capture",
]
