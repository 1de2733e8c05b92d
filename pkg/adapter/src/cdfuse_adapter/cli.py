"""cdfuse-adapter: capture model logits into engine record files."""

from __future__ import annotations

import argparse
import sys

from .capture import CaptureJob, VariantSpec, capture
from .model import build_backend


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cdfuse-adapter",
        description="Run a vision-language model over a Yes/No dataset and write "
        "first-answer-token logit records (cdfuse JSONL schema v1).",
    )
    parser.add_argument("--dataset", required=True, help="cdfuse dataset JSONL")
    parser.add_argument(
        "--model",
        required=True,
        help="'stub', 'stub:<seed>', or 'hf:<model id>' (needs the hf extra)",
    )
    parser.add_argument(
        "--variants",
        default="original,noise:500,downsample:32,noimage",
        help="comma list like original,noise:500,downsample:32,noimage,edited:20",
    )
    parser.add_argument("--top-k", type=int, default=100, help="sparse storage width")
    parser.add_argument("--seed", type=int, default=0, help="perturbation rng seed")
    parser.add_argument("--images-dir", default=None, help="base dir for image_path values")
    parser.add_argument("--edited-dir", default=None, help="dir of pre-edited <sample_id>.png")
    parser.add_argument("--template", default=None, help="prompt template with {question}")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--out", required=True, help="output record file")
    args = parser.parse_args(argv)

    try:
        specs = tuple(VariantSpec.parse(v.strip()) for v in args.variants.split(",") if v.strip())
        backend = build_backend(
            args.model, seed=args.seed, template=args.template, device=args.device
        )
        job = CaptureJob(
            dataset_path=args.dataset,
            output_path=args.out,
            variants=specs,
            top_k=args.top_k,
            seed=args.seed,
            images_dir=args.images_dir,
            edited_dir=args.edited_dir,
        )
        stats = capture(job, backend)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"cdfuse-adapter: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {stats.records} records to {args.out}")
    if stats.skipped:
        print(f"skipped edited variants for {len(stats.skipped)} samples (see capture log)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
