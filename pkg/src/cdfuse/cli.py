"""Command-line interface.

Subcommands: perturb (image transforms), calibrate (batch logit
calibration over a record file), eval (benchmark run with reports),
import (convert published POPE/MME layouts to the dataset schema), and
inspect (record-file validation and summary).

Exit codes: 0 success, 1 usage error, 2 data error (schema violation or
missing record, with the offending key on stderr). A config file of
``key = value`` lines can pre-set any long flag; explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .calibrate import CalibrationInput, calibrate
from .core import CalibrationConfig, Naive, Original, Single, Weighted, WeightMetric
from .errors import EngineError
from .harness import (
    FUSION_KIND_NAMES,
    Method,
    PRESET_ORDER,
    ReplayProvider,
    MockProvider,
    derive_edit_instruction,
    load_dataset,
    preset_methods,
    run_eval,
    save_dataset,
    QAItem,
)
from .metrics import AnswerClass
from .perturb import (
    DEFAULT_NOISE_STEPS,
    DEFAULT_SCHEDULE,
    diffuse,
    downsample,
    load_image,
    save_image,
)
from .records import inspect_records, read_records

USAGE_ERROR = 1
DATA_ERROR = 2


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; this CLI reserves 2 for data errors
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def _build_parser() -> _Parser:
    parser = _Parser(prog="cdfuse", description=__doc__)
    parser.add_argument("--version", action="version", version=f"cdfuse {__version__}")
    parser.add_argument(
        "--config",
        default=None,
        help="key = value file supplying defaults for long flags of the subcommand",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("perturb", parents=[], help="apply an image perturbation")
    p.add_argument("--kind", required=True, choices=["noise", "downsample", "blank"])
    p.add_argument("--in", dest="input", required=True, help="input image (.png or raw float)")
    p.add_argument("--out", required=True, help="output image path")
    p.add_argument("--steps", type=int, default=DEFAULT_NOISE_STEPS, help="noise steps N")
    p.add_argument("--ratio", type=int, default=32, help="downsample ratio r")
    p.add_argument("--seed", type=int, default=0, help="noise rng seed")
    p.add_argument(
        "--up-kernel",
        default="replicate",
        choices=["replicate", "bilinear"],
        help="expansion kernel for downsample",
    )

    p = sub.add_parser("calibrate", help="calibrate every sample of a record file")
    p.add_argument("--records", required=True)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=0.2)
    p.add_argument(
        "--fusion",
        default="single",
        choices=["single", "naive", "entropy", "confidence", "unconfidence", "pdd"],
    )
    p.add_argument("--normalize-naive", action="store_true")
    p.add_argument(
        "--kinds",
        default=None,
        help="comma list of variant kinds to contrast with (default: all present)",
    )
    p.add_argument(
        "--weight-scale",
        type=float,
        default=1.0,
        help="global multiplier on metric-derived fusion weights",
    )
    p.add_argument("--out", required=True, help="output JSONL of calibration summaries")

    p = sub.add_parser("eval", help="run the Yes/No benchmark and write reports")
    p.add_argument("--dataset", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--records", help="replay logits from a record file")
    src.add_argument("--mock", action="store_true", help="synthesize logits deterministically")
    p.add_argument("--seed", type=int, default=0, help="mock provider seed")
    p.add_argument(
        "--methods",
        default="original,single-noise,single-noimage,single-downsample,single-edited,"
        "naive-fusion,entropy-fusion,pdd-fusion",
        help=f"comma list of presets from: {', '.join(PRESET_ORDER)}",
    )
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=0.2)
    p.add_argument("--normalize-naive", action="store_true")
    p.add_argument(
        "--fusion-kinds",
        default=",".join(FUSION_KIND_NAMES),
        help="variant kinds fused by fusion presets",
    )
    p.add_argument("--yes-ids", default=None, help="comma list of yes token ids")
    p.add_argument("--no-ids", default=None, help="comma list of no token ids")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("import", help="convert a published benchmark layout")
    imp = p.add_subparsers(dest="layout", required=True)
    ip = imp.add_parser("pope", help="POPE JSON-lines (question_id/image/text/label)")
    ip.add_argument("--in", dest="input", required=True)
    ip.add_argument("--task-tag", required=True, help="e.g. pope-random")
    ip.add_argument("--out", required=True)
    im = imp.add_parser("mme", help="MME directory of <subtask>.txt tab-separated files")
    im.add_argument("--in", dest="input", required=True)
    im.add_argument("--out", required=True)

    p = sub.add_parser("inspect", help="validate a record file and print a summary")
    p.add_argument("--records", required=True)

    return parser


def _config_path_from_argv(argv: list[str]) -> str | None:
    for i, arg in enumerate(argv):
        if arg == "--config":
            return argv[i + 1] if i + 1 < len(argv) else None
        if arg.startswith("--config="):
            return arg.split("=", 1)[1]
    return None


def _apply_config_file(parser: _Parser, argv: list[str]) -> list[str]:
    """Fold --config file values in as subparser defaults; flags still win."""
    path = _config_path_from_argv(argv)
    if path is None:
        return argv
    overrides = {}
    try:
        with open(path, "r", encoding="utf-8") as fp:
            for raw in fp:
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"expected 'key = value', got {line!r}")
                key, value = (part.strip() for part in line.split("=", 1))
                overrides[key.replace("-", "_")] = value.strip("\"'")
    except OSError as exc:
        print(f"cdfuse: cannot read config {path!r}: {exc}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)
    except ValueError as exc:
        print(f"cdfuse: bad config line: {exc}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)
    for action in parser._subparsers._group_actions[0].choices.values():  # type: ignore[union-attr]
        known = {a.dest: a for a in action._actions}
        defaults = {}
        for key, value in overrides.items():
            if key in known:
                a = known[key]
                if isinstance(a, argparse._StoreTrueAction):
                    defaults[key] = value.lower() in ("1", "true", "yes", "on")
                elif a.type is not None:
                    defaults[key] = a.type(value)
                else:
                    defaults[key] = value
        action.set_defaults(**defaults)
    return argv


def _parse_id_list(text: str | None):
    if text is None:
        return None
    return frozenset(int(x) for x in text.split(",") if x.strip())


def _cmd_perturb(args) -> int:
    image = load_image(args.input)
    if args.kind == "noise":
        out = diffuse(image, args.steps, DEFAULT_SCHEDULE, rng_seed=args.seed)
    elif args.kind == "downsample":
        out = downsample(image, args.ratio, up_kernel=args.up_kernel)
    else:
        print(f"blank: no pixels written; use variant kind 'noimage' in records")
        return 0
    save_image(out, args.out)
    print(f"wrote {args.out}")
    return 0


_FUSION_FLAGS = {
    "single": Single(),
    "naive": Naive(),
    "entropy": Weighted(WeightMetric.ENTROPY),
    "confidence": Weighted(WeightMetric.CONFIDENCE),
    "unconfidence": Weighted(WeightMetric.UNCONFIDENCE),
    "pdd": Weighted(WeightMetric.PDD),
}


def _cmd_calibrate(args) -> int:
    header, records = read_records(args.records)
    provider = ReplayProvider(records, header)
    sample_ids = sorted({r.sample_id for r in records})
    config = CalibrationConfig(
        alpha=args.alpha,
        beta=args.beta,
        fusion=_FUSION_FLAGS[args.fusion],
        normalize_naive=args.normalize_naive,
        weight_scale=args.weight_scale,
    )
    want_kinds = args.kinds.split(",") if args.kinds else None
    lines = []
    for sid in sample_ids:
        original = provider.get(sid, Original())
        names = want_kinds if want_kinds else [
            k for k in provider.kinds_for(sid) if k != "original"
        ]
        if args.fusion == "single" and len(names) != 1:
            raise EngineError(
                f"fusion=single needs exactly one variant kind for sample {sid!r}; "
                f"have {names}; pass --kinds"
            )
        variants = []
        for name in names:
            kind = provider.resolve_kind(sid, name)
            variants.append((kind, provider.get(sid, kind)))
        out = calibrate(
            CalibrationInput(original=original, variants=tuple(variants), config=config)
        )
        probs = out.distribution.probs
        top = sorted(range(len(probs)), key=lambda i: (-probs[i], i))[:10]
        lines.append(
            json.dumps(
                {
                    "sample_id": sid,
                    "argmax": out.distribution.argmax,
                    "top10": [[int(i), float(probs[i])] for i in top],
                    "weights": [float(w) for w in out.weights_used],
                    "survivors": len(out.survivors),
                },
                sort_keys=True,
            )
        )
    with open(args.out, "w", encoding="utf-8") as fp:
        fp.write("\n".join(lines) + "\n")
    print(f"calibrated {len(sample_ids)} samples -> {args.out}")
    return 0


def _cmd_eval(args) -> int:
    items = load_dataset(args.dataset)
    if args.records:
        header, records = read_records(args.records)
        provider = ReplayProvider(records, header)
    else:
        provider = MockProvider(seed=args.seed)
    methods = preset_methods(
        [m.strip() for m in args.methods.split(",") if m.strip()],
        alpha=args.alpha,
        beta=args.beta,
        normalize_naive=args.normalize_naive,
        fusion_kinds=tuple(k.strip() for k in args.fusion_kinds.split(",") if k.strip()),
    )
    report = run_eval(
        items,
        provider,
        methods,
        yes_ids=_parse_id_list(args.yes_ids),
        no_ids=_parse_id_list(args.no_ids),
        threads=args.threads,
    )
    os.makedirs(args.out_dir, exist_ok=True)
    with open(os.path.join(args.out_dir, "report.json"), "wb") as fp:
        fp.write(report.to_json_bytes())
    with open(os.path.join(args.out_dir, "report.csv"), "w", encoding="utf-8", newline="") as fp:
        fp.write(report.to_table_csv())
    with open(os.path.join(args.out_dir, "histograms.csv"), "w", encoding="utf-8", newline="") as fp:
        fp.write(report.histograms_csv())
    for m in report.methods:
        print(f"{m}: overall={report.overall_accuracy(m):.4f} micro={report.micro_accuracy(m):.4f}")
    print(f"reports written to {args.out_dir}")
    return 0


def _cmd_import(args) -> int:
    items: list[QAItem] = []
    if args.layout == "pope":
        with open(args.input, "r", encoding="utf-8") as fp:
            for line_no, line in enumerate(fp, start=1):
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                question = str(obj["text"])
                label = str(obj["label"]).strip().lower()
                if label not in ("yes", "no"):
                    raise EngineError(f"{args.input}:{line_no}: label must be yes/no, got {obj['label']!r}")
                items.append(
                    QAItem(
                        sample_id=f"{args.task_tag}-{obj['question_id']}",
                        question=question,
                        gold=AnswerClass.YES if label == "yes" else AnswerClass.NO,
                        task_tag=args.task_tag,
                        image_path=obj.get("image"),
                        edit_instruction=derive_edit_instruction(question),
                    )
                )
    else:  # mme: directory of <subtask>.txt with "image\tquestion\tanswer" lines
        for fname in sorted(os.listdir(args.input)):
            if not fname.endswith(".txt"):
                continue
            subtask = fname[: -len(".txt")]
            with open(os.path.join(args.input, fname), "r", encoding="utf-8") as fp:
                for line_no, line in enumerate(fp, start=1):
                    line = line.rstrip("\n")
                    if not line.strip():
                        continue
                    parts = line.split("\t")
                    if len(parts) != 3:
                        raise EngineError(
                            f"{fname}:{line_no}: expected image<TAB>question<TAB>answer"
                        )
                    image, question, answer = parts
                    answer = answer.strip().lower()
                    if answer not in ("yes", "no"):
                        raise EngineError(f"{fname}:{line_no}: answer must be Yes/No, got {parts[2]!r}")
                    items.append(
                        QAItem(
                            sample_id=f"mme-{subtask}-{line_no}",
                            question=question,
                            gold=AnswerClass.YES if answer == "yes" else AnswerClass.NO,
                            task_tag=f"mme-{subtask}",
                            image_path=image,
                            edit_instruction=derive_edit_instruction(question),
                        )
                    )
    save_dataset(args.out, items)
    print(f"imported {len(items)} items -> {args.out}")
    return 0


def _cmd_inspect(args) -> int:
    summary = inspect_records(args.records)
    print(f"records: {summary['records']}")
    print(f"samples: {summary['samples']}")
    print(f"vocab sizes: {summary['vocab_sizes']}")
    print(f"kinds: {summary['kinds']}")
    if summary["answer_tokens"]:
        print(f"answer tokens: {summary['answer_tokens']}")
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    argv = _apply_config_file(parser, argv)
    args = parser.parse_args(argv)
    handlers = {
        "perturb": _cmd_perturb,
        "calibrate": _cmd_calibrate,
        "eval": _cmd_eval,
        "import": _cmd_import,
        "inspect": _cmd_inspect,
    }
    try:
        return handlers[args.command](args)
    except EngineError as exc:
        print(f"cdfuse: data error: {exc}", file=sys.stderr)
        return DATA_ERROR
    except OSError as exc:
        print(f"cdfuse: {exc}", file=sys.stderr)
        return DATA_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
