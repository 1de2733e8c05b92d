"""Logit-record files: JSON-lines, one variant record per line, schema v1.

Every line carries ``"v": 1``. An optional header line (no ``sample_id``)
may declare the file-wide vocabulary size and the yes/no answer token ids
captured from a model's tokenizer. Record lines hold the sample id, the
variant kind with its parameters, and either dense logits or a sparse
top-k block with a floor score for unlisted tokens.

Non-finite floats are written as the strings "-inf"; the reader also
accepts bare -Infinity tokens for compatibility, and rejects NaN.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import IO, Iterable

import numpy as np

from .core import (
    DiffusionNoise,
    Downsample,
    Edited,
    LogitVector,
    NoImage,
    Original,
    VariantKind,
    VariantRecord,
    kind_key,
)
from .errors import RecordFormatError

__all__ = [
    "RecordFileHeader",
    "read_records",
    "write_records",
    "inspect_records",
]

SCHEMA_VERSION = 1

_KNOWN_KINDS = ("original", "noise", "downsample", "noimage", "edited")


@dataclass(frozen=True)
class RecordFileHeader:
    vocab_size: int | None = None
    yes_token_ids: tuple[int, ...] = ()
    no_token_ids: tuple[int, ...] = ()


def _encode_float(x: float):
    if x == float("-inf"):
        return "-inf"
    if math.isnan(x) or x == float("inf"):
        raise RecordFormatError(f"cannot serialize non-finite logit {x!r}")
    return float(x)


def _decode_float(x, where: str) -> float:
    if isinstance(x, str):
        if x.lower() in ("-inf", "-infinity"):
            return float("-inf")
        raise RecordFormatError(f"bad float string {x!r} in {where}")
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise RecordFormatError(f"expected a number in {where}, got {type(x).__name__}")
    x = float(x)
    if math.isnan(x) or x == float("inf"):
        raise RecordFormatError(f"non-finite value in {where}")
    return x


def _kind_to_json(kind: VariantKind) -> dict:
    return {"kind": kind.name, "params": kind.params()}


def _kind_from_json(obj, line_no: int) -> VariantKind:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise RecordFormatError(f"line {line_no}: variant must be an object with a 'kind'")
    kind = obj["kind"]
    params = obj.get("params", {}) or {}
    if kind not in _KNOWN_KINDS:
        raise RecordFormatError(f"line {line_no}: unknown variant kind {kind!r}")
    try:
        if kind == "original":
            _expect_params(params, (), line_no, kind)
            return Original()
        if kind == "noise":
            _expect_params(params, ("steps", "schedule"), line_no, kind)
            return DiffusionNoise(steps=int(params["steps"]), schedule=str(params["schedule"]))
        if kind == "downsample":
            _expect_params(params, ("ratio",), line_no, kind)
            return Downsample(ratio=int(params["ratio"]))
        if kind == "noimage":
            _expect_params(params, (), line_no, kind)
            return NoImage()
        _expect_params(params, ("cfg_text", "instruction"), line_no, kind)
        return Edited(cfg_text=float(params["cfg_text"]), instruction=str(params["instruction"]))
    except (TypeError, ValueError) as exc:
        raise RecordFormatError(f"line {line_no}: bad params for kind {kind!r}: {exc}") from exc


def _expect_params(params: dict, names: tuple[str, ...], line_no: int, kind: str) -> None:
    if set(params) != set(names):
        raise RecordFormatError(
            f"line {line_no}: kind {kind!r} takes params {sorted(names)}, got {sorted(params)}"
        )


def _logits_to_json(lv: LogitVector) -> dict:
    if lv.is_dense:
        return {"dense": [_encode_float(x) for x in lv.values]}
    return {
        "sparse": {
            "ids": [int(i) for i in lv.ids],
            "values": [_encode_float(x) for x in lv.values],
            "floor": _encode_float(lv.floor),
        }
    }


def _logits_from_json(obj, vocab_size: int | None, line_no: int) -> LogitVector:
    if not isinstance(obj, dict):
        raise RecordFormatError(f"line {line_no}: 'logits' must be an object")
    if "dense" in obj:
        values = [_decode_float(x, f"line {line_no} dense logits") for x in obj["dense"]]
        if vocab_size is not None and len(values) != vocab_size:
            raise RecordFormatError(
                f"line {line_no}: dense length {len(values)} != declared vocab_size {vocab_size}"
            )
        return LogitVector.dense(values)
    if "sparse" in obj:
        sp = obj["sparse"]
        if vocab_size is None:
            raise RecordFormatError(
                f"line {line_no}: sparse logits need a vocab_size (header or record field)"
            )
        ids = sp.get("ids")
        values = sp.get("values")
        if not isinstance(ids, list) or not isinstance(values, list) or len(ids) != len(values):
            raise RecordFormatError(f"line {line_no}: sparse ids/values must be aligned lists")
        return LogitVector(
            vocab_size=vocab_size,
            values=np.array([_decode_float(x, f"line {line_no} sparse values") for x in values]),
            ids=np.array([int(i) for i in ids], dtype=np.int64),
            floor=_decode_float(sp.get("floor", "-inf"), f"line {line_no} sparse floor"),
        )
    raise RecordFormatError(f"line {line_no}: logits must be 'dense' or 'sparse'")


def _answer_map_from_json(obj, line_no: int):
    if obj is None:
        return None
    if not isinstance(obj, dict) or set(obj) != {"yes", "no"}:
        raise RecordFormatError(f"line {line_no}: answer_token_map needs 'yes' and 'no' lists")
    return (
        frozenset(int(i) for i in obj["yes"]),
        frozenset(int(i) for i in obj["no"]),
    )


def record_to_json(rec: VariantRecord) -> dict:
    obj = {
        "v": SCHEMA_VERSION,
        "sample_id": rec.sample_id,
        "variant": _kind_to_json(rec.variant),
        "logits": _logits_to_json(rec.logits),
    }
    if not rec.logits.is_dense:
        obj["vocab_size"] = rec.logits.vocab_size
    if rec.answer_token_map is not None:
        yes, no = rec.answer_token_map
        obj["answer_token_map"] = {"yes": sorted(yes), "no": sorted(no)}
    return obj


def write_records(
    path_or_fp: str | IO[str],
    records: Iterable[VariantRecord],
    header: RecordFileHeader | None = None,
) -> None:
    def _write(fp: IO[str]) -> None:
        if header is not None:
            hdr = {"v": SCHEMA_VERSION}
            if header.vocab_size is not None:
                hdr["vocab_size"] = header.vocab_size
            if header.yes_token_ids or header.no_token_ids:
                hdr["answer_tokens"] = {
                    "yes": sorted(header.yes_token_ids),
                    "no": sorted(header.no_token_ids),
                }
            fp.write(json.dumps(hdr, sort_keys=True, allow_nan=False) + "\n")
        for rec in records:
            fp.write(json.dumps(record_to_json(rec), sort_keys=True, allow_nan=False) + "\n")

    if isinstance(path_or_fp, str):
        with open(path_or_fp, "w", encoding="utf-8") as fp:
            _write(fp)
    else:
        _write(path_or_fp)


def read_records(path_or_fp: str | IO[str]) -> tuple[RecordFileHeader | None, list[VariantRecord]]:
    """Parse a record file; raises RecordFormatError on any schema violation."""
    if isinstance(path_or_fp, str):
        with open(path_or_fp, "r", encoding="utf-8") as fp:
            lines = fp.readlines()
    else:
        lines = path_or_fp.readlines()

    header: RecordFileHeader | None = None
    records: list[VariantRecord] = []
    seen: set[tuple[str, str]] = set()
    vocab_by_sample: dict[str, int] = {}

    for line_no, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise RecordFormatError(f"line {line_no}: invalid JSON: {exc}") from exc
        if not isinstance(obj, dict):
            raise RecordFormatError(f"line {line_no}: expected a JSON object")
        if obj.get("v") != SCHEMA_VERSION:
            raise RecordFormatError(
                f"line {line_no}: missing or unsupported schema version {obj.get('v')!r}"
            )
        if "sample_id" not in obj:
            if records or header is not None:
                raise RecordFormatError(f"line {line_no}: header must be the first line")
            header = _header_from_json(obj, line_no)
            continue
        rec = _record_from_json(obj, header, line_no)
        key = (rec.sample_id, kind_key(rec.variant))
        if key in seen:
            raise RecordFormatError(
                f"line {line_no}: duplicate record for sample {rec.sample_id!r} "
                f"variant {kind_key(rec.variant)!r}"
            )
        seen.add(key)
        prev = vocab_by_sample.setdefault(rec.sample_id, rec.logits.vocab_size)
        if prev != rec.logits.vocab_size:
            raise RecordFormatError(
                f"line {line_no}: sample {rec.sample_id!r} mixes vocab sizes {prev} and "
                f"{rec.logits.vocab_size}"
            )
        records.append(rec)
    return header, records


def _header_from_json(obj: dict, line_no: int) -> RecordFileHeader:
    allowed = {"v", "vocab_size", "answer_tokens"}
    extra = set(obj) - allowed
    if extra:
        raise RecordFormatError(f"line {line_no}: unknown header fields {sorted(extra)}")
    vocab_size = obj.get("vocab_size")
    if vocab_size is not None and (not isinstance(vocab_size, int) or vocab_size < 2):
        raise RecordFormatError(f"line {line_no}: bad header vocab_size {vocab_size!r}")
    yes_ids: tuple[int, ...] = ()
    no_ids: tuple[int, ...] = ()
    tokens = obj.get("answer_tokens")
    if tokens is not None:
        if not isinstance(tokens, dict) or set(tokens) != {"yes", "no"}:
            raise RecordFormatError(f"line {line_no}: answer_tokens needs 'yes' and 'no' lists")
        yes_ids = tuple(int(i) for i in tokens["yes"])
        no_ids = tuple(int(i) for i in tokens["no"])
    return RecordFileHeader(vocab_size=vocab_size, yes_token_ids=yes_ids, no_token_ids=no_ids)


def _record_from_json(obj: dict, header: RecordFileHeader | None, line_no: int) -> VariantRecord:
    allowed = {"v", "sample_id", "variant", "logits", "vocab_size", "answer_token_map"}
    extra = set(obj) - allowed
    if extra:
        raise RecordFormatError(f"line {line_no}: unknown record fields {sorted(extra)}")
    sample_id = obj["sample_id"]
    if not isinstance(sample_id, str) or not sample_id:
        raise RecordFormatError(f"line {line_no}: sample_id must be a non-empty string")
    if "variant" not in obj or "logits" not in obj:
        raise RecordFormatError(f"line {line_no}: record needs 'variant' and 'logits'")
    vocab_size = obj.get("vocab_size")
    if vocab_size is None and header is not None:
        vocab_size = header.vocab_size
    if vocab_size is not None and (not isinstance(vocab_size, int) or vocab_size < 2):
        raise RecordFormatError(f"line {line_no}: bad vocab_size {vocab_size!r}")
    try:
        logits = _logits_from_json(obj["logits"], vocab_size, line_no)
    except RecordFormatError:
        raise
    except Exception as exc:
        raise RecordFormatError(f"line {line_no}: bad logits: {exc}") from exc
    return VariantRecord(
        sample_id=sample_id,
        variant=_kind_from_json(obj["variant"], line_no),
        logits=logits,
        answer_token_map=_answer_map_from_json(obj.get("answer_token_map"), line_no),
    )


def inspect_records(path: str) -> dict:
    """Validate a record file and summarize it (sample count, vocab, kind histogram)."""
    header, records = read_records(path)
    samples = sorted({r.sample_id for r in records})
    kinds: dict[str, int] = {}
    for r in records:
        kinds[r.variant.name] = kinds.get(r.variant.name, 0) + 1
    vocab_sizes = sorted({r.logits.vocab_size for r in records})
    return {
        "records": len(records),
        "samples": len(samples),
        "vocab_sizes": vocab_sizes,
        "kinds": dict(sorted(kinds.items())),
        "has_header": header is not None,
        "header_vocab_size": header.vocab_size if header else None,
        "answer_tokens": (
            {"yes": sorted(header.yes_token_ids), "no": sorted(header.no_token_ids)}
            if header and (header.yes_token_ids or header.no_token_ids)
            else None
        ),
    }
