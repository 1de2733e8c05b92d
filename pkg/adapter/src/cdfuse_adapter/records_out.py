"""Writer/reader for the engine's logit-record JSONL schema (v1).

Kept deliberately small: every line carries "v": 1, the first line is a
header with the vocabulary size and the model's yes/no token ids, record
lines hold sparse top-k logits with the (k+1)-th value as floor (dense
when the vocabulary is not larger than k).
"""

from __future__ import annotations

import json
import math

import numpy as np


def top_k_sparse(logits: np.ndarray, k: int):
    """(ids, values, floor) of the k highest logits; floor is the (k+1)-th.

    Ties are broken toward lower token ids so output is deterministic.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if k >= len(logits):
        return None
    order = np.lexsort((np.arange(len(logits)), -logits))
    ids = np.sort(order[:k])
    floor = float(logits[order[k]])
    return ids, logits[ids], floor


def _encode(x: float):
    if x == float("-inf"):
        return "-inf"
    if math.isnan(x) or math.isinf(x):
        raise ValueError(f"cannot serialize {x!r}")
    return float(x)


def header_line(vocab_size: int, yes_ids, no_ids) -> str:
    return json.dumps(
        {
            "v": 1,
            "vocab_size": vocab_size,
            "answer_tokens": {"yes": sorted(yes_ids), "no": sorted(no_ids)},
        },
        sort_keys=True,
    )


def record_line(sample_id: str, kind: str, params: dict, logits: np.ndarray, top_k: int) -> str:
    obj = {
        "v": 1,
        "sample_id": sample_id,
        "variant": {"kind": kind, "params": params},
    }
    sparse = top_k_sparse(logits, top_k)
    if sparse is None:
        obj["logits"] = {"dense": [_encode(float(x)) for x in logits]}
    else:
        ids, values, floor = sparse
        obj["vocab_size"] = int(len(logits))
        obj["logits"] = {
            "sparse": {
                "ids": [int(i) for i in ids],
                "values": [_encode(float(x)) for x in values],
                "floor": _encode(floor),
            }
        }
    return json.dumps(obj, sort_keys=True)


def read_record_file(path: str):
    """Parse a record file back into (header, rows) for round-trip checks."""
    header, rows = None, []
    with open(path, "r", encoding="utf-8") as fp:
        for line in fp:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if obj.get("v") != 1:
                raise ValueError(f"unsupported schema version {obj.get('v')!r}")
            if "sample_id" not in obj:
                header = obj
            else:
                rows.append(obj)
    return header, rows


def rewrite_record_file(path: str, header, rows) -> str:
    """Serialize parsed contents back to text (byte-stability check)."""
    lines = []
    if header is not None:
        lines.append(json.dumps(header, sort_keys=True))
    lines.extend(json.dumps(row, sort_keys=True) for row in rows)
    return "\n".join(lines) + "\n"


def densified_softmax_topk_mass(ids, values, floor, vocab_size: int) -> float:
    """Top-k probability mass after densifying with the floor score."""
    dense = np.full(vocab_size, floor, dtype=np.float64)
    dense[np.asarray(ids, dtype=np.int64)] = values
    z = np.exp(dense - dense.max())
    probs = z / z.sum()
    return float(probs[np.asarray(ids, dtype=np.int64)].sum())


def full_softmax_topk_mass(logits: np.ndarray, ids) -> float:
    logits = np.asarray(logits, dtype=np.float64)
    z = np.exp(logits - logits.max())
    probs = z / z.sum()
    return float(probs[np.asarray(ids, dtype=np.int64)].sum())
