"""Writing the JSON-lines interchange format."""

from __future__ import annotations

import json
from typing import Dict, List

import numpy as np

from .encoders import Encoder
from .trees import Tree, read_treebank


def _floats(v: np.ndarray, dim: int, what: str) -> List[float]:
    v = np.asarray(v, dtype=np.float32).reshape(-1)
    if v.shape[0] != dim:
        raise ValueError(f"{what}: expected {dim} values, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{what}: non-finite value")
    # Shortest decimal that round-trips the float32 value.
    return [float(str(x)) for x in v]


def make_record(record_id: int, tree: Tree, encoder: Encoder) -> Dict:
    words = tree.leaves()
    sentence = " ".join(words)
    dim = encoder.dim
    return {
        "id": record_id,
        "tree": str(tree),
        "dim": dim,
        "words": [{"text": w, "vec": _floats(encoder.word_vector(w), dim, f"word {w!r}")} for w in words],
        "sentence_vec": _floats(encoder.sentence_vector(sentence), dim, "sentence"),
    }


def export_corpus(encoder: Encoder, treebank: str, out_path: str, normalize: bool = True) -> int:
    """Encode every tree of `treebank` and write one record per line.
    Records are validated before anything is written. Returns the count."""
    records = [make_record(lineno, tree, encoder) for lineno, tree in read_treebank(treebank, normalize)]
    with open(out_path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r, ensure_ascii=False) + "\n")
    return len(records)
