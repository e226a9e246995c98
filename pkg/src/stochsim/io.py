"""File formats: model JSON, whitespace sequence files, results CSV.

Memory states are 0-based in every file; label ``k`` in 1-based notation is
stored at index ``k - 1``.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .hmm import SymbolSequence, TransitionTensor
from .quantum import QuantumTensor

INDEXING_NOTE = "memory states are 0-based; 1-based label k is index k-1"
RESULTS_HEADER = ("experiment", "param_json", "metric", "value", "seed")


def _plain(obj):
    """Recursively convert numpy containers and scalars to JSON types."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def model_to_dict(model) -> dict:
    if isinstance(model, TransitionTensor):
        kind, tensor, extra = "classical", model.T.tolist(), {}
    elif isinstance(model, QuantumTensor):
        K = model.K
        tensor = np.stack([K.real, K.imag], axis=-1).tolist()
        kind, extra = "quantum", {"normalized": bool(model.normalized)}
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    meta = {"indexing": INDEXING_NOTE, **_plain(dict(model.meta))}
    return {"kind": kind, "d": model.d, "D": model.D, **extra, "tensor": tensor, "metadata": meta}


def model_from_dict(data: dict):
    kind = data.get("kind")
    meta = dict(data.get("metadata", {}))
    meta.pop("indexing", None)
    arr = np.asarray(data["tensor"], dtype=float)
    if kind == "classical":
        model = TransitionTensor(arr, meta)
    elif kind == "quantum":
        if arr.ndim != 4 or arr.shape[-1] != 2:
            raise ValueError("quantum tensors must hold [re, im] pairs")
        model = QuantumTensor(arr[..., 0] + 1j * arr[..., 1], bool(data.get("normalized", False)), meta)
    else:
        raise ValueError(f"unknown model kind {kind!r}")
    if (model.d, model.D) != (data.get("d", model.d), data.get("D", model.D)):
        raise ValueError("declared d/D disagree with the tensor shape")
    return model


def save_model(model, path) -> None:
    text = json.dumps(model_to_dict(model), indent=1, sort_keys=False)
    Path(path).write_text(text + "\n")


def load_model(path):
    return model_from_dict(json.loads(Path(path).read_text()))


def write_sequences(seqs, path) -> None:
    lines = [" ".join(map(str, np.asarray(s, dtype=np.int64).tolist())) for s in seqs]
    Path(path).write_text("".join(line + "\n" for line in lines))


def read_sequences(path, d: int | None = None) -> list[SymbolSequence]:
    """One sequence per nonblank line; ``d`` defaults to the largest symbol + 1."""
    rows = [np.array(line.split(), dtype=np.int64) for line in Path(path).read_text().splitlines() if line.strip()]
    if not rows:
        raise ValueError(f"{path}: no sequences found")
    if d is None:
        d = max(int(r.max()) for r in rows) + 1
    return [SymbolSequence(r, d) for r in rows]


def format_value(v) -> str:
    return repr(float(v))


def results_rows(experiment: str, params: dict, metrics: dict, seed) -> list[tuple]:
    pj = json.dumps(_plain(params), sort_keys=True, separators=(",", ":"))
    s = "" if seed is None else str(seed)
    return [(experiment, pj, name, format_value(val), s) for name, val in metrics.items()]


def write_results(rows, path, append: bool = False) -> None:
    """Write (or append) rows under the fixed results header."""
    path = Path(path)
    fresh = not (append and path.exists() and path.stat().st_size > 0)
    with path.open("a" if not fresh else "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if fresh:
            w.writerow(RESULTS_HEADER)
        w.writerows(rows)


def read_results(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def ingest_column(csv_path, column: str) -> tuple[np.ndarray, dict]:
    """Map a categorical column to symbols in order of first appearance."""
    with Path(csv_path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or column not in reader.fieldnames:
            raise KeyError(f"column {column!r} not found in {csv_path}")
        values = [row[column].strip() for row in reader]
    if not values:
        raise ValueError(f"column {column!r} is empty")
    labels: dict[str, int] = {}
    for v in values:
        labels.setdefault(v, len(labels))
    return np.array([labels[v] for v in values], dtype=np.int64), labels
