"""File formats: spike datasets, weight checkpoints, metrics CSV and summaries.

Dataset file (text, UTF-8)::

    # fbsnn-dataset 1
    {"count": N, "dt": ..., "m": ..., "n": ..., "T": ..., "meta": {...}, ...}
    sample <label> <input rates> | <target rates> [| x y]
    <m input rows>
    <n target rows>
    sample ...

Each spike row is run-length encoded as alternating run lengths that start
with a run of zeros, e.g. ``3 1 4 2 0`` for ``0001000011``. A trailing zero run
of length 0 is dropped. Floats are written with ``repr`` so rates survive a
round trip exactly.

Checkpoint file::

    # fbsnn-weights 1
    {"n": ..., "m": ..., "config_hash": "...", "config": {...}}
    <n rows of m weights>
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .dynamics import WeightSet
from .encoding import SpikeDataset
from .errors import StructuralError

__all__ = [
    "DATASET_MAGIC",
    "WEIGHTS_MAGIC",
    "SUMMARY_SCHEMA",
    "rle_encode",
    "rle_decode",
    "save_dataset",
    "load_dataset",
    "config_hash",
    "save_weights",
    "load_weights",
    "write_metrics_csv",
    "read_metrics_csv",
    "write_json",
]

DATASET_MAGIC = "# fbsnn-dataset 1"
WEIGHTS_MAGIC = "# fbsnn-weights 1"
SUMMARY_SCHEMA = 1


def rle_encode(row) -> str:
    row = np.asarray(row, dtype=np.uint8)
    if row.size == 0:
        return ""
    edges = np.flatnonzero(np.diff(row)) + 1
    bounds = np.concatenate([[0], edges, [row.size]])
    runs = np.diff(bounds).tolist()
    if row[0] == 1:
        runs = [0] + runs
    return " ".join(map(str, runs))


def rle_decode(text: str, T: int) -> np.ndarray:
    out = np.zeros(T, dtype=np.uint8)
    pos, bit = 0, 0
    for tok in text.split():
        k = int(tok)
        if k < 0 or pos + k > T:
            raise StructuralError(f"run length {k} overflows a row of {T} steps")
        if bit:
            out[pos : pos + k] = 1
        pos += k
        bit ^= 1
    if pos != T:
        raise StructuralError(f"row covers {pos} steps, expected {T}")
    return out


def _floats(a) -> str:
    return " ".join(repr(float(x)) for x in np.ravel(a))


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, (set, frozenset)):
        return sorted(_jsonable(v) for v in x)
    return x


def save_dataset(ds: SpikeDataset, path, extra: dict | None = None) -> None:
    header = {
        "count": len(ds),
        "dt": ds.dt,
        "m": ds.m,
        "n": ds.n,
        "T": ds.T,
        "seed": ds.seed,
        "split": ds.split,
        "meta": _jsonable(ds.meta),
    }
    if extra:
        header["extra"] = _jsonable(extra)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(DATASET_MAGIC + "\n")
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for k in range(len(ds)):
            line = f"sample {int(ds.labels[k])} {_floats(ds.input_rates[k])} | {_floats(ds.target_rates[k])}"
            if ds.coords is not None:
                line += f" | {_floats(ds.coords[k])}"
            fh.write(line + "\n")
            for row in ds.inputs[k]:
                fh.write(rle_encode(row) + "\n")
            for row in ds.targets[k]:
                fh.write(rle_encode(row) + "\n")


def load_dataset(path) -> SpikeDataset:
    with open(path, encoding="utf-8") as fh:
        magic = fh.readline().rstrip("\n")
        if magic != DATASET_MAGIC:
            raise StructuralError(f"{path}: not a dataset file (got {magic!r})")
        h = json.loads(fh.readline())
        N, m, n, T = h["count"], h["m"], h["n"], h["T"]
        inputs = np.zeros((N, m, T), dtype=np.uint8)
        targets = np.zeros((N, n, T), dtype=np.uint8)
        labels = np.zeros(N, dtype=np.int64)
        in_rates = np.zeros((N, m))
        trg_rates = np.zeros((N, n))
        coords = []
        for k in range(N):
            parts = fh.readline().rstrip("\n").split("|")
            head = parts[0].split()
            if not head or head[0] != "sample":
                raise StructuralError(f"{path}: malformed record {k}")
            labels[k] = int(head[1])
            in_rates[k] = [float(x) for x in head[2:]]
            trg_rates[k] = [float(x) for x in parts[1].split()]
            if len(parts) > 2:
                coords.append([float(x) for x in parts[2].split()])
            for j in range(m):
                inputs[k, j] = rle_decode(fh.readline(), T)
            for i in range(n):
                targets[k, i] = rle_decode(fh.readline(), T)
    return SpikeDataset(
        inputs, targets, labels, in_rates, trg_rates, float(h["dt"]),
        seed=h.get("seed", 0), split=h.get("split", 0),
        coords=np.array(coords) if coords else None, meta=h.get("meta", {}),
    )


def config_hash(config: dict) -> str:
    blob = json.dumps(_jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def save_weights(weights: WeightSet, path, config: dict | None = None) -> str:
    config = config or {}
    h = config_hash(config)
    header = {"n": weights.n, "m": weights.m, "config_hash": h, "config": _jsonable(config)}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(WEIGHTS_MAGIC + "\n")
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for row in weights.w:
            fh.write(_floats(row) + "\n")
    return h


def load_weights(path) -> tuple[WeightSet, dict]:
    with open(path, encoding="utf-8") as fh:
        if fh.readline().rstrip("\n") != WEIGHTS_MAGIC:
            raise StructuralError(f"{path}: not a weight checkpoint")
        header = json.loads(fh.readline())
        rows = [[float(x) for x in fh.readline().split()] for _ in range(header["n"])]
    w = np.array(rows, dtype=np.float64).reshape(header["n"], header["m"])
    if config_hash(header["config"]) != header["config_hash"]:
        raise StructuralError(f"{path}: config hash mismatch")
    return WeightSet(w), header


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_metrics_csv(path, rows: list[dict], columns: list[str] | None = None, comment: str | None = None) -> None:
    """Write dict rows; floats use ``repr`` so reruns compare byte for byte."""
    columns = columns or list(rows[0].keys()) if rows else (columns or [])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if comment:
            for line in comment.splitlines():
                fh.write(f"# {line}\n")
        wr = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
        wr.writeheader()
        for r in rows:
            wr.writerow({k: _fmt(r.get(k, "")) for k in columns})


def read_metrics_csv(path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    out = []
    for r in csv.DictReader(lines):
        row = {}
        for k, v in r.items():
            try:
                row[k] = float(v)
            except (TypeError, ValueError):
                row[k] = v
        out.append(row)
    return out


def write_json(path, doc: dict) -> None:
    Path(path).write_text(json.dumps(_jsonable(doc), indent=1, sort_keys=True) + "\n", encoding="utf-8")
