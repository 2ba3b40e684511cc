"""Readers and writers for the file formats shared with the main pipeline.

These are deliberately independent reimplementations of the interchange
formats (abstract text files, triplet and split TSVs, the little-endian
float32 embedding store) so this package never imports pipeline internals.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import numpy as np


def read_abstracts(abstracts_dir: Path | str) -> dict[str, str]:
    """Abstracts keyed by database id from `<db_id>.abstract.txt` files."""
    out: dict[str, str] = {}
    for path in sorted(Path(abstracts_dir).glob("*.abstract.txt")):
        out[path.name[: -len(".abstract.txt")]] = path.read_text(encoding="utf-8")
    if not out:
        raise FileNotFoundError(f"no *.abstract.txt files under {abstracts_dir}")
    return out


def read_triplets(path: Path | str) -> list[tuple[str, str, tuple[str, ...]]]:
    """(anchor, positive, negatives) rows from the tab-separated triplet file."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            anchor, positive, negs = line.rstrip("\n").split("\t")
            rows.append((anchor, positive, tuple(negs.split(","))))
    return rows


def read_splits(path: Path | str) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            db_id, split = line.rstrip("\n").split("\t")
            out[db_id] = split
    return out


def write_embedding_store(
    ids: Sequence[str], data: np.ndarray, prefix: Path | str
) -> None:
    """Unit-normalized float32 rows as `<prefix>.f32le` plus `.meta.json`."""
    ids = list(ids)
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] != len(ids):
        raise ValueError("data shape does not match id count")
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate ids in embedding store")
    norms = np.linalg.norm(data, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("zero-norm embedding row")
    rows = (data / norms[:, None]).astype("<f4")
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    rows.tofile(f"{prefix}.f32le")
    meta = {"ids": ids, "dim": int(rows.shape[1]), "count": len(ids)}
    with open(f"{prefix}.meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, sort_keys=True)
        fh.write("\n")


def read_embedding_store(prefix: Path | str) -> tuple[list[str], np.ndarray]:
    prefix = Path(prefix)
    with open(f"{prefix}.meta.json", encoding="utf-8") as fh:
        meta = json.load(fh)
    raw = np.fromfile(f"{prefix}.f32le", dtype="<f4")
    expected = int(meta["count"]) * int(meta["dim"])
    if raw.size != expected:
        raise ValueError(f"expected {expected} values, found {raw.size}")
    return list(meta["ids"]), raw.reshape(int(meta["count"]), int(meta["dim"]))


def write_cluster_labels(labels: dict[str, int], path: Path | str) -> None:
    """`id<TAB>cluster` rows consumed by the pipeline's node profiler."""
    with open(path, "w", encoding="utf-8") as fh:
        for db_id in sorted(labels):
            fh.write(f"{db_id}\t{int(labels[db_id])}\n")


def write_metrics_tsv(rows: Sequence[dict], path: Path | str) -> None:
    """Metric rows as a TSV; column order fixed by the first row."""
    rows = list(rows)
    if not rows:
        raise ValueError("no metric rows to write")
    header = list(rows[0])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            cells = [
                f"{row[h]:.6f}" if isinstance(row[h], float) else str(row[h])
                for h in header
            ]
            fh.write("\t".join(cells) + "\n")
