"""Embedding store and the parallel all-pairs cosine threshold join.

Store format: ``<name>.f32le`` (row-major little-endian float32) plus
``<name>.meta.json`` (ids, dim, count). Rows are unit-normalized at load;
the join then reduces to tiled dot products with float64 accumulation.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ._accel import tile_hist, tile_pairs

DEFAULT_DIM = 768
DEFAULT_THRESHOLD = 0.94
THRESHOLD_PRESETS = {"loose": 0.93, "default": 0.94, "strict": 0.96}


class EmbeddingError(Exception):
    pass


@dataclass
class EmbeddingMatrix:
    ids: list[str]
    data: np.ndarray  # N x dim float32, rows unit-normalized
    diagnostics: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return int(self.data.shape[1])

    def __len__(self) -> int:
        return len(self.ids)


@dataclass
class EdgeList:
    # parallel arrays sorted by (i, j), i < j
    src: np.ndarray  # int64 row indices
    dst: np.ndarray  # int64 row indices
    sim: np.ndarray  # float64
    threshold: float

    def __len__(self) -> int:
        return len(self.src)


def normalize_rows(raw: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unit-normalize rows; returns (normalized float32, pre-norms)."""
    norms = np.linalg.norm(raw.astype(np.float64), axis=1)
    zero = np.nonzero(norms == 0.0)[0]
    if zero.size:
        raise EmbeddingError(f"zero-norm embedding at row {int(zero[0])}")
    normalized = (raw.astype(np.float64) / norms[:, None]).astype(np.float32)
    return normalized, norms


def make_matrix(ids: Sequence[str], raw: np.ndarray) -> EmbeddingMatrix:
    """Build a matrix from raw (not necessarily normalized) vectors."""
    ids = list(ids)
    if len(set(ids)) != len(ids):
        raise EmbeddingError("duplicate ids in embedding matrix")
    if raw.ndim != 2 or raw.shape[0] != len(ids):
        raise EmbeddingError("data shape does not match id count")
    if not np.all(np.isfinite(raw)):
        raise EmbeddingError("non-finite values in embedding data")
    data, norms = normalize_rows(raw)
    return EmbeddingMatrix(ids=ids, data=data,
                           diagnostics={"pre_norms": norms.tolist()})


def store_embeddings(matrix: EmbeddingMatrix, prefix: Path | str) -> None:
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    if not np.all(np.isfinite(matrix.data)):
        raise EmbeddingError("non-finite values in embedding data")
    matrix.data.astype("<f4").tofile(f"{prefix}.f32le")
    meta = {"ids": matrix.ids, "dim": matrix.dim, "count": len(matrix)}
    with open(f"{prefix}.meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, sort_keys=True)
        fh.write("\n")


def load_embeddings(prefix: Path | str) -> EmbeddingMatrix:
    prefix = Path(prefix)
    with open(f"{prefix}.meta.json", encoding="utf-8") as fh:
        meta = json.load(fh)
    ids, dim, count = meta["ids"], int(meta["dim"]), int(meta["count"])
    raw = np.fromfile(f"{prefix}.f32le", dtype="<f4")
    expected = count * dim
    if raw.size != expected:
        raise EmbeddingError(f"expected {expected} values, found {raw.size}")
    return make_matrix(ids, raw.reshape(count, dim))


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of two vectors, clamped to [-1, 1] against rounding."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise EmbeddingError("cosine similarity of a zero vector is undefined")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def _tiles(n: int, tile: int):
    starts = list(range(0, n, tile))
    for a in starts:
        for b in starts:
            if b + tile > a:  # only blocks that can contain i < j
                yield a, min(a + tile, n), b, min(b + tile, n)


def threshold_join(
    matrix: EmbeddingMatrix,
    threshold: float = DEFAULT_THRESHOLD,
    tile: int = 256,
    workers: int = 1,
) -> EdgeList:
    """Exact all-pairs cosine join: every pair (i < j) with similarity >=
    threshold. Result is independent of tile size and worker count."""
    if not (-1.0 < threshold <= 1.0):
        raise ValueError("threshold must be in (-1, 1]")
    if tile < 1:
        raise ValueError("tile must be >= 1")
    data = matrix.data.astype(np.float64)
    n = data.shape[0]
    jobs = list(_tiles(n, tile))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(
                pool.map(lambda job: tile_pairs(data, *job, threshold), jobs)
            )
    else:
        results = [tile_pairs(data, *job, threshold) for job in jobs]

    src = np.concatenate([r[0] for r in results]) if results else np.empty(0, np.int64)
    dst = np.concatenate([r[1] for r in results]) if results else np.empty(0, np.int64)
    sim = np.concatenate([r[2] for r in results]) if results else np.empty(0, np.float64)
    order = np.lexsort((dst, src))
    return EdgeList(src=src[order], dst=dst[order], sim=sim[order],
                    threshold=threshold)


def similarity_histogram(
    matrix: EmbeddingMatrix,
    bins: int = 100,
    sample_pairs: Optional[int] = None,
    seed: int = 0,
    tile: int = 256,
) -> tuple[np.ndarray, np.ndarray]:
    """Histogram of pairwise cosines over [-1, 1].

    Exact enumeration by default; uniform seeded pair sampling when
    ``sample_pairs`` is given. Returns (counts, bin_edges).
    """
    if bins < 1:
        raise ValueError("bins must be >= 1")
    edges = np.linspace(-1.0, 1.0, bins + 1)
    data = matrix.data.astype(np.float64)
    n = data.shape[0]
    if sample_pairs is None:
        counts = np.zeros(bins, dtype=np.int64)
        for job in _tiles(n, tile):
            counts += tile_hist(data, *job, edges)
        return counts, edges
    rng = np.random.default_rng(seed)
    i = rng.integers(0, n, size=sample_pairs)
    j = rng.integers(0, n - 1, size=sample_pairs)
    j = np.where(j >= i, j + 1, j)  # uniform over distinct pairs
    sims = np.clip(np.einsum("ij,ij->i", data[i], data[j]), -1.0, 1.0)
    counts, _ = np.histogram(sims, bins=edges)
    return counts.astype(np.int64), edges


def write_edges(edges: EdgeList, ids: Sequence[str], path: Path | str) -> None:
    """Tab-separated src_id, dst_id, sim (6 decimal places), sorted."""
    with open(path, "w", encoding="utf-8") as fh:
        for i, j, s in zip(edges.src, edges.dst, edges.sim):
            fh.write(f"{ids[i]}\t{ids[j]}\t{s:.6f}\n")


def read_edges(path: Path | str, ids: Sequence[str], threshold: float) -> EdgeList:
    index = {db_id: k for k, db_id in enumerate(ids)}
    src, dst, sim = [], [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            a, b, s = line.rstrip("\n").split("\t")
            src.append(index[a])
            dst.append(index[b])
            sim.append(float(s))
    return EdgeList(
        src=np.array(src, dtype=np.int64),
        dst=np.array(dst, dtype=np.int64),
        sim=np.array(sim, dtype=np.float64),
        threshold=threshold,
    )
