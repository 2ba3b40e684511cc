"""Explicit positive pairs from shared topic identifiers, leakage-free
splits, training triplets, and similarity scoring metrics."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .corpus import Corpus

SPLITS = ("train", "val", "test")


@dataclass
class PairSet:
    positives: list[tuple[str, str]]  # (id_lo, id_hi), lexicographic
    universe: list[str]
    tids: dict[str, Optional[str]] = field(default_factory=dict)


@dataclass
class SplitAssignment:
    split: dict[str, str]  # db_id -> train|val|test

    def members(self, name: str) -> list[str]:
        return sorted(i for i, s in self.split.items() if s == name)


@dataclass(frozen=True)
class Triplet:
    anchor: str
    positive: str
    negatives: tuple[str, ...]


@dataclass(frozen=True)
class ScoreMetrics:
    auc_roc: float
    f1: float
    precision: float
    recall: float


def extract_explicit_pairs(corpus: Corpus) -> PairSet:
    """All unordered distinct-database pairs sharing a non-null TID."""
    tids = {db.db_id: db.tid for db in corpus.databases}
    by_tid: dict[str, list[str]] = {}
    for db_id in sorted(tids):
        tid = tids[db_id]
        if tid is not None:
            by_tid.setdefault(tid, []).append(db_id)
    positives = []
    for tid in sorted(by_tid):
        ids = by_tid[tid]
        for i in range(len(ids)):
            for j in range(i + 1, len(ids)):
                positives.append((ids[i], ids[j]))
    positives.sort()
    return PairSet(positives=positives, universe=sorted(tids), tids=tids)


def _tid_groups(pairs: PairSet) -> list[list[str]]:
    """Connected groups of databases linked by positive pairs; everything
    else is a singleton group."""
    parent = {i: i for i in pairs.universe}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in pairs.positives:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra
    groups: dict[str, list[str]] = {}
    for i in pairs.universe:
        groups.setdefault(find(i), []).append(i)
    return [sorted(g) for g in groups.values()]


def split_pairs(
    pairs: PairSet, ratios: Sequence[float] = (7, 1, 2), seed: int = 0
) -> SplitAssignment:
    """Assign TID-connected groups atomically to train/val/test.

    Greedy fill toward the ratio targets in descending group size; ties in
    size broken by a seeded shuffle. Deterministic for a fixed seed.
    """
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValueError("ratios must be three positive numbers")
    groups = _tid_groups(pairs)
    if len(groups) < len(SPLITS):
        raise ValueError(f"need at least {len(SPLITS)} groups, got {len(groups)}")

    rng = np.random.default_rng(seed)
    order = rng.permutation(len(groups))
    shuffled = [groups[i] for i in order]
    shuffled.sort(key=len, reverse=True)  # stable: shuffle breaks size ties

    total = len(pairs.universe)
    targets = [total * r / sum(ratios) for r in ratios]
    filled = [0.0, 0.0, 0.0]
    assignment: dict[str, str] = {}
    for group in shuffled:
        deficits = [targets[s] - filled[s] for s in range(3)]
        s = int(np.argmax(deficits))
        for db_id in group:
            assignment[db_id] = SPLITS[s]
        filled[s] += len(group)
    return SplitAssignment(split=assignment)


def sample_triplets(
    pairs: PairSet, split: SplitAssignment, k: int, seed: int = 0
) -> list[Triplet]:
    """One triplet per ordered train positive pair; negatives sampled
    uniformly without replacement from train databases whose TID is present
    and differs from the anchor's.

    Per-anchor generators (seed xor anchor index) keep sampling order
    independent of pair iteration order.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    train = set(split.members("train"))
    if not train:
        raise ValueError("train split is empty")
    anchor_index = {db_id: i for i, db_id in enumerate(sorted(pairs.universe))}
    train_with_tid = sorted(i for i in train if pairs.tids.get(i) is not None)

    triplets: list[Triplet] = []
    ordered = []
    for a, b in pairs.positives:
        if a in train and b in train:
            ordered.append((a, b))
            ordered.append((b, a))
    for anchor, positive in sorted(ordered):
        anchor_tid = pairs.tids.get(anchor)
        pool = [i for i in train_with_tid if pairs.tids[i] != anchor_tid]
        if len(pool) < k:
            raise ValueError(
                f"anchor {anchor}: only {len(pool)} eligible negatives, need {k}"
            )
        rng = np.random.default_rng(seed ^ anchor_index[anchor])
        chosen = rng.choice(len(pool), size=k, replace=False)
        triplets.append(
            Triplet(anchor=anchor, positive=positive,
                    negatives=tuple(pool[c] for c in chosen))
        )
    return triplets


def evaluate_scores(
    scored_pairs: Sequence[tuple[float, str]], threshold: float = 0.5
) -> ScoreMetrics:
    """Score similarity predictions against pos/neg labels.

    AUC-ROC is the Mann-Whitney rank statistic (ties count 1/2); precision,
    recall and F1 are of the positive class at ``similarity >= threshold``.
    """
    scores = np.array([s for s, _ in scored_pairs], dtype=np.float64)
    labels = np.array([1 if lab == "pos" else 0 for _, lab in scored_pairs])
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("evaluate_scores needs at least one positive and one negative")

    pos = np.sort(scores[labels == 1])
    neg = np.sort(scores[labels == 0])
    # for each positive score: #neg strictly below + half of ties
    below = np.searchsorted(neg, pos, side="left")
    ties = np.searchsorted(neg, pos, side="right") - below
    auc = float((below + 0.5 * ties).sum() / (n_pos * n_neg))

    predicted = scores >= threshold
    tp = int(np.sum(predicted & (labels == 1)))
    fp = int(np.sum(predicted & (labels == 0)))
    fn = n_pos - tp
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = (
        2 * precision * recall / (precision + recall)
        if precision + recall > 0
        else 0.0
    )
    return ScoreMetrics(auc_roc=auc, f1=f1, precision=precision, recall=recall)


# -- line-oriented serialization consumed by the trainer companion ----------

def write_splits(split: SplitAssignment, path: Path | str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for db_id in sorted(split.split):
            fh.write(f"{db_id}\t{split.split[db_id]}\n")


def read_splits(path: Path | str) -> SplitAssignment:
    assignment = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            db_id, name = line.rstrip("\n").split("\t")
            assignment[db_id] = name
    return SplitAssignment(split=assignment)


def write_triplets(triplets: Sequence[Triplet], path: Path | str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in triplets:
            fh.write(f"{t.anchor}\t{t.positive}\t{','.join(t.negatives)}\n")


def read_triplets(path: Path | str) -> list[Triplet]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            anchor, positive, negs = line.rstrip("\n").split("\t")
            out.append(Triplet(anchor, positive, tuple(negs.split(","))))
    return out


def write_pairs(pairs: PairSet, path: Path | str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for a, b in pairs.positives:
            fh.write(f"{a}\t{b}\n")
