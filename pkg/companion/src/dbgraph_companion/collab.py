"""Gradient-boosted-tree collaborative-learning experiments.

Two settings over a pair of databases: feature overlap (same columns,
different rows; arms A-only / B-only / Combined) and instance overlap
(shared join key, different feature columns; arms primary-only / enriched).
Each experiment emits accuracy plus weighted precision/recall/F1 per arm and
is deterministic for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pandas as pd
from sklearn.ensemble import GradientBoostingClassifier
from sklearn.metrics import accuracy_score, precision_recall_fscore_support


@dataclass
class ExperimentConfig:
    trees: int = 100
    learning_rate: float = 0.1
    max_depth: int = 6
    test_ratio: float = 0.2
    seed: int = 0

    def validate(self) -> None:
        if not 0 < self.test_ratio < 1:
            raise ValueError("test_ratio must lie in (0, 1)")
        if self.trees < 1 or self.learning_rate <= 0 or self.max_depth < 1:
            raise ValueError("invalid boosting parameters")


def flatten_tables(
    tables: dict[str, pd.DataFrame],
    foreign_keys: Sequence[tuple[str, str, str, str]],
) -> pd.DataFrame:
    """Left-join a multi-table database into one frame.

    Join order is the deterministic foreign-key spanning order rooted at the
    largest table; tables outside the root's FK component are ignored.
    foreign_keys rows are (from_table, from_column, to_table, to_column).
    """
    if not tables:
        raise ValueError("no tables to flatten")
    root = max(sorted(tables), key=lambda name: len(tables[name]))
    frame = tables[root].copy()
    joined = {root}
    adjacency = sorted(foreign_keys)
    changed = True
    while changed:
        changed = False
        for from_t, from_c, to_t, to_c in adjacency:
            if from_t in joined and to_t not in joined:
                other, left_on, right_on = to_t, from_c, to_c
            elif to_t in joined and from_t not in joined:
                other, left_on, right_on = from_t, to_c, from_c
            else:
                continue
            frame = frame.merge(
                tables[other], how="left", left_on=left_on, right_on=right_on,
                suffixes=("", f"_{other}"),
            )
            joined.add(other)
            changed = True
    return frame


def _split_indices(n: int, test_ratio: float, seed: int):
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    n_test = max(1, int(round(n * test_ratio)))
    return np.sort(order[n_test:]), np.sort(order[:n_test])


def _fit(frame: pd.DataFrame, label_column: str, config: ExperimentConfig):
    model = GradientBoostingClassifier(
        n_estimators=config.trees,
        learning_rate=config.learning_rate,
        max_depth=config.max_depth,
        random_state=config.seed,
    )
    features = frame.drop(columns=[label_column])
    model.fit(features.to_numpy(), frame[label_column].to_numpy())
    return model


def _metric_row(model, frame: pd.DataFrame, label_column: str) -> dict:
    features = frame.drop(columns=[label_column]).to_numpy()
    y_true = frame[label_column].to_numpy()
    y_pred = model.predict(features)
    precision, recall, f1, _ = precision_recall_fscore_support(
        y_true, y_pred, average="weighted", zero_division=0
    )
    return {
        "accuracy": float(accuracy_score(y_true, y_pred)),
        "precision": float(precision),
        "recall": float(recall),
        "f1": float(f1),
    }


def feature_overlap_experiment(
    frame_a: pd.DataFrame,
    frame_b: pd.DataFrame,
    label_column: str,
    config: ExperimentConfig = ExperimentConfig(),
) -> list[dict]:
    """Train on A-only, B-only and the row concatenation; evaluate every arm
    on both held-out test sets."""
    config.validate()
    for name, frame in (("A", frame_a), ("B", frame_b)):
        if label_column not in frame.columns:
            raise ValueError(f"label column {label_column!r} missing from {name}")
    diff = set(frame_a.columns) ^ set(frame_b.columns)
    if diff:
        raise ValueError(f"column sets differ: {sorted(diff)}")
    frame_b = frame_b[frame_a.columns]  # align order

    # one seed for both sides keeps the splits index-aligned across arms
    train_a, test_a = _split_indices(len(frame_a), config.test_ratio, config.seed)
    train_b, test_b = _split_indices(len(frame_b), config.test_ratio, config.seed)
    parts = {
        "A": (frame_a.iloc[train_a], frame_a.iloc[test_a]),
        "B": (frame_b.iloc[train_b], frame_b.iloc[test_b]),
    }
    combined_train = pd.concat(
        [parts["A"][0], parts["B"][0]], ignore_index=True
    )
    arms = {
        "A": parts["A"][0],
        "B": parts["B"][0],
        "Combined": combined_train,
    }
    rows = []
    for arm_name, train_frame in arms.items():
        model = _fit(train_frame, label_column, config)
        for test_name in ("A", "B"):
            row = {"train": arm_name, "test": test_name}
            row.update(_metric_row(model, parts[test_name][1], label_column))
            rows.append(row)
    return rows


def instance_overlap_experiment(
    primary: pd.DataFrame,
    secondary: pd.DataFrame,
    join_key: str,
    label_column: str,
    config: ExperimentConfig = ExperimentConfig(),
) -> list[dict]:
    """Compare primary-only features against the left-join with the
    secondary database, over one shared train/test index split."""
    config.validate()
    for name, frame, column in (
        ("primary", primary, join_key),
        ("secondary", secondary, join_key),
        ("primary", primary, label_column),
    ):
        if column not in frame.columns:
            raise ValueError(f"column {column!r} missing from {name}")
    overlap = len(set(primary[join_key]) & set(secondary[join_key]))
    if overlap == 0:
        raise ValueError("join key intersection is empty (0 shared keys)")

    enriched = primary.merge(secondary, how="left", on=join_key,
                             suffixes=("", "_secondary")).fillna(0.0)
    train_idx, test_idx = _split_indices(len(primary), config.test_ratio, config.seed)

    rows = []
    for arm_name, frame in (("Primary", primary), ("Combined", enriched)):
        frame = frame.drop(columns=[join_key])
        model = _fit(frame.iloc[train_idx], label_column, config)
        row = {"train": arm_name, "test": "Primary"}
        row.update(_metric_row(model, frame.iloc[test_idx], label_column))
        rows.append(row)
    return rows


# -- synthetic correlated fixtures -------------------------------------------

def make_feature_overlap_pair(
    seed: int = 0,
    rows_a: int = 300,
    rows_b: int = 500,
    n_classes: int = 6,
    n_features: int = 8,
) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Two databases drawn from one generative process: same columns,
    disjoint rows."""
    rng = np.random.default_rng(seed)
    centers = rng.normal(scale=2.0, size=(n_classes, n_features))

    def draw(n_rows):
        labels = rng.integers(0, n_classes, size=n_rows)
        values = centers[labels] + rng.normal(size=(n_rows, n_features))
        frame = pd.DataFrame(values, columns=[f"f{i}" for i in range(n_features)])
        frame["label"] = labels
        return frame

    return draw(rows_a), draw(rows_b)


def make_instance_overlap_pair(
    seed: int = 0, n_rows: int = 400
) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Primary holds the label and weak features; the secondary shares the
    key and holds the feature the label actually depends on."""
    rng = np.random.default_rng(seed)
    keys = np.arange(n_rows)
    informative = rng.normal(size=n_rows)
    label = (informative + 0.3 * rng.normal(size=n_rows) > 0).astype(int)
    primary = pd.DataFrame({
        "key": keys,
        "p0": 0.1 * label + rng.normal(size=n_rows),
        "p1": rng.normal(size=n_rows),
        "label": label,
    })
    secondary = pd.DataFrame({
        "key": keys,
        "s0": informative,
        "s1": rng.normal(size=n_rows),
    })
    return primary, secondary
