"""Contrastive fine-tuning of an abstract encoder, corpus embedding,
held-out pair evaluation, and embedding-space clustering."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import torch

from .encoder import HashEncoder, featurize
from .formats import write_embedding_store


@dataclass
class TrainerConfig:
    temperature: float = 0.05
    negatives_k: int = 6
    learning_rate: float = 0.01
    epochs: int = 10
    batch_size: int = 32
    seed: int = 0
    dim: int = 64
    n_buckets: int = 2048

    def validate(self) -> None:
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.negatives_k < 0:
            raise ValueError("negatives_k must be nonnegative")


def _cosine(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    na = a.norm(dim=-1)
    nb = b.norm(dim=-1)
    if torch.any(na == 0) or torch.any(nb == 0):
        raise ValueError("cosine similarity of a zero vector is undefined")
    return (a * b).sum(dim=-1) / (na * nb)


def infonce_loss(
    e_a: torch.Tensor,
    e_b: torch.Tensor,
    negatives: Optional[torch.Tensor],
    temperature: float,
) -> torch.Tensor:
    """Temperature-scaled softmax contrastive loss of the anchor against its
    positive and k negatives; 0 when there are no negatives."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    sim_pos = _cosine(e_a, e_b) / temperature
    if negatives is None or len(negatives) == 0:
        return torch.zeros((), dtype=e_a.dtype)
    sim_neg = _cosine(e_a.unsqueeze(0), negatives) / temperature
    logits = torch.cat([sim_pos.reshape(1), sim_neg])
    return torch.logsumexp(logits, dim=0) - sim_pos


def gradient_check(temperature: float = 0.05, seed: int = 0, h: float = 1e-5) -> float:
    """Max relative error of the analytic loss gradient against central
    finite differences on a frozen toy batch."""
    rng = np.random.default_rng(seed)
    e_a = torch.tensor(rng.normal(size=4), dtype=torch.float64, requires_grad=True)
    e_b = torch.tensor(rng.normal(size=4), dtype=torch.float64, requires_grad=True)
    e_n = torch.tensor(rng.normal(size=(3, 4)), dtype=torch.float64, requires_grad=True)
    loss = infonce_loss(e_a, e_b, e_n, temperature)
    loss.backward()

    analytic, numeric = [], []
    for tensor in (e_a, e_b, e_n):
        flat = tensor.detach().reshape(-1)
        grad = tensor.grad.reshape(-1)
        for i in range(len(flat)):
            original = flat[i].item()
            flat[i] = original + h
            plus = infonce_loss(
                e_a.detach(), e_b.detach(), e_n.detach(), temperature
            ).item()
            flat[i] = original - h
            minus = infonce_loss(
                e_a.detach(), e_b.detach(), e_n.detach(), temperature
            ).item()
            flat[i] = original
            analytic.append(grad[i].item())
            numeric.append((plus - minus) / (2 * h))
    analytic = np.array(analytic)
    numeric = np.array(numeric)
    return float(
        np.linalg.norm(numeric - analytic)
        / max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
    )


@dataclass
class TrainResult:
    model: HashEncoder
    loss_curve: list = field(default_factory=list)  # per-epoch mean loss


def finetune(
    triplets: Sequence[tuple[str, str, tuple[str, ...]]],
    abstracts: dict[str, str],
    config: TrainerConfig,
) -> TrainResult:
    """Fine-tune the encoder on (anchor, positive, negatives) triplets.

    The analytic gradient is validated against finite differences before any
    training step; a non-finite batch loss aborts with the offending anchors.
    """
    config.validate()
    error = gradient_check(config.temperature, seed=config.seed)
    if error >= 1e-4:
        raise RuntimeError(f"gradient check failed: relative error {error:.2e}")

    torch.manual_seed(config.seed)
    model = HashEncoder(dim=config.dim, n_buckets=config.n_buckets, seed=config.seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    features = {
        db_id: featurize([text], config.n_buckets)[0]
        for db_id, text in abstracts.items()
    }
    for anchor, positive, negatives in triplets:
        for db_id in (anchor, positive, *negatives):
            if db_id not in features:
                raise KeyError(f"triplet references unknown database {db_id}")

    rng = np.random.default_rng(config.seed)
    order = np.arange(len(triplets))
    curve = []
    for _ in range(config.epochs):
        rng.shuffle(order)
        epoch_losses = []
        for start in range(0, len(order), config.batch_size):
            batch = [triplets[i] for i in order[start:start + config.batch_size]]
            optimizer.zero_grad()
            losses = []
            for anchor, positive, negatives in batch:
                e_a = model(features[anchor])
                e_b = model(features[positive])
                e_n = model(torch.stack([features[n] for n in negatives]))
                losses.append(
                    infonce_loss(e_a, e_b, e_n, config.temperature)
                )
            loss = torch.stack(losses).mean()
            if not torch.isfinite(loss):
                anchors = [t[0] for t in batch]
                raise RuntimeError(f"non-finite loss on batch anchors {anchors}")
            loss.backward()
            optimizer.step()
            epoch_losses.append(loss.item())
        curve.append(float(np.mean(epoch_losses)))
    return TrainResult(model=model, loss_curve=curve)


def embed_corpus(
    model: HashEncoder, abstracts: dict[str, str], prefix: Path | str
) -> list[str]:
    """Embed every abstract and write the pipeline's binary store format."""
    ids = sorted(abstracts)
    data = model.encode_numpy([abstracts[i] for i in ids])
    write_embedding_store(ids, data, prefix)
    return ids


# -- evaluation --------------------------------------------------------------

def _rank_metrics(scores: np.ndarray, labels: np.ndarray, threshold: float) -> dict:
    """AUC (rank statistic, ties at half credit) and positive-class P/R/F1
    at `score >= threshold`."""
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("evaluation needs both classes")
    neg = np.sort(scores[labels == 0])
    pos = scores[labels == 1]
    below = np.searchsorted(neg, pos, side="left")
    ties = np.searchsorted(neg, pos, side="right") - below
    auc = float((below + 0.5 * ties).sum() / (n_pos * n_neg))
    predicted = scores >= threshold
    tp = int(np.sum(predicted & (labels == 1)))
    fp = int(np.sum(predicted & (labels == 0)))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / n_pos
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {"auc": auc, "precision": precision, "recall": recall, "f1": f1}


def _roc_points(scores: np.ndarray, labels: np.ndarray) -> list[tuple[float, float]]:
    order = np.argsort(-scores)
    labels = labels[order]
    n_pos = max(int(labels.sum()), 1)
    n_neg = max(len(labels) - int(labels.sum()), 1)
    tp = np.cumsum(labels)
    fp = np.cumsum(1 - labels)
    points = [(0.0, 0.0)]
    points += [(fp[i] / n_neg, tp[i] / n_pos) for i in range(len(labels))]
    return points


def evaluate_model(
    model: HashEncoder,
    abstracts: dict[str, str],
    positives: Sequence[tuple[str, str]],
    negatives_k: int = 6,
    threshold: float = 0.5,
    seeds: Sequence[int] = (0, 1, 2, 3, 4),
) -> dict:
    """Score held-out pairs over several seeded 1:k pos/neg test sets.

    Returns mean and standard deviation per metric plus ROC points for the
    first seed's test set.
    """
    ids = sorted(abstracts)
    vectors = dict(zip(ids, model.encode_numpy([abstracts[i] for i in ids])))
    positive_set = {tuple(sorted(p)) for p in positives}

    per_seed = []
    roc = None
    for seed in seeds:
        rng = np.random.default_rng(seed)
        scores, labels = [], []
        for a, b in positives:
            scores.append(float(np.dot(vectors[a], vectors[b])))
            labels.append(1)
            drawn = 0
            while drawn < negatives_k:
                c, d = rng.choice(ids, size=2, replace=False)
                if tuple(sorted((c, d))) in positive_set:
                    continue
                scores.append(float(np.dot(vectors[c], vectors[d])))
                labels.append(0)
                drawn += 1
        scores = np.array(scores)
        labels = np.array(labels)
        per_seed.append(_rank_metrics(scores, labels, threshold))
        if roc is None:
            roc = _roc_points(scores, labels)

    summary = {}
    for key in per_seed[0]:
        values = [m[key] for m in per_seed]
        summary[f"{key}_mean"] = float(np.mean(values))
        summary[f"{key}_std"] = float(np.std(values))
    summary["roc_points"] = roc
    summary["per_seed"] = per_seed
    return summary


# -- clustering --------------------------------------------------------------

def cluster_embeddings(
    ids: Sequence[str],
    data: np.ndarray,
    seed: int = 0,
    min_cluster_size: int = 5,
    perplexity: float = 30.0,
    plot_path: Optional[Path | str] = None,
) -> dict[str, int]:
    """Two-dimensional projection plus density clustering of the embedding
    rows; returns a label per database id (-1 marks noise)."""
    from sklearn.cluster import HDBSCAN
    from sklearn.manifold import TSNE

    data = np.asarray(data, dtype=np.float64)
    if len(ids) != len(data):
        raise ValueError("id/data length mismatch")
    if len(ids) < 10:
        raise ValueError("clustering needs at least 10 databases")
    if np.allclose(data, data[0]):
        warnings.warn("all embeddings identical; emitting a single cluster")
        return {db_id: 0 for db_id in ids}

    perplexity = min(perplexity, (len(ids) - 1) / 3)
    projection = TSNE(
        n_components=2, random_state=seed, perplexity=perplexity, init="pca"
    ).fit_transform(data)
    labels = HDBSCAN(min_cluster_size=min_cluster_size).fit_predict(projection)

    if plot_path is not None:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(6, 5))
        scatter = ax.scatter(
            projection[:, 0], projection[:, 1], c=labels, cmap="tab10", s=12
        )
        ax.set_title("embedding projection")
        fig.colorbar(scatter, ax=ax, label="cluster")
        fig.savefig(plot_path, dpi=120)
        plt.close(fig)
    return {db_id: int(label) for db_id, label in zip(ids, labels)}
