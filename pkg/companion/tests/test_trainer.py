import math

import numpy as np
import pytest
import torch

from dbgraph_companion.encoder import HashEncoder, featurize
from dbgraph_companion.formats import read_embedding_store
from dbgraph_companion.trainer import (
    TrainerConfig,
    cluster_embeddings,
    embed_corpus,
    evaluate_model,
    finetune,
    gradient_check,
    infonce_loss,
    _rank_metrics,
)


def vec(*values):
    return torch.tensor(values, dtype=torch.float64)


class TestInfoNCE:
    def test_uniform_similarity_gives_log_k_plus_one(self):
        # anchor orthogonal to positive and all negatives: every sim is 0
        a = vec(1.0, 0.0)
        b = vec(0.0, 1.0)
        negatives = torch.stack([vec(0.0, 1.0)] * 6)
        loss = infonce_loss(a, b, negatives, temperature=0.05)
        assert loss.item() == pytest.approx(math.log(7), abs=1e-9)

    def test_no_negatives_gives_zero(self):
        assert infonce_loss(vec(1.0, 0.0), vec(0.0, 1.0), None, 0.05).item() == 0.0

    def test_hand_value(self):
        a = vec(1.0, 0.0)
        b = vec(1.0, 0.0)
        negatives = torch.stack([vec(-1.0, 0.0)] * 2)
        expected = math.log(math.exp(2) + 2 * math.exp(-2)) - 2
        loss = infonce_loss(a, b, negatives, temperature=0.5)
        assert loss.item() == pytest.approx(expected, abs=1e-9)
        assert expected == pytest.approx(0.035976, abs=1e-6)

    def test_decreasing_in_positive_similarity(self):
        negatives = torch.stack([vec(0.0, 1.0)] * 3)
        previous = None
        for angle in (1.5, 1.0, 0.5, 0.1):
            b = vec(math.cos(angle), math.sin(angle))
            loss = infonce_loss(vec(1.0, 0.0), b, negatives, 0.1).item()
            if previous is not None:
                assert loss < previous
            previous = loss

    def test_nonnegative(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            a = torch.tensor(rng.normal(size=4))
            b = torch.tensor(rng.normal(size=4))
            n = torch.tensor(rng.normal(size=(4, 4)))
            assert infonce_loss(a, b, n, 0.05).item() >= 0.0

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError, match="zero vector"):
            infonce_loss(vec(0.0, 0.0), vec(1.0, 0.0), None, 0.05)

    def test_bad_temperature(self):
        with pytest.raises(ValueError, match="temperature"):
            infonce_loss(vec(1.0, 0.0), vec(0.0, 1.0), None, 0.0)


class TestGradients:
    def test_finite_difference_agreement(self):
        assert gradient_check(temperature=0.05) < 1e-4
        assert gradient_check(temperature=0.5, seed=7) < 1e-4


class TestFinetune:
    def test_loss_decreases(self, trained):
        assert trained.loss_curve[-1] < trained.loss_curve[0]

    def test_frozen_lr_flat(self, toy_corpus, toy_triplets):
        abstracts, _ = toy_corpus
        config = TrainerConfig(epochs=3, learning_rate=0.0, seed=0, dim=16,
                               batch_size=30)
        result = finetune(toy_triplets[:60], abstracts, config)
        # batch order reshuffles between epochs; only float accumulation
        # order changes, so the per-epoch means agree to rounding noise
        assert max(result.loss_curve) - min(result.loss_curve) < 1e-6

    def test_unknown_database_rejected(self, toy_corpus):
        abstracts, _ = toy_corpus
        with pytest.raises(KeyError, match="ghost"):
            finetune([("ghost", "ghost", ("ghost",))], abstracts,
                     TrainerConfig(epochs=1))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainerConfig(temperature=0.0).validate()


class TestEmbedCorpus:
    def test_store_roundtrip(self, trained, toy_corpus, tmp_path):
        abstracts, _ = toy_corpus
        ids = embed_corpus(trained.model, abstracts, tmp_path / "emb")
        loaded_ids, data = read_embedding_store(tmp_path / "emb")
        assert loaded_ids == ids == sorted(abstracts)
        norms = np.linalg.norm(data.astype(np.float64), axis=1)
        np.testing.assert_allclose(norms, 1.0, atol=1e-6)

    def test_identical_abstracts_identical_rows(self, trained):
        rows = trained.model.encode_numpy(["Table: x\n", "Table: x\n"])
        np.testing.assert_array_equal(rows[0], rows[1])

    def test_intra_topic_similarity_exceeds_inter(self, trained, toy_corpus):
        abstracts, topic_of = toy_corpus
        ids = sorted(abstracts)
        data = trained.model.encode_numpy([abstracts[i] for i in ids])
        sims = data @ data.T
        intra, inter = [], []
        for i in range(len(ids)):
            for j in range(i + 1, len(ids)):
                (intra if topic_of[ids[i]] == topic_of[ids[j]] else inter).append(
                    sims[i, j]
                )
        assert np.mean(intra) > np.mean(inter)


class TestEvaluate:
    def test_perfect_separation(self):
        scores = np.array([0.9, 0.8, 0.2, 0.1])
        labels = np.array([1, 1, 0, 0])
        assert _rank_metrics(scores, labels, 0.5)["auc"] == 1.0

    def test_single_class_rejected(self):
        with pytest.raises(ValueError, match="both classes"):
            _rank_metrics(np.array([0.5]), np.array([1]), 0.5)

    def test_random_positives_near_chance(self, toy_corpus):
        abstracts, _ = toy_corpus
        model = HashEncoder(dim=16, seed=9)
        ids = sorted(abstracts)
        rng = np.random.default_rng(11)
        positives = []
        while len(positives) < 40:
            a, b = rng.choice(ids, size=2, replace=False)
            positives.append((a, b))
        summary = evaluate_model(model, abstracts, positives, negatives_k=6)
        assert abs(summary["auc_mean"] - 0.5) < 0.1

    def test_roc_points_monotone(self, trained, toy_corpus):
        abstracts, topic_of = toy_corpus
        ids = sorted(abstracts)
        positives = [
            (a, b)
            for i, a in enumerate(ids)
            for b in ids[i + 1:]
            if topic_of[a] == topic_of[b]
        ][:30]
        summary = evaluate_model(trained.model, abstracts, positives)
        points = summary["roc_points"]
        assert points[0] == (0.0, 0.0)
        assert points[-1] == (1.0, 1.0)
        assert all(p2 >= p1 for (p1, _), (p2, _) in zip(points, points[1:]))


class TestCluster:
    def blob_data(self, seed=0):
        rng = np.random.default_rng(seed)
        centers = np.eye(3) * 10
        rows, ids = [], []
        for c in range(3):
            for i in range(15):
                rows.append(centers[c] + 0.1 * rng.normal(size=3))
                ids.append(f"db{c}_{i}")
        return ids, np.array(rows)

    def test_three_blobs_three_clusters(self):
        ids, data = self.blob_data()
        for seed in range(5):
            labels = cluster_embeddings(ids, data, seed=seed, min_cluster_size=5)
            assert len({v for v in labels.values() if v >= 0}) == 3
            assert all(v >= 0 for v in labels.values())  # no noise mislabels

    def test_identical_embeddings_single_cluster(self):
        ids = [f"db{i}" for i in range(12)]
        data = np.ones((12, 4))
        with pytest.warns(UserWarning, match="identical"):
            labels = cluster_embeddings(ids, data)
        assert set(labels.values()) == {0}

    def test_too_few_databases(self):
        with pytest.raises(ValueError, match="at least 10"):
            cluster_embeddings(["a"], np.ones((1, 3)))
