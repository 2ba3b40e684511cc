import numpy as np
import pytest


def make_toy_corpus(n_topics=3, per_topic=20, seed=0):
    """Synthetic abstracts in distinct topical vocabularies.

    Returns (abstracts, topic_of) where ids look like `db_t1_07` and each
    topic draws its column names and sample values from its own word pool.
    """
    rng = np.random.default_rng(seed)
    abstracts = {}
    topic_of = {}
    for t in range(n_topics):
        vocab = [f"topic{t}word{i}" for i in range(30)]
        for i in range(per_topic):
            db_id = f"db_t{t}_{i:02d}"
            lines = [f"Database: {db_id}"]
            for table in range(2):
                lines.append(f"Table: {rng.choice(vocab)}_{table}")
                for _ in range(3):
                    column = rng.choice(vocab)
                    samples = " | ".join(rng.choice(vocab, size=3))
                    lines.append(f"- Column: {column} ; Samples: {samples}")
            abstracts[db_id] = "\n".join(lines) + "\n"
            topic_of[db_id] = t
    return abstracts, topic_of


def make_triplets(topic_of, ids, k=6, seed=0):
    """One triplet per (anchor, cyclic next same-topic positive)."""
    rng = np.random.default_rng(seed)
    by_topic = {}
    for db_id in ids:
        by_topic.setdefault(topic_of[db_id], []).append(db_id)
    triplets = []
    for topic, members in sorted(by_topic.items()):
        members = sorted(members)
        others = sorted(i for i in ids if topic_of[i] != topic)
        for pos, anchor in enumerate(members):
            positive = members[(pos + 1) % len(members)]
            negatives = tuple(rng.choice(others, size=k, replace=False))
            triplets.append((anchor, positive, negatives))
    return triplets


@pytest.fixture(scope="session")
def toy_corpus():
    return make_toy_corpus()


@pytest.fixture(scope="session")
def toy_triplets(toy_corpus):
    abstracts, topic_of = toy_corpus
    return make_triplets(topic_of, sorted(abstracts), k=6, seed=1)


@pytest.fixture(scope="session")
def trained(toy_corpus, toy_triplets):
    from dbgraph_companion.trainer import TrainerConfig, finetune

    abstracts, _ = toy_corpus
    config = TrainerConfig(epochs=5, seed=0, dim=32, learning_rate=0.05)
    return finetune(toy_triplets, abstracts, config)
