import json
import shutil
from pathlib import Path

import pytest

from dbgraph.corpus import load_corpus

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def corpus10_root():
    return FIXTURES / "corpus10"


@pytest.fixture(scope="session")
def embeddings10_prefix():
    return FIXTURES / "embeddings10"


@pytest.fixture()
def corpus10(corpus10_root):
    return load_corpus(corpus10_root)


@pytest.fixture()
def corpus_copy(corpus10_root, tmp_path):
    """Mutable copy of the fixture corpus for negative-path tests."""
    dest = tmp_path / "corpus"
    shutil.copytree(corpus10_root, dest)
    return dest


def write_schema(db_dir: Path, descriptor: dict) -> None:
    db_dir.mkdir(parents=True, exist_ok=True)
    with open(db_dir / "schema.json", "w", encoding="utf-8") as fh:
        json.dump(descriptor, fh)
