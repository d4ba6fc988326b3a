import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for `oracles`

DATA_DIR = Path(__file__).parent / "data"
SMOKE_DIR = DATA_DIR / "smoke"


@pytest.fixture(scope="session")
def smoke_paths():
    return {
        "corpus": SMOKE_DIR / "corpus",
        "queries": SMOKE_DIR / "queries.tsv",
        "qrels": SMOKE_DIR / "qrels.txt",
        "embeddings": SMOKE_DIR / "embeddings.txt",
    }


@pytest.fixture(scope="session")
def smoke_index(smoke_paths, tmp_path_factory):
    """Smoke corpus indexed once for the whole session."""
    from tilerank.cli import main

    out = tmp_path_factory.mktemp("smoke_index")
    rc = main(["index", "--corpus", str(smoke_paths["corpus"]), "--out", str(out)])
    assert rc == 0
    return out


@pytest.fixture(scope="session")
def smoke_data(smoke_paths, smoke_index):
    """Parsed smoke corpus artifacts shared across tests."""
    from tilerank.cli import _load_index
    from tilerank.corpus import load_embeddings, parse_qrels, parse_queries
    from tilerank.segmentation import load_default_stopwords

    stopwords = load_default_stopwords()
    docs, stats, header = _load_index(smoke_index)
    return {
        "docs": docs,
        "stats": stats,
        "header": header,
        "stopwords": stopwords,
        "queries": dict(parse_queries(smoke_paths["queries"], stopwords)),
        "qrels": parse_qrels(smoke_paths["qrels"]),
        "embeddings": load_embeddings(smoke_paths["embeddings"]),
    }
