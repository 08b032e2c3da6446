from __future__ import annotations

from pathlib import Path

import pytest

from codecorpus import bpe
from corpusgen import make_corpus

FIXTURES = Path(__file__).resolve().parent / "fixtures"

CORPUS_SEED = 20240809
CORPUS_SIZE = 520


@pytest.fixture(scope="session")
def fixture_corpus():
    """Deterministic parseable corpus used by property sweeps."""
    return make_corpus(CORPUS_SIZE, seed=CORPUS_SEED)


@pytest.fixture(scope="session")
def vocab_paths() -> tuple[str, str]:
    return (str(FIXTURES / "bpe" / "vocab.json"), str(FIXTURES / "bpe" / "merges.txt"))


@pytest.fixture(scope="session")
def vocab(vocab_paths) -> bpe.BpeVocabulary:
    return bpe.load_vocabulary(*vocab_paths)


@pytest.fixture(scope="session")
def raw_listing() -> str:
    return (FIXTURES / "imagehash_raw.py").read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def comment_free_golden() -> str:
    return (FIXTURES / "imagehash_comment_free.py").read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def randomized_golden() -> str:
    return (FIXTURES / "imagehash_randomized_seed7.py").read_text(encoding="utf-8")
