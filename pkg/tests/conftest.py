"""Shared fixtures: the synthetic benchmark corpus and a trained assessor.

The expensive pieces (200-transcript fixture corpus, one 200-epoch training
run on its first half) are session-scoped; acceptance tests that must time
or re-run training build their own instances instead.
"""

from pathlib import Path

import pytest

from ekicl.assessor import TrainConfig, train
from ekicl.embeddings import make_synthetic_corpus
from ekicl.pipeline import prepare

FIXTURES = Path(__file__).parent / "fixtures"

# Split layout shared by pipeline, CLI, and acceptance tests: the first
# half of the fixture is the demonstration pool / training split, the next
# quarter is the evaluation split.
POOL_SLICE = slice(0, 100)
EVAL_SLICE = slice(100, 150)


@pytest.fixture(scope="session")
def fixture_corpus():
    return make_synthetic_corpus()  # 200 transcripts, D=16, seed 7


@pytest.fixture(scope="session")
def trained_params(fixture_corpus):
    return train(fixture_corpus[POOL_SLICE], TrainConfig(seed=7)).params


@pytest.fixture(scope="session")
def prepared_pool(fixture_corpus, trained_params):
    return prepare(fixture_corpus[POOL_SLICE], trained_params)


@pytest.fixture(scope="session")
def prepared_eval(fixture_corpus, trained_params):
    return prepare(fixture_corpus[EVAL_SLICE], trained_params)


@pytest.fixture(scope="session")
def tiny_corpus():
    return make_synthetic_corpus(
        n_transcripts=24, dim=8, seed=3, min_len=6, max_len=12
    )
