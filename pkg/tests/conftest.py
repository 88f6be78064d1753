import numpy as np
import pytest

from gcnlstm.data import generate_synthetic_corpus
from gcnlstm.train import TrainConfig, train_branch

SMALL = dict(d_v=32, d_h=16, d_a=8, d_s=8, lr=3e-3, batch_size=4)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_corpus():
    return generate_synthetic_corpus(12, 4, 32, seed=5)


@pytest.fixture(scope="session")
def branches(small_corpus):
    """A semantic and a spatial branch trained briefly on the same captions."""
    cfg = TrainConfig(max_iters=120, **SMALL)
    return {
        "sem": train_branch(small_corpus, "semantic", cfg).branch,
        "spa": train_branch(small_corpus, "spatial", cfg).branch,
    }
