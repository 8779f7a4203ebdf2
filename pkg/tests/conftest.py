"""Shared fixtures."""

import numpy as np
import pytest

from src.config import settings
from src.sketching import make_rng


def _planted_pair(m: int, n1: int, n2: int, k: int, seed: int = 0):
    """X = U A^T, Y = U B^T with a common rank-k left factor."""
    rng = make_rng(seed)
    U = rng.standard_normal((m, k))
    return U @ rng.standard_normal((k, n1)), U @ rng.standard_normal((k, n2))


@pytest.fixture
def planted_pair():
    """Factory for exactly coupled rank-k pairs."""
    return _planted_pair


@pytest.fixture
def rng():
    return make_rng(1234)


@pytest.fixture
def random_pair():
    """Full-rank 40 x 15 and 40 x 25 Gaussian pair."""
    gen = make_rng(99)
    return gen.standard_normal((40, 15)), gen.standard_normal((40, 25))


@pytest.fixture
def single_thread(monkeypatch):
    monkeypatch.setattr(settings, "threads", 1)


def orthonormality_defect(Q: np.ndarray) -> float:
    return float(np.linalg.norm(Q.T @ Q - np.eye(Q.shape[1])))
