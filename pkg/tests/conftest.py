import numpy as np
import pytest

from suprec import FieldTag, make_support, sample_gaussian_matrix, substream


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_pair(N, K, overlap, seed=0):
    """Fixed support pair with the requested intersection size."""
    S0 = make_support(range(K), N)
    S1 = make_support(list(range(overlap)) + list(range(K, 2 * K - overlap)), N)
    return S0, S1


def gaussian_instance(M, N, field=FieldTag.REAL, seed=0, label="test-matrix"):
    return sample_gaussian_matrix(M, N, field, substream(seed, label))
