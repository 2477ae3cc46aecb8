import numpy as np
import pytest


def random_state(rng, n):
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return v / np.linalg.norm(v)


def random_hermitian(rng, n, traceless=False):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    h = 0.5 * (a + a.conj().T)
    if traceless:
        h -= np.trace(h) / n * np.eye(n)
    return h


@pytest.fixture
def rng():
    return np.random.default_rng(20051104)
