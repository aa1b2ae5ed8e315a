import numpy as np
import pytest

from cubist import optimize_ancilla


@pytest.fixture(scope="session")
def optimum_cache():
    """Memoized ancilla optima; several modules assert against the same runs."""
    cache = {}

    def get(n: int):
        if n not in cache:
            cache[n] = optimize_ancilla(n)
        return cache[n]

    return get


@pytest.fixture()
def rng():
    return np.random.default_rng(20260810)


def random_state(rng, dims):
    amps = rng.normal(size=dims) + 1j * rng.normal(size=dims)
    return amps / np.linalg.norm(amps)
