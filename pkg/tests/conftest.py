import numpy as np
import pytest

from balm import Architecture, Window, init_params


@pytest.fixture
def arch():
    return Architecture()


@pytest.fixture
def params(arch):
    return init_params(arch, seed=13)


def make_windows(n, seed=0, length=32, labeled=True):
    rng = np.random.default_rng(seed)
    return [
        Window(
            f"w{i:05d}",
            rng.normal(size=(2, length)),
            int(rng.integers(2)) if labeled else None,
        )
        for i in range(n)
    ]
