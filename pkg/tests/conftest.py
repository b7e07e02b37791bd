import numpy as np
import pytest


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20250808)


def henon_x(n: int, a: float = 1.4, b: float = 0.3, transient: int = 1000,
            x0: float = 0.1, y0: float = 0.3) -> np.ndarray:
    x, y = x0, y0
    out = np.empty(n)
    for i in range(n + transient):
        x, y = 1.0 - a * x * x + y, b * x
        if i >= transient:
            out[i - transient] = x
    return out


def logistic_x(n: int, r: float = 4.0, x0: float = 0.34567, transient: int = 100) -> np.ndarray:
    x = x0
    out = np.empty(n)
    for i in range(n + transient):
        x = r * x * (1.0 - x)
        if i >= transient:
            out[i - transient] = x
    return out


@pytest.fixture(scope="session")
def henon_series():
    return henon_x(10_000)


@pytest.fixture(scope="session")
def logistic_series():
    return logistic_x(20_000)
