import numpy as np
import pytest
from scipy.special import expit

from estimandkit import Dataset, table1


@pytest.fixture
def t1():
    """Example-table observed data, potential outcomes and true scores."""
    return table1()


def random_dataset(rng, n=80, p=2, strength=1.0, outcome=True):
    """Logistic-treatment dataset with both groups present."""
    while True:
        x = rng.normal(size=(n, p))
        beta = rng.normal(scale=strength, size=p)
        t = (rng.random(n) < expit(x @ beta)).astype(float)
        if 2 <= t.sum() <= n - 2:
            break
    y = x.sum(axis=1) + 2 * t + rng.normal(size=n) if outcome else None
    return Dataset(x, t, tuple(f"x{j}" for j in range(p)), y)


def random_scores_instance(rng, nt, nc):
    """Treatment vector (treated first) plus distinct scores in (0.05, 0.95)."""
    t = np.r_[np.ones(nt), np.zeros(nc)]
    e = rng.uniform(0.05, 0.95, nt + nc)
    x = np.log(e / (1 - e))[:, None]
    return Dataset(x, t, ("x",)), e
