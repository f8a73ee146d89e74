import numpy as np
import pytest

from lowrank_mvr.linalg import Coefficients
from lowrank_mvr.models import Dataset, LossModel

ACCEPTANCE_LINES = []


def random_instance(rng, kind="ordinary", m=None, q=None, p=None, n=None, r=None, alpha=1.0):
    """Small random dataset plus a random coefficient point."""
    m = m or int(rng.integers(2, 7))
    q = q or int(rng.integers(2, 7))
    p = p or int(rng.integers(1, 4))
    n = n or int(rng.integers(5, 30))
    X = rng.standard_normal((n, m, q))
    Z = rng.standard_normal((n, p))
    if kind == "logistic":
        y = (rng.random(n) < 0.5).astype(float)
        model = LossModel.logistic()
    else:
        y = 2.0 * rng.standard_normal(n)
        model = LossModel.robust(alpha) if kind == "robust" else LossModel.ordinary()
    C = 0.3 * rng.standard_normal((m, q))
    if r is not None:
        C = 0.3 * rng.standard_normal((m, r)) @ rng.standard_normal((r, q))
    coeff = Coefficients(C, 0.3 * rng.standard_normal(p))
    return Dataset(X, Z, y, model), coeff


@pytest.fixture
def rng():
    return np.random.default_rng(20261018)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
