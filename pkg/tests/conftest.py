import warnings

import numpy as np
import pytest

from cutofflab.chain_core import build_chain
from cutofflab.model_zoo import ModelSpec, build_model


def random_chain(rng, n, density=0.6, reversible=False):
    """Irreducible chain on n states: a cycle backbone plus random extra edges."""
    w = rng.random((n, n)) * (rng.random((n, n)) < density)
    idx = np.arange(n)
    w[idx, (idx + 1) % n] += 0.3 + rng.random(n)
    if reversible:
        w = w + w.T
    w[idx, idx] += rng.random(n) * 0.5
    return build_chain(w / w.sum(axis=1, keepdims=True))


def random_density(rng, chain):
    f = rng.exponential(size=chain.n)
    return f / (chain.pi @ f)


def model(kind, **params):
    return build_model(ModelSpec(kind, params))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(autouse=True)
def _quiet_budget_warnings():
    from cutofflab.errors import BudgetExhausted

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BudgetExhausted)
        yield


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "SUMMARY", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(lines):
        terminalreporter.write_line(lines[k])
