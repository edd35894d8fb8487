import math

import numpy as np
import pytest

from cutofflab.chain_core import build_chain
from cutofflab.verify import (
    CheckResult,
    _phi_chain,
    _phi_sqrt,
    _result,
    battery_passed,
    prepare,
    rho_certified,
    run_battery,
)

from conftest import model


def test_phi_functions_are_continuous_at_zero():
    assert _phi_sqrt(0.0) == 4.0
    assert _phi_sqrt(1e-6) == pytest.approx(4.0, rel=1e-6)
    assert _phi_chain(0.0) == 1.0
    for r in (1e-7, 1e-5, 1e-3):
        assert _phi_chain(r) == pytest.approx(r * r / (2 * (r + math.expm1(-r))), rel=1e-6)
    # closed forms at r = 2
    assert _phi_sqrt(2.0) == pytest.approx(2 * (math.e + 1) / (math.e - 1))
    assert _phi_chain(2.0) == pytest.approx(4 / (2 * (1 + math.exp(-2))))


def test_result_status():
    assert _result("x", 0.0).status == "PASS"
    assert _result("x", -1e-12, 1e-9).status == "PASS"
    assert _result("x", -1e-6, 1e-9).status == "FAIL"
    assert _result("x", math.nan).status == "FAIL"
    assert "slack=" in _result("x", 0.5).line()
    assert battery_passed([CheckResult("a", "PASS", 1.0), CheckResult("b", "SKIPPED")])
    assert not battery_passed([CheckResult("a", "PASS", 1.0), CheckResult("b", "FAIL", -1.0)])


@pytest.mark.parametrize("kind,params", [
    ("cycle", {"n": 8}),
    ("hypercube", {"n": 5}),
    ("rank_one", {"n": 6, "pi_min": 0.1}),
    ("glauber_hardcore", {"n_sites": 4, "graph": "path", "zeta": 0.4, "rate_rule": "sqrt"}),
])
def test_battery_passes_on_small_models(kind, params):
    res = run_battery(model(kind, **params), seed=0, seeds=16, budget=200)
    fails = [r.line() for r in res if r.status == "FAIL"]
    assert not fails
    assert sum(r.status == "PASS" for r in res) >= 20
    names = [r.name for r in res]
    assert len(names) == len(set(names))


def test_directed_chain_skips_metric_checks():
    c = build_chain(np.array([[0.5, 0.5, 0], [0, 0.5, 0.5], [0.5, 0, 0.5]]))
    res = run_battery(c, seeds=8, budget=100)
    assert battery_passed(res)
    skipped = [r for r in res if r.status == "SKIPPED"]
    assert skipped and all(r.detail for r in skipped)


def test_rho_certificate_sources():
    cube = prepare(model("hypercube", n=4), seeds=4, budget=50, with_sobolev=False)
    assert rho_certified(cube)
    cw = prepare(model("glauber_ising", n_sites=4, graph="complete", beta=2.0,
                       rate_rule="metropolis"), seeds=4, budget=50, with_sobolev=False)
    assert rho_certified(cw) == (cw.curvature.rho >= -1e-7)


def test_battery_is_deterministic():
    m = model("cycle", n=6)
    a = [(r.name, r.status, r.slack) for r in run_battery(m, seed=3, seeds=8, budget=100)]
    b = [(r.name, r.status, r.slack) for r in run_battery(m, seed=3, seeds=8, budget=100)]
    assert a == b
