import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cutofflab.chain_core import dirac_density, semigroup_apply
from cutofflab.curvature import compute_curvature
from cutofflab.errors import (
    EpsilonOutOfRange,
    InputError,
    NonReversibleForLSI,
    NotLipschitz,
    TooLargeForDense,
)
from cutofflab.functionals import (
    certified_lower_bounds,
    entropy,
    first_passage_time,
    herbst_check,
    lp_norm,
    mixing_time,
    mixing_window,
    poincare_constant,
    sobolev_ratio,
    sobolev_upper_estimate,
    spectral_gap,
    stats,
    tv_of_density,
    variance,
    varentropy,
    worst_case_l2,
    worst_case_tv,
)
from cutofflab.geometry import hop_metric
from cutofflab.model_zoo import ZOO, build_model

from conftest import model, random_chain, random_density


# --- statistics ---------------------------------------------------------------

def test_constant_density_stats_vanish():
    c = model("cycle", n=5).chain
    s = stats(c, np.ones(5))
    for v in (s.entropy, s.variance, s.varentropy, s.tv_to_equilibrium):
        assert abs(v) < 1e-15


def test_dirac_stats():
    c = model("rank_one", n=6, pi_min=0.1).chain
    for x in range(6):
        s = stats(c, dirac_density(c, x))
        assert s.entropy == pytest.approx(math.log(1 / c.pi[x]), abs=1e-12)
        assert abs(s.varentropy) < 1e-12
        assert s.tv_to_equilibrium == pytest.approx(1 - c.pi[x], abs=1e-12)


def test_stats_against_direct_formulas(rng):
    c = random_chain(rng, 6)
    f = random_density(rng, c)
    pi = c.pi
    ent = pi @ (f * np.log(f))
    assert entropy(c, f) == pytest.approx(ent, abs=1e-12)
    assert variance(c, f) == pytest.approx(pi @ f ** 2 - 1, abs=1e-12)
    assert varentropy(c, f) == pytest.approx(pi @ (f * np.log(f) ** 2) - ent ** 2, abs=1e-12)
    assert tv_of_density(c, f) == pytest.approx(0.5 * pi @ np.abs(f - 1), abs=1e-14)


def test_cube_product_density_varentropy():
    n, t = 8, 4.0
    c = model("hypercube", n=n).chain
    f = semigroup_apply(c, dirac_density(c, c.n - 1), t, "adjoint")
    closed = 2 * (1 - math.exp(-2)) * math.log((1 + math.exp(-1)) / (1 - math.exp(-1))) ** 2
    assert closed == pytest.approx(1.0305, abs=1e-4)
    assert varentropy(c, f) == pytest.approx(closed, abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 8), st.integers(0, 10 ** 6))
def test_entropy_properties(n, seed):
    rng = np.random.default_rng(seed)
    c = random_chain(rng, n)
    f = random_density(rng, c)
    s = stats(c, f)
    assert s.entropy >= -1e-14 and s.variance >= -1e-14 and s.varentropy >= -1e-14
    assert 2 * s.tv_to_equilibrium ** 2 <= s.entropy + 1e-12
    # entropy vanishes only at the constant density
    if np.abs(f - 1).max() > 1e-3:
        assert s.entropy > 1e-12


def test_lp_norms(rng):
    c = random_chain(rng, 5)
    f = rng.standard_normal(5)
    assert lp_norm(c, f, 2) == pytest.approx(math.sqrt(c.pi @ f ** 2))
    assert lp_norm(c, f, math.inf) == np.abs(f).max()


# --- distance to equilibrium ------------------------------------------------------

def test_tv_at_time_zero():
    for spec in ZOO[:7]:
        c = build_model(spec).chain
        assert worst_case_tv(c, 0.0) == pytest.approx(1 - c.pi_min, abs=1e-14)


def test_rank_one_tv_closed_form():
    c = model("rank_one", n=6, pi_min=0.1).chain
    for t in (0.0, 0.5, 1.0, 3.0, 7.0):
        assert worst_case_tv(c, t) == pytest.approx(math.exp(-t) * 0.9, abs=1e-13)


def test_submultiplicativity():
    c = model("cycle", n=10).chain
    grid = [0.5, 1.0, 3.0, 8.0]
    for t in grid:
        for s in grid:
            assert worst_case_tv(c, t + s) <= 2 * worst_case_tv(c, t) * worst_case_tv(c, s) + 1e-12


def test_relaxation_lower_bound_and_l2():
    c = model("cycle", n=9).chain
    lam = spectral_gap(c).gap
    ts = np.linspace(0.5, 20, 12)
    d2 = np.array([worst_case_l2(c, t) for t in ts])
    for t, l2 in zip(ts, d2):
        tv = worst_case_tv(c, t)
        assert tv >= 0.5 * math.exp(-lam * t) - 1e-12
        assert tv <= l2 + 1e-12
    logs = np.log(d2)
    # log-convexity on a uniform grid: second differences are non-negative
    assert np.all(logs[:-2] + logs[2:] - 2 * logs[1:-1] >= -1e-9)


def test_decay_rate_approaches_gap():
    from cutofflab.chain_core import lazify

    # non-negative spectrum keeps rounding errors decaying at least as fast as the signal
    c = lazify(model("cycle", n=9).chain)
    lam = spectral_gap(c).gap
    dev = dirac_density(c, 0) - 1.0  # mean zero, so no cancellation against pi

    def dist(t):
        g = semigroup_apply(c, dev, t, "adjoint")
        # the pi-mean is conserved and zero; drop its rounding residue, which never decays
        g = g - c.pi @ g
        return 0.5 * c.pi @ np.abs(g)

    t1, t2 = 20 / lam, 40 / lam
    slope = (math.log(2 * dist(t1)) - math.log(2 * dist(t2))) / (t2 - t1)
    assert slope == pytest.approx(lam, rel=0.05)


# --- mixing times -------------------------------------------------------------------

def test_rank_one_mixing_time():
    c = model("rank_one", n=6, pi_min=0.1).chain
    for eps in (0.1, 0.25, 0.5):
        assert mixing_time(c, eps) == pytest.approx(math.log(0.9 / eps), abs=1e-6)
    assert mixing_time(c, 0.95) == 0.0
    with pytest.raises(EpsilonOutOfRange):
        mixing_time(c, 1.2)


def test_mixing_window_sign():
    c = model("hypercube", n=6).chain
    assert mixing_window(c, 0.25) > 0
    w = mixing_time(c, 0.25) - mixing_time(c, 0.75)
    assert mixing_window(c, 0.25) == pytest.approx(w, rel=1e-12)


def test_mixing_time_from_density():
    c = model("rank_one", n=6, pi_min=0.1).chain
    assert mixing_time(c, 0.2, start=np.ones(6)) == 0.0
    f = dirac_density(c, 3)
    expected = math.log((1 - c.pi[3]) / 0.2)
    assert mixing_time(c, 0.2, start=f) == pytest.approx(expected, abs=1e-5)
    with pytest.raises(InputError):
        mixing_time(c, 0.2, start="best")


def test_epsilon_scaling():
    ref = 1 / (2 * math.e)
    for spec in ZOO:
        c = build_model(spec).chain
        base = mixing_time(c, ref)
        for eps in (0.1, 0.01):
            assert mixing_time(c, eps) / base <= math.ceil(math.log(1 / eps)) + 1e-9


def test_first_passage_time_on_exponential():
    t = first_passage_time(lambda s: math.exp(-s), 0.01)
    assert t == pytest.approx(math.log(100), rel=2e-6)


# --- spectra --------------------------------------------------------------------------

def test_spectral_gap_examples():
    assert spectral_gap(model("cycle", n=8).chain).gap == pytest.approx(
        1 - math.cos(2 * math.pi / 8), abs=1e-12)
    assert spectral_gap(model("hypercube", n=4).chain).gap == pytest.approx(0.5, abs=1e-12)
    assert spectral_gap(model("rank_one", n=6, pi_min=0.1).chain).gap == pytest.approx(
        1.0, abs=1e-12)
    assert poincare_constant(model("rank_one", n=6, pi_min=0.1).chain) == pytest.approx(1.0)


def test_gamma_equals_lambda_when_reversible():
    for spec in ZOO:
        c = build_model(spec).chain
        if c.reversible:
            assert abs(poincare_constant(c) - spectral_gap(c).gap) < 1e-10


def test_nonreversible_gap_against_eigvals(rng):
    for _ in range(5):
        c = random_chain(rng, 7)
        assert not c.reversible
        ev = np.linalg.eigvals(c.dense())
        ev = np.delete(ev, np.argmin(np.abs(ev - 1)))
        assert spectral_gap(c).gap == pytest.approx(1 - ev.real.max(), abs=1e-10)
        assert np.any(np.abs(spectral_gap(c).eigenvalues - 1) < 1e-10)


def test_poincare_constant_by_rayleigh_sampling():
    # a cycle with a rotational drift
    n = 6
    P = np.zeros((n, n))
    for x in range(n):
        P[x, (x + 1) % n] = 0.6
        P[x, (x - 1) % n] = 0.2
        P[x, x] = 0.2
    from cutofflab.chain_core import build_chain, dirichlet_form

    c = build_chain(P)
    assert not c.reversible
    gamma = poincare_constant(c)
    rng = np.random.default_rng(0)
    quotients = []
    for _ in range(1000):
        f = rng.standard_normal(n)
        f = f - c.pi @ f
        quotients.append(dirichlet_form(c, f, f) / (c.pi @ f ** 2))
    assert gamma <= min(quotients) + 1e-12
    assert min(quotients) < gamma * 1.05
    # symmetrized kernel: 0.2 on the diagonal, 0.4 to each neighbour
    assert gamma == pytest.approx(0.8 * (1 - math.cos(2 * math.pi / n)), abs=1e-12)


def test_dense_cap():
    c = model("cycle", n=20).chain
    with pytest.raises(TooLargeForDense):
        spectral_gap(c, dense_cap=10)


# --- Sobolev constants -------------------------------------------------------------------

def test_cube_sobolev_upper_estimates():
    c = model("hypercube", n=4).chain
    a = sobolev_upper_estimate(c, "mlsi", seeds=16, budget=300)
    b = sobolev_upper_estimate(c, "lsi", seeds=16, budget=300)
    assert a.upper == pytest.approx(1.0, abs=1e-3)
    assert b.upper == pytest.approx(0.25, abs=1e-3)
    for br in (a, b):
        assert sobolev_ratio(c, br.witness, br.kind) == pytest.approx(br.upper, abs=1e-10)


def test_even_cycle_mlsi():
    c = model("cycle", n=8).chain
    a = sobolev_upper_estimate(c, "mlsi", seeds=16)
    assert a.upper == pytest.approx(2 - 2 * math.cos(2 * math.pi / 8), abs=1e-3)


def test_uniform_rank_one_mlsi_in_range():
    c = model("rank_one", pi=[0.25] * 4).chain
    a = sobolev_upper_estimate(c, "mlsi", seeds=16)
    assert 1 <= a.upper <= 2 + 1e-3


def test_lsi_needs_reversibility(rng):
    c = random_chain(rng, 5)
    with pytest.raises(NonReversibleForLSI):
        sobolev_upper_estimate(c, "lsi")
    # the modified constant is still available
    assert sobolev_upper_estimate(c, "mlsi", seeds=4, budget=50).upper > 0


def test_optimizer_is_deterministic():
    c = model("cycle", n=6).chain
    a = sobolev_upper_estimate(c, "lsi", seeds=8, seed=3)
    b = sobolev_upper_estimate(c, "lsi", seeds=8, seed=3)
    assert a.upper == b.upper and np.array_equal(a.witness, b.witness)


def test_chain_rule_sandwich(rng):
    from cutofflab.functionals import lsi_numerator, mlsi_numerator
    from cutofflab.geometry import lipschitz_seminorm

    c = model("hypercube", n=5).chain
    for _ in range(100):
        f = np.exp(rng.standard_normal(c.n) * rng.uniform(0.1, 2))
        f /= c.pi @ f
        r = lipschitz_seminorm(c, np.log(f))
        phi = r * (math.exp(r / 2) + 1) / (math.exp(r / 2) - 1) if r > 0 else 4.0
        e_sqrt = lsi_numerator(c, f)
        e_log = mlsi_numerator(c, f)
        assert 4 * e_sqrt <= e_log * (1 + 1e-10) + 1e-15
        assert e_log <= phi * e_sqrt * (1 + 1e-10) + 1e-15


# --- certified bounds and concentration ---------------------------------------------

def test_certified_lower_bounds_cube():
    c = model("hypercube", n=8).chain
    rep = compute_curvature(c)
    a, b = certified_lower_bounds(c, rep, hop_metric(c))
    assert a == pytest.approx(0.25, abs=1e-12)
    assert b == pytest.approx(0.25 / (15 * math.log(8)), abs=1e-9)
    assert b <= 0.125


def test_certified_lower_bounds_rank_one():
    c = model("rank_one", n=6, pi_min=0.1).chain
    a, _ = certified_lower_bounds(c, compute_curvature(c))
    assert a == pytest.approx(1.0, abs=1e-12)


def test_herbst_cube():
    c = model("hypercube", n=8).chain
    weight = np.array([bin(x).count("1") for x in range(c.n)], dtype=float)
    grid = np.concatenate([-np.arange(1, 21) / 10, np.arange(1, 21) / 10])
    rep = herbst_check(c, weight, 0.25, theta_grid=grid)
    assert rep.holds
    zero = herbst_check(c, weight, 0.25, theta_grid=[0.0], r_grid=[])
    assert zero.worst_slack == pytest.approx(0.0, abs=1e-14)
    const = herbst_check(c, np.ones(c.n), 0.25, theta_grid=[0.5], r_grid=[])
    assert const.worst_slack == pytest.approx(0.5 ** 2 / (2 * 0.25), abs=1e-12)
    with pytest.raises(NotLipschitz):
        herbst_check(c, 2 * weight, 0.25)


def test_variance_and_entropy_decay():
    c = model("hypercube", n=6).chain
    rng = np.random.default_rng(9)
    gamma = poincare_constant(c)
    for _ in range(10):
        f = random_density(rng, c)
        for t in (0.5, 2.0, 5.0):
            g = semigroup_apply(c, f, t, "adjoint")
            assert variance(c, g) <= math.exp(-2 * gamma * t) * variance(c, f) + 1e-12
            # certified alpha_lower = kappa1 = 2/n for the cube
            assert entropy(c, g) <= math.exp(-(2 / 6) * t) * entropy(c, f) + 1e-12


def test_diameter_bounds_from_known_constants():
    for kind, n in (("hypercube", 8), ("cycle", 8)):
        from cutofflab.model_zoo import ModelSpec, reference_values

        ref = reference_values(ModelSpec(kind, {"n": n}))
        c = model(kind, n=n).chain
        diam = hop_metric(c).diameter
        assert diam <= math.sqrt(8 / ref["alpha"] * math.log(1 / c.pi_min))
        assert diam <= math.sqrt(2) / ref["beta"]


def test_hypercontractivity_cube():
    c = model("hypercube", n=6).chain
    beta = 1 / 6
    rng = np.random.default_rng(5)
    for _ in range(20):
        f = rng.standard_normal(c.n)
        for t in (0.1, 0.5, 1.0, 3.0):
            q = 1 + math.exp(4 * beta * t)
            assert lp_norm(c, semigroup_apply(c, f, t), q) <= lp_norm(c, f, 2) * (1 + 1e-12)
