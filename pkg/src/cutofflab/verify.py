"""Battery of numerical inequality checks run against a single model."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .chain_core import (
    Chain,
    carre_du_champ,
    dirac_density,
    distributions_at,
    semigroup_apply,
)
from .curvature import compute_curvature
from .cutoff import (
    idi_check,
    reverse_pinsker_gap,
    roughness_check,
    width_bounds,
    fast_mixing_bound,
)
from .errors import BudgetExhausted, CutoffLabError, NotWeaklyReversible
from .functionals import (
    certified_lower_bounds,
    entropy,
    herbst_check,
    lsi_numerator,
    mixing_time,
    mlsi_numerator,
    poincare_constant,
    sobolev_upper_estimate,
    spectral_gap,
    stats,
    variance,
    worst_case_l2,
    worst_case_tv,
)
from .geometry import hop_metric, lipschitz_seminorm
from .transport import wasserstein_1

T_GRID = (0.25, 0.5, 1.0, 2.0, 4.0)
EPSILONS = (0.1, 0.25, 0.4)


@dataclass
class CheckResult:
    name: str
    status: str  # PASS, FAIL or SKIPPED
    slack: float | None = None
    detail: str = ""

    def line(self) -> str:
        if self.status == "SKIPPED":
            return f"{self.name} SKIPPED ({self.detail})"
        return f"{self.name} {self.status} slack={self.slack:.6g}"


def _result(name, slack, tol=0.0):
    slack = float(slack)
    ok = slack >= -tol and not math.isnan(slack)
    return CheckResult(name, "PASS" if ok else "FAIL", slack)


def _skip(name, why):
    return CheckResult(name, "SKIPPED", None, why)


def _random_densities(rng, chain, count):
    out = []
    for _ in range(count):
        w = rng.dirichlet(np.full(chain.n, 0.5))
        out.append(np.maximum(w / chain.pi, 0.0))
    return out


def _phi_sqrt(r):
    """r (e^{r/2} + 1) / (e^{r/2} - 1), equal to 4 at r = 0."""
    if r < 1e-8:
        return 4.0
    return r * (math.exp(r / 2) + 1) / math.expm1(r / 2)


def _phi_chain(r):
    """r^2 / (2 (r + e^{-r} - 1)), equal to 1 at r = 0."""
    if abs(r) < 1e-6:
        return 1.0 + r / 3.0
    return r * r / (2.0 * (r + math.expm1(-r)))


@dataclass
class BatteryContext:
    chain: Chain
    model: object
    metric: object
    lam: float
    gamma: float
    curvature: object
    alpha: object
    beta: object
    alpha_lower: float | None
    beta_lower: float | None


def prepare(model_or_chain, seed: int = 0, seeds: int = 64, budget: int = 400,
            with_sobolev: bool = True) -> BatteryContext:
    model = model_or_chain if hasattr(model_or_chain, "chain") else None
    chain = model.chain if model is not None else model_or_chain
    try:
        metric = hop_metric(chain)
    except NotWeaklyReversible:
        metric = None
    lam = spectral_gap(chain).gap
    gamma = poincare_constant(chain)
    curv = compute_curvature(chain, metric, model) if metric is not None else None
    alpha = beta = None
    if with_sobolev:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", BudgetExhausted)
            alpha = sobolev_upper_estimate(chain, "mlsi", seeds=seeds, budget=budget, seed=seed)
            if chain.reversible:
                beta = sobolev_upper_estimate(chain, "lsi", seeds=seeds, budget=budget,
                                              seed=seed)
    a_lo = b_lo = None
    if curv is not None:
        a_lo, b_lo = certified_lower_bounds(chain, curv)
        if alpha is not None:
            alpha.lower = a_lo
        if beta is not None:
            beta.lower = b_lo
    return BatteryContext(chain, model, metric, lam, gamma, curv, alpha, beta, a_lo, b_lo)


def rho_certified(ctx: BatteryContext) -> bool:
    """rho >= 0 from the group structure, or from the computed rho up to bisection error."""
    if ctx.metric is None or ctx.curvature is None:
        return False
    if ctx.model is not None and getattr(ctx.model, "group", None) is not None:
        return True
    return ctx.curvature.rho >= -1e-7


def run_battery(model_or_chain, seed: int = 0, seeds: int = 64, budget: int = 400,
                ctx: BatteryContext | None = None) -> list:
    ctx = prepare(model_or_chain, seed, seeds, budget) if ctx is None else ctx
    chain, metric, curv = ctx.chain, ctx.metric, ctx.curvature
    rng = np.random.default_rng(seed)
    res = []
    grid = np.asarray(T_GRID)

    # distance to equilibrium
    d = {t: worst_case_tv(chain, t) for t in grid}
    sub = min(2 * d[t] * d[s] - worst_case_tv(chain, t + s) for t in grid for s in grid)
    res.append(_result("tv-submultiplicativity", sub, 1e-12))
    res.append(_result("tv-relaxation-lower-bound",
                       min(d[t] - 0.5 * math.exp(-ctx.lam * t) for t in grid), 1e-12))
    d2 = np.array([worst_case_l2(chain, t) for t in grid])
    res.append(_result("tv-below-l2", float(np.min(d2 - np.array([d[t] for t in grid]))), 1e-12))
    if chain.reversible:
        lg = np.log(np.array([worst_case_l2(chain, t) for t in (0.5, 1, 1.5, 2, 2.5, 3)]))
        res.append(_result("l2-log-convexity", float(np.min(lg[:-2] + lg[2:] - 2 * lg[1:-1])),
                           1e-9))
        eps = 0.25
        bound = math.log((1 - chain.pi_min) / (4 * chain.pi_min * eps ** 2)) / (2 * ctx.lam)
        res.append(_result("mixing-time-l2-upper-bound", bound - mixing_time(chain, eps), 1e-9))
    else:
        res.append(_skip("l2-log-convexity", "non-reversible"))
        res.append(_skip("mixing-time-l2-upper-bound", "non-reversible"))

    # spectral
    fs = _random_densities(rng, chain, 20)
    slack = min(math.exp(-2 * ctx.gamma * t) * variance(chain, f)
                - variance(chain, semigroup_apply(chain, f, t, "adjoint"))
                for f in fs for t in grid)
    res.append(_result("poincare-variance-decay", slack, 1e-12))

    # curvature
    if metric is None:
        for name in ("ollivier-below-spectral-gap", "bakry-emery-below-poincare",
                     "ollivier-diameter-bound", "ollivier-lipschitz-decay",
                     "ollivier-wasserstein-decay", "gamma-vs-lipschitz",
                     "mixing-time-diameter-lower-bound", "roughness-forward",
                     "roughness-adjoint", "idi"):
            res.append(_skip(name, "support graph not symmetric"))
    else:
        k1, rho = curv.kappa1, curv.rho
        res.append(_result("ollivier-below-spectral-gap", ctx.lam - k1, 1e-9))
        res.append(_result("bakry-emery-below-poincare", ctx.gamma - rho, 1e-9))
        res.append(_result("ollivier-diameter-bound", 2.0 - k1 * metric.diameter, 1e-9))
        obs = [rng.standard_normal(chain.n) for _ in range(10)]
        slack = min(math.exp(-k1 * t) * lipschitz_seminorm(chain, g)
                    - lipschitz_seminorm(chain, semigroup_apply(chain, g, t))
                    for g in obs for t in grid)
        res.append(_result("ollivier-lipschitz-decay", slack, 1e-9))
        slack = math.inf
        for _ in range(5 if chain.n <= 128 else 2):
            mu = rng.dirichlet(np.ones(chain.n))
            nu = rng.dirichlet(np.ones(chain.n))
            w0, _ = wasserstein_1(mu, nu, metric)
            for t in (0.5, 2.0):
                a = semigroup_apply(chain, mu / chain.pi, t, "adjoint") * chain.pi
                b = semigroup_apply(chain, nu / chain.pi, t, "adjoint") * chain.pi
                wt, _ = wasserstein_1(a / a.sum(), b / b.sum(), metric)
                slack = min(slack, math.exp(-k1 * t) * w0 - wt)
        res.append(_result("ollivier-wasserstein-decay", slack, 1e-9))
        slack = math.inf
        for g in obs:
            gam = float(carre_du_champ(chain, g).max())
            lip2 = lipschitz_seminorm(chain, g) ** 2
            slack = min(slack, lip2 - 2 * gam, 2 * metric.d_sparsity * gam - lip2)
        res.append(_result("gamma-vs-lipschitz", slack, 1e-12))
        slack = min(mixing_time(chain, e) - math.floor((1 - e) ** 2 * metric.diameter / 10)
                    for e in EPSILONS)
        res.append(_result("mixing-time-diameter-lower-bound", slack, 1e-9))

        if chain.reversible:
            slack = math.inf
            for g in obs[:5]:
                gf = carre_du_champ(chain, g)
                for t in grid:
                    lhs = carre_du_champ(chain, semigroup_apply(chain, g, t))
                    rhs = math.exp(-2 * rho * t) * semigroup_apply(chain, gf, t)
                    slack = min(slack, float(np.min(rhs - lhs + 1e-10 * np.abs(rhs))))
            res.append(_result("bakry-emery-subcommutation", slack, 1e-12))
            slack = math.inf
            for g in obs[:5]:
                gf = carre_du_champ(chain, g)
                for t in grid:
                    coef = 2 * t if abs(rho) < 1e-14 else -math.expm1(-2 * rho * t) / rho
                    m1 = semigroup_apply(chain, g, t)
                    m2 = semigroup_apply(chain, g * g, t)
                    rhs = coef * semigroup_apply(chain, gf, t)
                    slack = min(slack, float(np.min(rhs - (m2 - m1 * m1) + 1e-10 * np.abs(rhs))))
            res.append(_result("bakry-emery-local-poincare", slack, 1e-12))
        else:
            res.append(_skip("bakry-emery-subcommutation", "non-reversible"))
            res.append(_skip("bakry-emery-local-poincare", "non-reversible"))

    # Sobolev-type constants
    alpha, beta = ctx.alpha, ctx.beta
    if alpha is not None:
        res.append(_result("mlsi-below-twice-poincare", 2 * ctx.gamma - alpha.upper, 1e-9))
        if ctx.alpha_lower is not None:
            res.append(_result("mlsi-from-ollivier-and-sectional",
                               alpha.upper - ctx.alpha_lower, 2e-3))
        else:
            res.append(_skip("mlsi-from-ollivier-and-sectional", "no sectional certificate"))
    if beta is not None:
        res.append(_result("lsi-mlsi-hierarchy", alpha.upper - 4 * beta.upper, 2e-3))
        if curv is not None:
            logd = math.log(curv.d_sparsity)
            res.append(_result("bakry-emery-vs-lsi", 33 * beta.upper * logd - curv.rho, 1e-6))
    else:
        res.append(_skip("lsi-mlsi-hierarchy", "non-reversible or not computed"))

    if ctx.alpha_lower is not None and ctx.alpha_lower > 0:
        slack = min(math.exp(-ctx.alpha_lower * t) * entropy(chain, f)
                    - entropy(chain, semigroup_apply(chain, f, t, "adjoint"))
                    for f in fs[:10] for t in grid)
        res.append(_result("entropy-decay-certified-rate", slack, 1e-12))
        if chain.reversible and metric is not None:
            f = metric.dist[0].astype(np.float64)
            rep = herbst_check(chain, f, ctx.alpha_lower)
            res.append(_result("herbst-sub-gaussian", rep.worst_slack, 1e-12))
        else:
            res.append(_skip("herbst-sub-gaussian", "non-reversible"))
    else:
        res.append(_skip("entropy-decay-certified-rate", "no certified alpha"))
        res.append(_skip("herbst-sub-gaussian", "no certified alpha"))

    # pointwise chain rules on random positive functions
    slack_a = slack_b = math.inf
    for _ in range(100):
        g = np.exp(rng.normal(0.0, 1.0, chain.n))
        g = g / (chain.pi @ g)
        with np.errstate(divide="ignore"):
            r = lipschitz_seminorm(chain, np.log(g))
        e_sqrt = lsi_numerator(chain, g)
        e_log = mlsi_numerator(chain, g)
        if chain.reversible:
            slack_a = min(slack_a, e_log - 4 * e_sqrt, _phi_sqrt(r) * e_sqrt - e_log)
        lg = np.log(g)
        Lf = chain.P @ g - g
        Llog = chain.P @ lg - lg
        mid = Lf / g - Llog
        glog = carre_du_champ(chain, lg)
        sb = np.minimum(glog - _phi_chain(-r) * mid, _phi_chain(r) * mid - glog)
        slack_b = min(slack_b, float(np.min(sb + 1e-10 * np.abs(glog))))
    if chain.reversible:
        res.append(_result("approximate-chain-rule-dirichlet", slack_a, 1e-12))
    else:
        res.append(_skip("approximate-chain-rule-dirichlet", "non-reversible"))
    res.append(_result("approximate-chain-rule-pointwise", slack_b, 1e-12))

    # varentropy machinery
    slack = math.inf
    for f in fs:
        st = stats(chain, f)
        if st.tv_to_equilibrium < 1.0:
            slack = min(slack, reverse_pinsker_gap(st))
    for x in range(min(chain.n, 8)):
        st = stats(chain, dirac_density(chain, x))
        slack = min(slack, reverse_pinsker_gap(st))
    res.append(_result("reverse-pinsker", slack, 1e-12))
    slack = math.inf
    for x in range(min(chain.n, 4)):
        f = dirac_density(chain, x)
        slack = min(slack, fast_mixing_bound(chain, f, 0.25, ctx.gamma)
                    - mixing_time(chain, 0.25, f))
    res.append(_result("fast-mixing-from-entropy", slack, 1e-9))
    rho_ok = rho_certified(ctx)
    slack = math.inf
    for eps in EPSILONS:
        diag = width_bounds(chain, eps, gamma=ctx.gamma, lam=ctx.lam,
                            alpha_lower=ctx.alpha_lower, rho_nonneg=rho_ok, metric=metric)
        bounds = [diag.width_bound_thm_main]
        if rho_ok:
            bounds.append(diag.width_bound_idi_gamma)
            if diag.width_bound_idi_alpha is not None:
                bounds.append(diag.width_bound_idi_alpha)
        slack = min(slack, min(bounds) - diag.width)
    res.append(_result("varentropy-width-bound", slack, 1e-9))

    if metric is not None:
        x0 = int(np.argmin(chain.pi))
        f0 = dirac_density(chain, x0)
        rep = roughness_check(chain, f0, grid, metric)
        for key in ("forward", "adjoint"):
            res.append(_result(f"roughness-{key}", rep[key].worst_slack, 1e-9))
        if rho_ok:
            rep = idi_check(chain, f0, np.array([0.5, 1, 2, 4, 8, 16]), metric)
            slack = float(np.min(rep.rhs - rep.lhs + 1e-10 * np.maximum(1.0, np.abs(rep.rhs))))
            res.append(_result("idi", slack, 0.0))
        else:
            res.append(_skip("idi", "no rho >= 0 certificate"))
    return res


def battery_passed(results) -> bool:
    return all(r.status != "FAIL" for r in results)
