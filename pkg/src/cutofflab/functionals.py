"""Entropy-type functionals, spectral constants, Sobolev-type constants and mixing times."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .chain_core import (
    Chain,
    check_density,
    distributions_at,
    generator_apply,
    semigroup_apply,
)
from .errors import (
    BudgetExhausted,
    EpsilonOutOfRange,
    InputError,
    NonReversibleForLSI,
    NotLipschitz,
    TooLargeForDense,
)

DENSE_CAP = 4096


# ---------------------------------------------------------------------------
# numerically careful building blocks

def _h(u):
    """(1+u) log(1+u) - u, accurate near u = 0 and equal to 1 at u = -1."""
    u = np.asarray(u, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        series = u * u * (1 / 2 - u * (1 / 6 - u * (1 / 12 - u * (1 / 20 - u * (
            1 / 30 - u * (1 / 42 - u / 56))))))
        direct = (1 + u) * np.log1p(u) - u
    direct = np.where(u <= -1.0, 1.0, direct)
    return np.where(np.abs(u) < 1e-2, series, direct)


def _h_scalar(u: float) -> float:
    if abs(u) < 1e-2:
        return u * u * (1 / 2 - u * (1 / 6 - u * (1 / 12 - u * (1 / 20 - u * (
            1 / 30 - u * (1 / 42 - u / 56))))))
    return 1.0 if u <= -1.0 else (1 + u) * math.log1p(u) - u


def _k(v):
    """v - log(1+v), accurate near v = 0."""
    v = np.asarray(v, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        series = v * v * (1 / 2 - v * (1 / 3 - v * (1 / 4 - v * (1 / 5 - v * (
            1 / 6 - v * (1 / 7 - v / 8))))))
        direct = v - np.log1p(v)
    return np.where(np.abs(v) < 1e-2, series, direct)


def _pi_of(chain_or_pi):
    return chain_or_pi.pi if isinstance(chain_or_pi, Chain) else np.asarray(chain_or_pi)


def entropy(chain_or_pi, f) -> float:
    pi = _pi_of(chain_or_pi)
    f = np.asarray(f, dtype=np.float64)
    m = float(pi @ f)
    # E[f log f] - m log m, rewritten as a sum of non-negative terms
    return max(float(pi @ _h(f - 1.0) - _h_scalar(m - 1.0)), 0.0)


def variance(chain_or_pi, f) -> float:
    pi = _pi_of(chain_or_pi)
    f = np.asarray(f, dtype=np.float64)
    m = float(pi @ f)
    return float(pi @ (f - m) ** 2)


def varentropy(chain_or_pi, f) -> float:
    """Variance of log f(X) when X has law f d(pi)."""
    pi = _pi_of(chain_or_pi)
    f = np.asarray(f, dtype=np.float64)
    mu = pi * f
    mu = mu / mu.sum()
    pos = mu > 0
    lf = np.log(f[pos])
    mean = float(mu[pos] @ lf)
    return float(mu[pos] @ (lf - mean) ** 2)


def tv_of_density(chain_or_pi, f) -> float:
    pi = _pi_of(chain_or_pi)
    return float(0.5 * pi @ np.abs(np.asarray(f, dtype=np.float64) - 1.0))


def lp_norm(chain_or_pi, f, p: float) -> float:
    pi = _pi_of(chain_or_pi)
    a = np.abs(np.asarray(f, dtype=np.float64))
    if math.isinf(p):
        return float(a.max())
    return float((pi @ a ** p) ** (1.0 / p))


@dataclass
class EntropyStats:
    entropy: float
    variance: float
    varentropy: float
    tv_to_equilibrium: float


def stats(chain_or_pi, f) -> EntropyStats:
    return EntropyStats(
        entropy=entropy(chain_or_pi, f),
        variance=variance(chain_or_pi, f),
        varentropy=varentropy(chain_or_pi, f),
        tv_to_equilibrium=tv_of_density(chain_or_pi, f),
    )


# ---------------------------------------------------------------------------
# distance to equilibrium and mixing times

def _worst_starts(chain: Chain, starts=None):
    if starts is not None:
        return np.asarray(starts, dtype=int)
    if getattr(chain, "transitive", False):
        return np.array([0])
    return np.arange(chain.n)


def tv_from_starts(chain: Chain, t: float, starts=None) -> np.ndarray:
    starts = _worst_starts(chain, starts)
    rows = distributions_at(chain, starts, t)
    return 0.5 * np.abs(rows - chain.pi[None, :]).sum(axis=1)


def worst_case_tv(chain: Chain, t: float, starts=None) -> float:
    return float(tv_from_starts(chain, t, starts).max())


def worst_case_l2(chain: Chain, t: float, starts=None) -> float:
    """max_x || P_t(x,.)/pi - 1 ||_2 in L2(pi)."""
    starts = _worst_starts(chain, starts)
    rows = distributions_at(chain, starts, t) / chain.pi[None, :]
    return float(np.sqrt(((rows - 1.0) ** 2 * chain.pi[None, :]).sum(axis=1)).max())


def _distance_curve(chain: Chain, start):
    if isinstance(start, str):
        if start != "worst":
            raise InputError(f"unknown start {start!r}")
        return lambda t: worst_case_tv(chain, t)
    f = check_density(chain, start)
    return lambda t: tv_of_density(chain, semigroup_apply(chain, f, t, "adjoint"))


def first_passage_time(dfun, eps: float, rel_tol: float = 1e-6) -> float:
    """Smallest t with dfun(t) <= eps for a non-increasing dfun, by doubling then bisection."""
    if dfun(0.0) <= eps:
        return 0.0
    lo, hi = 0.0, 1.0
    while dfun(hi) > eps:
        lo, hi = hi, 2.0 * hi
        if hi > 1e12:
            raise InputError("distance does not reach the requested precision")
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if dfun(mid) <= eps:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _check_eps(eps: float, upper: float = 1.0):
    if not 0.0 < eps < upper:
        raise EpsilonOutOfRange(f"epsilon must lie in (0, {upper}), got {eps}")


def mixing_time(chain: Chain, epsilon: float, start="worst") -> float:
    _check_eps(epsilon)
    return first_passage_time(_distance_curve(chain, start), epsilon)


def mixing_window(chain: Chain, epsilon: float, start="worst") -> float:
    _check_eps(epsilon)
    return mixing_time(chain, epsilon, start) - mixing_time(chain, 1.0 - epsilon, start)


# ---------------------------------------------------------------------------
# spectra

@dataclass
class SpectralData:
    eigenvalues: np.ndarray
    gap: float
    eigenvectors: np.ndarray | None = field(default=None, repr=False)


def _check_cap(chain: Chain, cap):
    cap = DENSE_CAP if cap is None else cap
    if chain.n > cap:
        raise TooLargeForDense(f"{chain.n} states exceed the dense cap {cap}")


def _symmetric_spectrum(pi, dense):
    """Spectrum of a pi-self-adjoint matrix; eigenvectors returned in L2(pi) normalization."""
    r = np.sqrt(pi)
    s = r[:, None] * dense / r[None, :]
    s = 0.5 * (s + s.T)
    vals, vecs = np.linalg.eigh(s)
    order = np.argsort(-vals, kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    return vals, vecs / r[:, None]


def spectral_gap(chain: Chain, dense_cap=None) -> SpectralData:
    _check_cap(chain, dense_cap)
    dense = chain.dense()
    if chain.reversible:
        vals, vecs = _symmetric_spectrum(chain.pi, dense)
        return SpectralData(vals, float(1.0 - vals[1]), vecs)
    tmat, _ = sla.schur(dense, output="complex")
    eig = np.diag(tmat)
    one = int(np.argmin(np.abs(eig - 1.0)))
    if abs(eig[one] - 1.0) > 1e-8:
        raise InputError("no eigenvalue found at 1")
    rest = np.delete(eig, one)
    order = np.lexsort((-rest.imag, -rest.real))
    eig = np.concatenate([[eig[one]], rest[order]])
    return SpectralData(eig, float(1.0 - rest.real.max()))


def symmetrized_dense(chain: Chain) -> np.ndarray:
    return 0.5 * (chain.dense() + chain.Pa.toarray())


def poincare_spectrum(chain: Chain, dense_cap=None) -> SpectralData:
    _check_cap(chain, dense_cap)
    vals, vecs = _symmetric_spectrum(chain.pi, symmetrized_dense(chain))
    return SpectralData(vals, float(1.0 - vals[1]), vecs)


def poincare_constant(chain: Chain, dense_cap=None) -> float:
    return poincare_spectrum(chain, dense_cap).gap


# ---------------------------------------------------------------------------
# Sobolev-type ratios

def mlsi_numerator(chain: Chain, f) -> float:
    """E(f, log f) as a sum of non-negative edge terms."""
    f = np.asarray(f, dtype=np.float64)
    r, c, p = chain.triplets
    fx, fy = f[r], f[c]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(fx > 0, fx * _k(fy / np.where(fx > 0, fx, 1.0) - 1.0), fy)
    return float((chain.pi[r] * p * terms).sum())


def lsi_numerator(chain: Chain, f) -> float:
    """E(sqrt f, sqrt f) from the symmetric edge form."""
    f = np.asarray(f, dtype=np.float64)
    r, c, p = chain.triplets
    sf = np.sqrt(f)
    denom = sf[r] + sf[c]
    diff = np.where(denom > 0, (f[r] - f[c]) / np.where(denom > 0, denom, 1.0), 0.0)
    return float(0.5 * (chain.pi[r] * p * diff * diff).sum())


def sobolev_ratio(chain: Chain, f, kind: str) -> float:
    ent = entropy(chain, f)
    m = float(chain.pi @ f)
    if kind == "mlsi":
        num = mlsi_numerator(chain, np.asarray(f) / m)
    elif kind == "lsi":
        num = lsi_numerator(chain, np.asarray(f) / m)
    else:
        raise InputError(f"unknown kind {kind!r}")
    return num / (ent / m)


@dataclass
class ConstantBracket:
    kind: str
    exact: float | None
    lower: float | None
    upper: float
    witness: np.ndarray = field(repr=False)
    residual: float = 0.0
    budget_exhausted: bool = False


def _normalize_log(chain: Chain, g):
    g = g - g.max()
    f = np.exp(g)
    f = np.maximum(f / (chain.pi @ f), 1e-300)
    return f, np.log(f)


def _value_and_grad(chain: Chain, f, lf, kind):
    d = entropy(chain, f)
    if kind == "mlsi":
        n = mlsi_numerator(chain, f)
        phi = n / d
        g = f * (-generator_apply(chain, lf) - generator_apply(chain, f, True) / f
                 - phi * lf) / d
    else:
        n = lsi_numerator(chain, f)
        phi = n / d
        sf = np.sqrt(f)
        lsym = 0.5 * (generator_apply(chain, sf) + generator_apply(chain, sf, True))
        g = (-sf * lsym - phi * f * lf) / d
    return phi, g


def _euler_lagrange_residual(chain: Chain, f, phi, kind) -> float:
    lf = np.log(f)
    if kind == "lsi":
        sf = np.sqrt(f)
        res = generator_apply(chain, sf) + phi * sf * lf
    else:
        res = f * (-generator_apply(chain, lf) - generator_apply(chain, f, True) / f - phi * lf)
    return float(np.sqrt(chain.pi @ res ** 2))


# (iteration, factor): a start still above factor * best at that iteration is dropped
PRUNE_SCHEDULE = ((50, 1.05), (150, 1.01))


def _descend(chain: Chain, f0, kind, max_iter, best=math.inf):
    f, lf = _normalize_log(chain, np.log(np.maximum(f0, 1e-300)))
    phi, grad = _value_and_grad(chain, f, lf, kind)
    step = 1.0
    prev_g = prev_grad = None
    for it in range(max_iter):
        for when, factor in PRUNE_SCHEDULE:
            if it == when and phi > factor * best:
                return phi, f, True
        gnorm2 = float(chain.pi @ (grad * grad / chain.pi ** 2))
        if gnorm2 == 0 or not np.isfinite(gnorm2):
            return phi, f, True
        if prev_g is not None:
            s, y = lf - prev_g, grad - prev_grad
            # Barzilai-Borwein step for the L2(pi) natural gradient
            sy = float(s @ y)
            if sy > 0:
                step = float(chain.pi @ (s * s)) / sy
        direction = -grad / chain.pi
        accepted = False
        for _ in range(60):
            cand_f, cand_lf = _normalize_log(chain, lf + step * direction)
            cand_phi = sobolev_ratio(chain, cand_f, kind)
            if np.isfinite(cand_phi) and cand_phi <= phi - 1e-4 * step * gnorm2:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            return phi, f, True
        prev_g, prev_grad = lf, grad
        old = phi
        f, lf = cand_f, cand_lf
        phi, grad = _value_and_grad(chain, f, lf, kind)
        if abs(old - phi) <= 1e-10 * abs(phi):
            return phi, f, True
    return phi, f, False


def sobolev_upper_estimate(chain: Chain, kind: str = "mlsi", seeds: int = 64,
                           budget: int = 400, seed: int = 0, dense_cap=None,
                           lower=None, exact=None) -> ConstantBracket:
    """Witness-based upper bound on the MLSI (alpha) or LSI (beta) constant.

    Multi-start descent in log coordinates. Starts: the two first-order
    perturbations of the constant along the top Poincare eigenvector, Dirac
    densities smoothed by the lazy semigroup, and Dirichlet draws.
    """
    if kind not in ("mlsi", "lsi"):
        raise InputError(f"unknown kind {kind!r}")
    if kind == "lsi" and not chain.reversible:
        raise NonReversibleForLSI("the log-Sobolev optimizer assumes reversibility")
    rng = np.random.default_rng(seed)
    n = chain.n
    starts = []
    spec = poincare_spectrum(chain, dense_cap)
    phi_vec = spec.eigenvectors[:, 1]
    phi_vec = phi_vec / np.abs(phi_vec).max()
    for sign in (1.0, -1.0):
        starts.append(1.0 + sign * 1e-5 * phi_vec)
    n_dirac = min(n, max(0, seeds // 2))
    half = 0.5
    for x in rng.permutation(n)[:n_dirac]:
        fx = np.zeros(n)
        fx[x] = 1.0 / chain.pi[x]
        # unit time of the lazy semigroup, i.e. half a unit of the original one
        starts.append(semigroup_apply(chain, fx, half, "adjoint"))
    while len(starts) < seeds + 2:
        w = rng.dirichlet(np.ones(n))
        starts.append(w / chain.pi)
    best = None
    for idx, f0 in enumerate(starts):
        val, f, conv = _descend(chain, f0, kind, budget,
                                best=math.inf if best is None else best[0])
        val = sobolev_ratio(chain, f, kind)
        if best is None or val < best[0]:
            best = (val, idx, f, conv)
    val, _, f, conv = best
    if not conv:
        warnings.warn(BudgetExhausted(f"{kind} descent hit its iteration budget"))
    return ConstantBracket(kind=kind, exact=exact, lower=lower, upper=float(val), witness=f,
                           residual=_euler_lagrange_residual(chain, f, val, kind),
                           budget_exhausted=not conv)


def certified_lower_bounds(chain: Chain, report, metric=None):
    """Lower bounds on alpha and beta that rely only on certified curvature."""
    alpha_lower = None
    if report.sectional_nonneg.get("adjoint"):
        alpha_lower = float(report.kappa1)
    candidates = []
    d = metric.d_sparsity if metric is not None else report.d_sparsity
    logd = math.log(d) if d > 1 else 0.0
    if chain.reversible and logd > 0:
        if report.rho is not None and report.rho > 0:
            candidates.append(report.rho / (33.0 * logd))
        if alpha_lower is not None and alpha_lower > 0:
            candidates.append(alpha_lower / (15.0 * logd))
    beta_lower = max(candidates) if candidates else None
    return alpha_lower, beta_lower


# ---------------------------------------------------------------------------
# concentration

@dataclass
class HerbstReport:
    holds: bool
    worst_slack: float
    mgf_slacks: np.ndarray = field(repr=False)
    tail_slacks: np.ndarray = field(repr=False)


def herbst_check(chain: Chain, f, alpha_used: float, theta_grid=None, r_grid=None,
                 tol: float = 1e-12) -> HerbstReport:
    """Check the sub-Gaussian moment and tail bounds implied by a certified MLSI constant."""
    from .geometry import lipschitz_seminorm

    if not chain.reversible:
        raise InputError("the exponential moment bound is stated for reversible chains")
    f = np.asarray(f, dtype=np.float64)
    if lipschitz_seminorm(chain, f) > 1.0 + 1e-12:
        raise NotLipschitz("observable is not 1-Lipschitz for the hop metric")
    if theta_grid is None:
        theta_grid = np.concatenate([-np.arange(1, 21) / 10, np.arange(1, 21) / 10])
    if r_grid is None:
        r_grid = np.linspace(0.0, max(1.0, float(f.max() - f.min())), 21)
    pi = chain.pi
    mean = float(pi @ f)
    mgf = []
    for th in np.asarray(theta_grid, dtype=np.float64):
        z = th * f
        zmax = z.max()
        log_mgf = zmax + math.log(float(pi @ np.exp(z - zmax)))
        mgf.append(th * mean + th * th / (2 * alpha_used) - log_mgf)
    tails = []
    for r in np.asarray(r_grid, dtype=np.float64):
        prob = float(pi[f >= mean + r - 1e-12].sum())
        tails.append(math.exp(-alpha_used * r * r / 2) - prob)
    mgf = np.asarray(mgf)
    tails = np.asarray(tails)
    worst = float(min(mgf.min(initial=np.inf), tails.min(initial=np.inf)))
    return HerbstReport(holds=worst >= -tol, worst_slack=worst, mgf_slacks=mgf, tail_slacks=tails)
