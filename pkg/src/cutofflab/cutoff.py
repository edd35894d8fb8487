"""Varentropy diagnostics: entropy curves, width bounds, roughness and the IDI."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .chain_core import Chain, check_density, distributions_at, semigroup_apply
from .errors import EpsilonOutOfRange, MissingCertificate, TVEqualsOne
from .functionals import (
    EntropyStats,
    entropy,
    mixing_time,
    mlsi_numerator,
    poincare_constant,
    spectral_gap,
    tv_of_density,
    varentropy,
)
from .geometry import MetricData, hop_metric, lipschitz_seminorm


def log_plus(u: float) -> float:
    return max(math.log(u), 0.0) if u > 0 else 0.0


def _lip_log(chain: Chain, f) -> float:
    with np.errstate(divide="ignore"):
        return lipschitz_seminorm(chain, np.log(f))


@dataclass
class VarentropyCurve:
    times: np.ndarray
    entropy: np.ndarray
    varentropy: np.ndarray
    tv: np.ndarray
    entropy_slope: np.ndarray
    roughness: np.ndarray


def entropy_slope(chain: Chain, f) -> float:
    """-d/dt Ent(f_t) = <-L* f, log f>_pi, evaluated as E(f, log f) in edge form."""
    return mlsi_numerator(chain, f)


def varentropy_curve(chain: Chain, f0, time_grid) -> VarentropyCurve:
    f = check_density(chain, f0)
    times = np.asarray(time_grid, dtype=np.float64)
    if np.any(np.diff(times) < 0) or (times.size and times[0] < 0):
        raise EpsilonOutOfRange("time grid must be non-negative and increasing")
    cols = {k: np.empty(times.size) for k in ("ent", "var", "tv", "slope", "rough")}
    prev = 0.0
    for i, t in enumerate(times):
        if t > prev:
            f = np.maximum(semigroup_apply(chain, f, t - prev, "adjoint"), 0.0)
            prev = t
        cols["ent"][i] = entropy(chain, f)
        cols["var"][i] = varentropy(chain, f)
        cols["tv"][i] = tv_of_density(chain, f)
        cols["slope"][i] = entropy_slope(chain, f)
        cols["rough"][i] = _lip_log(chain, f)
    return VarentropyCurve(times, cols["ent"], cols["var"], cols["tv"], cols["slope"],
                           cols["rough"])


def reverse_pinsker_gap(st: EntropyStats) -> float:
    """(1 + sqrt(Varent)) / (1 - TV) - Ent, which is never negative."""
    if st.tv_to_equilibrium >= 1.0:
        raise TVEqualsOne("total variation equals one")
    return (1.0 + math.sqrt(st.varentropy)) / (1.0 - st.tv_to_equilibrium) - st.entropy


def fast_mixing_bound(chain: Chain, f, epsilon: float, gamma: float | None = None) -> float:
    if not 0 < epsilon < 1:
        raise EpsilonOutOfRange(f"epsilon must lie in (0, 1), got {epsilon}")
    f = check_density(chain, f)
    gamma = poincare_constant(chain) if gamma is None else gamma
    return (1.0 + entropy(chain, f)) / (gamma * epsilon)


def _check_half(eps):
    if not 0 < eps < 0.5:
        raise EpsilonOutOfRange(f"epsilon must lie in (0, 1/2), got {eps}")


def _dirac_starts(chain: Chain):
    return np.array([0]) if chain.transitive else np.arange(chain.n)


def varentropy_at(chain: Chain, t: float, start="worst") -> float:
    if isinstance(start, str):
        rows = distributions_at(chain, _dirac_starts(chain), t)
        return max(varentropy(chain, r / chain.pi) for r in rows)
    f = check_density(chain, start)
    return varentropy(chain, semigroup_apply(chain, f, t, "adjoint"))


def varentropy_correction(chain: Chain, epsilon: float, start="worst", t_hi=None) -> float:
    """V_eps: varentropy at t_mix(1 - eps), maximized over Dirac starts in the worst case."""
    _check_half(epsilon)
    t = mixing_time(chain, 1.0 - epsilon, start) if t_hi is None else t_hi
    return varentropy_at(chain, t, start)


def psi_rate(t: float, d: float, diam: float) -> float:
    return 16.0 * t * math.log(d) + 4.0 * t * log_plus(diam / t) if t > 0 else 0.0


def window_sup_psi(t0: float, t1: float, d: float, diam: float) -> float:
    """sup of psi on [t0, t1]: endpoints plus the interior maximizer diam/e of t log(diam/t)."""
    pts = [t0, t1]
    if t0 < diam / math.e < t1:
        pts.append(diam / math.e)
    return max(psi_rate(t, d, diam) for t in pts)


@dataclass
class CutoffDiagnostics:
    epsilon: float
    t_mix_table: dict
    width: float
    varentropy_correction: float
    width_bound_thm_main: float
    width_bound_idi_gamma: float | None
    width_bound_idi_alpha: float | None
    criterion_ratio: float
    product_condition: float
    m_eps: float | None = None
    notes: list = field(default_factory=list)


def width_bounds(chain: Chain, epsilon: float, gamma: float | None = None,
                 lam: float | None = None, alpha_lower: float | None = None,
                 rho_nonneg: bool = False, metric: MetricData | None = None,
                 start="worst", require_certificate: bool = False) -> CutoffDiagnostics:
    _check_half(epsilon)
    gamma = poincare_constant(chain) if gamma is None else gamma
    lam = spectral_gap(chain).gap if lam is None else lam
    t_lo = mixing_time(chain, 1.0 - epsilon, start)
    t_hi = mixing_time(chain, epsilon, start)
    v = varentropy_correction(chain, epsilon, start, t_hi=t_lo)
    main = 2.0 / (gamma * epsilon ** 2) * (1.0 + math.sqrt(v))
    notes = []
    idi_g = idi_a = m_eps = None
    if rho_nonneg:
        metric = hop_metric(chain) if metric is None else metric
        # the worst-case window sits inside [0, t_hi]; use that range so m_eps covers every start
        lo_end = t_lo if not isinstance(start, str) or chain.transitive else 0.0
        m_eps = window_sup_psi(lo_end, t_hi, metric.d_sparsity, metric.diameter)
        idi_g = 1.0 / (gamma * epsilon ** 3) + math.sqrt(4.0 * m_eps / (gamma * epsilon ** 3))
        if alpha_lower is not None and alpha_lower > 0:
            idi_a = (1.0 / alpha_lower) * math.log(
                math.e * alpha_lower * (1.0 + m_eps) / (2.0 * epsilon ** 4))
    else:
        if require_certificate:
            raise MissingCertificate("IDI bounds need a rho >= 0 certificate")
        notes.append("IDI bounds omitted: no rho >= 0 certificate")
    return CutoffDiagnostics(
        epsilon=epsilon,
        t_mix_table={epsilon: t_hi, 1.0 - epsilon: t_lo},
        width=t_hi - t_lo,
        varentropy_correction=v,
        width_bound_thm_main=main,
        width_bound_idi_gamma=idi_g,
        width_bound_idi_alpha=idi_a,
        criterion_ratio=gamma * t_hi / (1.0 + math.sqrt(v)),
        product_condition=lam * t_hi,
        m_eps=m_eps,
        notes=notes,
    )


@dataclass
class PointwiseReport:
    holds: bool
    times: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    label: str = ""

    @property
    def worst_slack(self) -> float:
        s = self.rhs - self.lhs
        s = s[~np.isnan(s)]
        return float(s.min()) if s.size else math.inf


def roughness_check(chain: Chain, f0, time_grid, metric: MetricData | None = None,
                    tol: float = 1e-9):
    """Check Lip log P_t f and Lip log P*_t f against the universal roughness bounds."""
    metric = hop_metric(chain) if metric is None else metric
    f0 = np.asarray(f0, dtype=np.float64)
    times = np.asarray(time_grid, dtype=np.float64)
    d, diam = metric.d_sparsity, metric.diameter
    out = {}
    for direction, dd in (("forward", d), ("adjoint", d * d)):
        lhs = np.array([_lip_log(chain, semigroup_apply(chain, f0, t, direction)) for t in times])
        rhs = np.array([3.0 * math.log(dd) + 2.0 * log_plus(diam / t) for t in times])
        out[direction] = PointwiseReport(bool(np.all(lhs <= rhs + tol)), times, lhs, rhs,
                                         f"roughness-{direction}")
    return out


def idi_check(chain: Chain, f0, time_grid, metric: MetricData | None = None,
              tol: float = 1e-10) -> PointwiseReport:
    """Varent(f_t) <= psi(t) * (-dEnt/dt) with psi(t) = 16 t log d + 4 t log+(diam/t)."""
    metric = hop_metric(chain) if metric is None else metric
    times = np.asarray(time_grid, dtype=np.float64)
    curve = varentropy_curve(chain, f0, times)
    psi = np.array([psi_rate(t, metric.d_sparsity, metric.diameter) for t in times])
    rhs = psi * curve.entropy_slope
    lhs = curve.varentropy
    holds = bool(np.all(lhs <= rhs + tol * np.maximum(1.0, np.abs(rhs))))
    return PointwiseReport(holds, times, lhs, rhs, "idi")


def cutoff_sweep(family: str, sizes, epsilon: float = 0.25, builder=None) -> list:
    """Per size: t_mix(eps), t_mix(1-eps), their ratio, product condition and criterion ratio."""
    from .model_zoo import ModelSpec, build_model

    _check_half(epsilon)
    rows = []
    for n in sizes:
        try:
            spec = builder(n) if builder is not None else _family_spec(family, n)
            chain = build_model(spec).chain
            gamma = poincare_constant(chain)
            lam = spectral_gap(chain).gap
            t_lo = mixing_time(chain, 1.0 - epsilon)
            t_hi = mixing_time(chain, epsilon)
            v = varentropy_correction(chain, epsilon, t_hi=t_lo)
            rows.append({"n": n, "tmix_lo": t_lo, "tmix_hi": t_hi,
                         "ratio": t_lo / t_hi if t_hi > 0 else math.nan,
                         "product_condition": lam * t_hi,
                         "criterion_ratio": gamma * t_hi / (1.0 + math.sqrt(v)),
                         "error": ""})
        except Exception as exc:  # reported per row
            rows.append({"n": n, "tmix_lo": math.nan, "tmix_hi": math.nan, "ratio": math.nan,
                         "product_condition": math.nan, "criterion_ratio": math.nan,
                         "error": f"{type(exc).__name__}: {exc}"})
    return rows


FAMILIES = ("cube", "cycle", "rank_one", "complete")


def _family_spec(family: str, n: int):
    from .errors import InvalidParameters
    from .model_zoo import ModelSpec

    if family == "cube":
        return ModelSpec("hypercube", {"n": n})
    if family == "cycle":
        return ModelSpec("cycle", {"n": n})
    if family == "rank_one":
        # pi_min fixed at half the uniform mass
        return ModelSpec("rank_one", {"n": n, "pi_min": 0.5 / n})
    if family == "complete":
        return ModelSpec("rank_one", {"pi": [1.0 / n] * n})
    raise InvalidParameters(f"unknown family {family!r}")
