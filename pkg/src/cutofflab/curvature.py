"""Discrete curvature: Ollivier-Ricci, sectional certificates, Bakry-Emery and coupling bounds."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .chain_core import Chain
from .errors import BracketExhausted, NegativeDelta, NotAGroupWalk
from .geometry import MetricData, hop_metric
from .transport import coupling_within, wasserstein_1

# stricter than the 1e-9 contract so the returned rho never overshoots the true value
FEAS_TOL = 1e-12
RHO_TOL = 1e-8


@dataclass
class CurvatureReport:
    kappa1: float
    kappa1_argmin_edge: tuple
    sectional_nonneg: dict  # {"forward": bool, "adjoint": bool}
    rho: float | None
    rho_argmin_state: int | None
    d_sparsity: float
    analytic_lower_bounds: dict = field(default_factory=dict)


def _undirected_edges(chain: Chain) -> np.ndarray:
    e = chain.edges
    return e[e[:, 0] < e[:, 1]]


def _lazy_rows(op, x, y, n):
    a = 0.5 * op.getrow(x).toarray().ravel()
    b = 0.5 * op.getrow(y).toarray().ravel()
    a[x] += 0.5
    b[y] += 0.5
    return a / a.sum(), b / b.sum()


def ollivier_kappa1(chain: Chain, metric: MetricData | None = None):
    """kappa_1 = 2 (1 - max over edges of W1 between lazy rows), with the worst edge."""
    metric = hop_metric(chain) if metric is None else metric
    worst, arg = -np.inf, None
    for x, y in _undirected_edges(chain):
        a, b = _lazy_rows(chain.P, x, y, chain.n)
        w, _ = wasserstein_1(a, b, metric)
        if w > worst:
            worst, arg = w, (int(x), int(y))
    return 2.0 * (1.0 - worst), arg


def sectional_nonneg_certificate(chain: Chain, metric: MetricData | None = None,
                                 adjoint: bool = False) -> bool:
    """True iff every pair of adjacent lazy rows admits a coupling staying within distance 1."""
    metric = hop_metric(chain) if metric is None else metric
    op = chain.Pa if adjoint else chain.P
    for x, y in _undirected_edges(chain):
        a, b = _lazy_rows(op, x, y, chain.n)
        if not coupling_within(a, b, metric, 1.0):
            return False
    return True


# ---------------------------------------------------------------------------
# Bakry-Emery

def _local_forms(chain: Chain):
    """Gamma and Gamma_2 quadratic forms of every state on the coordinates of its 2-ball.

    Returns stacked (n, m, m) arrays, zero padded to a common size m.
    """
    n = chain.n
    P = chain.P
    nbrs = [P.indices[P.indptr[x]:P.indptr[x + 1]] for x in range(n)]
    probs = [P.data[P.indptr[x]:P.indptr[x + 1]] for x in range(n)]
    balls = []
    for x in range(n):
        ball = set([x])
        for y in nbrs[x]:
            ball.add(int(y))
            ball.update(int(z) for z in nbrs[y])
        balls.append(np.array(sorted(ball)))
    m = max(len(b) for b in balls)
    A = np.zeros((n, m, m))
    B = np.zeros((n, m, m))

    for x in range(n):
        ball = balls[x]
        pos = {int(s): i for i, s in enumerate(ball)}

        def gamma_form(u):
            # A_u restricted to the ball of x; u's neighbours all lie in the ball
            out = np.zeros((m, m))
            iu = pos[u]
            for v, p in zip(nbrs[u], probs[u]):
                if v == u:
                    continue
                iv = pos[int(v)]
                out[iu, iu] += 0.5 * p
                out[iv, iv] += 0.5 * p
                out[iu, iv] -= 0.5 * p
                out[iv, iu] -= 0.5 * p
            return out

        def gen_row(u):
            row = np.zeros(m)
            for v, p in zip(nbrs[u], probs[u]):
                row[pos[int(v)]] += p
            row[pos[u]] -= 1.0
            return row

        ax = gamma_form(x)
        bx = np.zeros((m, m))
        lx = gen_row(x)
        cross = np.zeros((m, m))
        for z, p in zip(nbrs[x], probs[x]):
            z = int(z)
            if z == x:
                continue
            bx += 0.5 * p * (gamma_form(z) - ax)
            d = np.zeros(m)
            d[pos[x]] += 1.0
            d[pos[z]] -= 1.0
            cross += 0.5 * p * np.outer(d, lx - gen_row(z))
        bx -= 0.5 * (cross + cross.T)
        A[x] = ax
        B[x] = bx
    return A, B


def _min_eigs(A, B, r, chunk=256):
    out = np.empty(A.shape[0])
    for s in range(0, A.shape[0], chunk):
        out[s:s + chunk] = np.linalg.eigvalsh(B[s:s + chunk] - r * A[s:s + chunk])[:, 0]
    return out


def bakry_emery_rho(chain: Chain, forms=None):
    """Largest rho with Gamma_2 >= rho Gamma at every state, by global bisection.

    Returns (rho, state) where state is the binding state at the infeasible end.
    """
    A, B = _local_forms(chain) if forms is None else forms

    def feasible(r):
        eigs = _min_eigs(A, B, r)
        return eigs.min() >= -FEAS_TOL, eigs

    lo, hi = -8.0, 8.0
    for _ in range(40):
        if feasible(lo)[0]:
            break
        lo *= 2.0
    else:
        raise BracketExhausted("no feasible lower end for the curvature bracket")
    for _ in range(40):
        if not feasible(hi)[0]:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise BracketExhausted("curvature bracket does not close from above")
    while hi - lo > RHO_TOL:
        mid = 0.5 * (lo + hi)
        if feasible(mid)[0]:
            lo = mid
        else:
            hi = mid
    _, eigs = feasible(hi)
    return float(lo), int(np.argmin(eigs))


# ---------------------------------------------------------------------------
# structured models

@dataclass
class GlauberBound:
    kappa1_lower: float | None
    rho_lower: float | None
    min_delta: float
    valid: bool


def glauber_deltas(glauber):
    """delta_i(x) = c_i(x) - sum_{j != i} (c_j(x^i) - c_j(x))_+ for every state and site.

    Entries whose flip leaves the state space are NaN.
    """
    rates = glauber.rates
    nstate, nsite = rates.shape
    flip = glauber.flip  # (nstate, nsite) index of x^i, -1 when outside the space
    delta = np.full((nstate, nsite), np.nan)
    for i in range(nsite):
        ok = flip[:, i] >= 0
        xs = np.flatnonzero(ok)
        ys = flip[xs, i]
        inc = np.maximum(rates[ys] - rates[xs], 0.0)
        inc[:, i] = 0.0
        delta[xs, i] = rates[xs, i] - inc.sum(axis=1)
    return delta


def glauber_delta_bound(glauber) -> GlauberBound:
    delta = glauber_deltas(glauber)
    flip = glauber.flip
    pair = []
    for i in range(delta.shape[1]):
        xs = np.flatnonzero(flip[:, i] >= 0)
        pair.append(delta[xs, i] + delta[flip[xs, i], i])
    pair = np.concatenate(pair)
    min_delta = float(np.nanmin(delta))
    valid = min_delta >= -1e-15
    if not valid:
        warnings.warn(NegativeDelta(f"min delta is {min_delta:.3g}; coupling bound void"))
        return GlauberBound(None, None, min_delta, False)
    kappa = float(pair.min())
    rho = min_delta + 0.5 * kappa if glauber.rule == "sqrt" else None
    return GlauberBound(kappa, rho, min_delta, True)


def group_walk_certificates(group) -> dict:
    """Certificates that follow from the group structure of a random walk on an Abelian group."""
    if group is None or not hasattr(group, "moduli") or not hasattr(group, "steps"):
        raise NotAGroupWalk("model carries no group structure")
    moduli = np.asarray(group.moduli)
    steps = group.steps  # {element tuple: probability}
    # xy = yx holds for every pair in an Abelian group, so both conditions hold
    out = {"kappa_inf_nonneg": True, "rho_nonneg": True}
    support = [s for s, p in steps.items() if p > 0]
    self_inverse = all(np.all((2 * np.asarray(s)) % moduli == 0) for s in support)
    if self_inverse:
        nu_min = min(steps[s] for s in support)
        out["rho_lower"] = 2.0 * nu_min
        out["kappa1_lower"] = 2.0 * nu_min
    return out


def compute_curvature(chain: Chain, metric: MetricData | None = None, model=None,
                      with_rho: bool = True) -> CurvatureReport:
    metric = hop_metric(chain) if metric is None else metric
    k1, edge = ollivier_kappa1(chain, metric)
    sect = {"forward": sectional_nonneg_certificate(chain, metric),
            "adjoint": sectional_nonneg_certificate(chain, metric, adjoint=True)}
    rho, state = bakry_emery_rho(chain) if with_rho else (None, None)
    analytic = {}
    if model is not None:
        if getattr(model, "group", None) is not None:
            for k, v in group_walk_certificates(model.group).items():
                if not isinstance(v, bool):
                    analytic[k] = v
        if getattr(model, "glauber", None) is not None:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", NegativeDelta)
                gb = glauber_delta_bound(model.glauber)
            if gb.valid:
                analytic["glauber_kappa1_lower"] = gb.kappa1_lower
                if gb.rho_lower is not None:
                    analytic["glauber_rho_lower"] = gb.rho_lower
    return CurvatureReport(kappa1=k1, kappa1_argmin_edge=edge, sectional_nonneg=sect,
                           rho=rho, rho_argmin_state=state, d_sparsity=metric.d_sparsity,
                           analytic_lower_bounds=analytic)
