"""Exact optimal transport between distributions on a finite metric space.

W1 is solved as a min-cost flow on the bipartite graph between the two
supports, using successive shortest paths with Johnson potentials. Winf is
found by a threshold search over the distinct distances, each threshold
being tested by a max-flow.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import NotNormalized

SUPPORT_TOL = 1e-15
SATURATION_TOL = 1e-12


@dataclass
class TransportPlan:
    pairs: list = field(default_factory=list)  # (x, y, mass)
    cost: float = 0.0
    dual_potentials: np.ndarray | None = None


def _as_distribution(p, n=None) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or (n is not None and p.size != n):
        raise NotNormalized("distribution has the wrong shape")
    if not np.all(np.isfinite(p)) or p.min() < -1e-15:
        raise NotNormalized("distribution has negative or non-finite entries")
    if abs(p.sum() - 1.0) > 1e-12:
        raise NotNormalized(f"distribution sums to {float(p.sum())!r}")
    return p


def _dist_matrix(metric) -> np.ndarray:
    return np.asarray(getattr(metric, "dist", metric), dtype=np.float64)


def _min_cost_flow(supply, demand, cost):
    """Successive shortest paths on a complete bipartite graph.

    Returns the flow matrix. Arc capacities are unbounded; only the source
    and sink arcs (the masses) limit the flow.
    """
    k, l = cost.shape
    flow = np.zeros((k, l))
    rem_s = supply.copy()
    rem_d = demand.copy()
    pot = np.zeros(k + l)
    big = np.inf
    while True:
        active = rem_s > SUPPORT_TOL
        if not active.any() or not (rem_d > SUPPORT_TOL).any():
            break
        label = np.full(k + l, big)
        label[:k][active] = -pot[:k][active]
        parent = np.full(k + l, -1)
        done = np.zeros(k + l, dtype=bool)
        cand = label.copy()  # label with settled nodes masked out
        for _ in range(k + l):
            u = int(cand.argmin())
            if cand[u] == big:
                break
            done[u] = True
            cand[u] = big
            if u < k:
                nl = label[u] + cost[u, :] + pot[u] - pot[k:]
                upd = (~done[k:]) & (nl < label[k:])
                idx = upd.nonzero()[0]
                label[k + idx] = nl[idx]
                cand[k + idx] = nl[idx]
                parent[k + idx] = u
            else:
                y = u - k
                back = flow[:, y] > SUPPORT_TOL
                nl = label[u] - cost[:, y] + pot[u] - pot[:k]
                upd = back & (~done[:k]) & (nl < label[:k])
                idx = upd.nonzero()[0]
                label[idx] = nl[idx]
                cand[idx] = nl[idx]
                parent[idx] = u
        sinks = np.flatnonzero(rem_d > SUPPORT_TOL)
        reach = sinks[np.isfinite(label[k + sinks])]
        if reach.size == 0:
            break
        true_cost = label[k + reach] + pot[k + reach]
        y = int(reach[np.argmin(true_cost)])
        # recover the path and its bottleneck
        path = [k + y]
        while parent[path[-1]] >= 0:
            path.append(int(parent[path[-1]]))
        path.reverse()
        x0 = path[0]
        amount = min(rem_s[x0], rem_d[y])
        for a, b in zip(path[:-1], path[1:]):
            if a >= k:  # reverse arc sink a -> source b
                amount = min(amount, flow[b, a - k])
        for a, b in zip(path[:-1], path[1:]):
            if a < k:
                flow[a, b - k] += amount
            else:
                flow[b, a - k] -= amount
        rem_s[x0] -= amount
        rem_d[y] -= amount
        finite = np.isfinite(label)
        fill = label[finite].max() if finite.any() else 0.0
        pot += np.where(finite, label, fill)
    flow[flow < SUPPORT_TOL] = 0.0
    return flow


def _flow_duals(flow, cost):
    """Node potentials certifying optimality, by Bellman-Ford on the residual graph."""
    k, l = cost.shape
    ds = np.zeros(k)
    dd = np.zeros(l)
    used = flow > 0
    for _ in range(k + l + 2):
        new_d = np.minimum(dd, (ds[:, None] + cost).min(axis=0))
        back = np.where(used, new_d[None, :] - cost, np.inf)
        new_s = np.minimum(ds, back.min(axis=1))
        if np.array_equal(new_d, dd) and np.array_equal(new_s, ds):
            break
        ds, dd = new_s, new_d
    return ds, dd


def wasserstein_1(mu, nu, metric):
    """Exact W1 distance and an optimal plan with a 1-Lipschitz dual potential."""
    dist = _dist_matrix(metric)
    n = dist.shape[0]
    mu = _as_distribution(mu, n)
    nu = _as_distribution(nu, n)
    # mass shared by both sides stays put at zero cost; only the excess moves
    shared = np.minimum(mu, nu)
    excess = mu - shared
    deficit = nu - shared
    moved = excess.sum()
    stay = [(int(x), int(x), float(shared[x])) for x in np.flatnonzero(shared > SUPPORT_TOL)]
    if moved <= SUPPORT_TOL:
        return 0.0, TransportPlan(pairs=stay, cost=0.0, dual_potentials=np.zeros(n))
    xs = np.flatnonzero(excess > SUPPORT_TOL)
    ys = np.flatnonzero(deficit > SUPPORT_TOL)
    supply = excess[xs] / excess[xs].sum()
    demand = deficit[ys] / deficit[ys].sum()
    cost = dist[np.ix_(xs, ys)]
    flow = _min_cost_flow(supply, demand, cost)
    ds, dd = _flow_duals(flow, cost)
    # c-transform of the sink potentials gives a 1-Lipschitz function on all states
    phi = (dist[:, ys] - dd[None, :]).min(axis=1)
    pairs = stay + [(int(xs[i]), int(ys[j]), float(moved * flow[i, j]))
                    for i, j in zip(*np.nonzero(flow))]
    total = float(moved * (flow * cost).sum())
    return total, TransportPlan(pairs=pairs, cost=total, dual_potentials=phi)


def _max_flow_saturates(supply, demand, allowed) -> bool:
    """Augmenting-path max-flow; True iff all of the unit mass can be routed."""
    k, l = allowed.shape
    flow = np.zeros((k, l))
    rem_s = supply.copy()
    rem_d = demand.copy()
    shipped = 0.0
    target = supply.sum()
    while shipped < target - SATURATION_TOL:
        parent = {}
        queue = deque()
        for x in np.flatnonzero(rem_s > SUPPORT_TOL):
            parent[("s", int(x))] = None
            queue.append(("s", int(x)))
        end = None
        while queue and end is None:
            node = queue.popleft()
            side, i = node
            if side == "s":
                for j in np.flatnonzero(allowed[i]):
                    nxt = ("d", int(j))
                    if nxt not in parent:
                        parent[nxt] = node
                        if rem_d[j] > SUPPORT_TOL:
                            end = nxt
                            break
                        queue.append(nxt)
            else:
                for j in np.flatnonzero(flow[:, i] > SUPPORT_TOL):
                    nxt = ("s", int(j))
                    if nxt not in parent:
                        parent[nxt] = node
                        queue.append(nxt)
        if end is None:
            return False
        path = [end]
        while parent[path[-1]] is not None:
            path.append(parent[path[-1]])
        path.reverse()
        amount = min(rem_s[path[0][1]], rem_d[end[1]])
        for a, b in zip(path[:-1], path[1:]):
            if a[0] == "d":
                amount = min(amount, flow[b[1], a[1]])
        for a, b in zip(path[:-1], path[1:]):
            if a[0] == "s":
                flow[a[1], b[1]] += amount
            else:
                flow[b[1], a[1]] -= amount
        rem_s[path[0][1]] -= amount
        rem_d[end[1]] -= amount
        shipped += amount
    return True


def coupling_within(mu, nu, metric, radius: float) -> bool:
    """Whether some coupling of mu and nu is supported on {dist <= radius}."""
    dist = _dist_matrix(metric)
    xs = np.flatnonzero(np.asarray(mu) > SUPPORT_TOL)
    ys = np.flatnonzero(np.asarray(nu) > SUPPORT_TOL)
    allowed = dist[np.ix_(xs, ys)] <= radius
    return _max_flow_saturates(np.asarray(mu)[xs], np.asarray(nu)[ys], allowed)


def wasserstein_inf(mu, nu, metric) -> float:
    dist = _dist_matrix(metric)
    n = dist.shape[0]
    mu = _as_distribution(mu, n)
    nu = _as_distribution(nu, n)
    xs = np.flatnonzero(mu > SUPPORT_TOL)
    ys = np.flatnonzero(nu > SUPPORT_TOL)
    sub = dist[np.ix_(xs, ys)]
    levels = np.unique(sub)
    lo, hi = 0, len(levels) - 1  # the largest level is always feasible
    while lo < hi:
        mid = (lo + hi) // 2
        if _max_flow_saturates(mu[xs], nu[ys], sub <= levels[mid]):
            hi = mid
        else:
            lo = mid + 1
    return float(levels[hi])


def tv_via_transport(mu, nu) -> float:
    """Total variation as W1 under the trivial 0/1 metric."""
    mu = _as_distribution(mu)
    nu = _as_distribution(nu, mu.size)
    trivial = 1.0 - np.eye(mu.size)
    value, _ = wasserstein_1(mu, nu, trivial)
    return value
