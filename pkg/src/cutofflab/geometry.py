"""Hop-count geometry of the transition diagram."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import shortest_path

from .chain_core import ZERO, Chain
from .errors import InputError, NotWeaklyReversible


@dataclass(frozen=True)
class MetricData:
    dist: np.ndarray  # int32, symmetric
    diameter: int
    d_sparsity: float


def support_is_symmetric(chain: Chain) -> bool:
    m = chain.P.copy()
    m.data = (m.data > ZERO).astype(np.float64)
    m.eliminate_zeros()
    diff = m - m.T
    return diff.nnz == 0 or np.abs(diff.data).max() == 0


def hop_metric(chain: Chain) -> MetricData:
    """All-pairs hop distances by breadth-first search from every state."""
    m = chain.P.tocoo()
    keep = (m.row != m.col) & (m.data > ZERO)
    rows, cols = m.row[keep], m.col[keep]
    adj = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(chain.n, chain.n))
    asym = adj - adj.T
    if asym.nnz and np.abs(asym.data).max() > 0:
        coo = asym.tocoo()
        k = int(np.flatnonzero(coo.data > 0)[0])
        raise NotWeaklyReversible(
            f"edge ({coo.row[k]}, {coo.col[k]}) has no reverse transition")
    d = shortest_path(adj, method="D", directed=False, unweighted=True)
    if not np.all(np.isfinite(d)):
        raise InputError("support graph is disconnected")
    dist = d.astype(np.int32)
    probs = m.data[keep]
    dsp = float(1.0 / probs.min()) if probs.size else 1.0
    return MetricData(dist=dist, diameter=int(dist.max()), d_sparsity=dsp)


def lipschitz_seminorm(metric_or_chain, f) -> float:
    """Edge form of the Lipschitz constant: max over adjacent pairs of |f(x) - f(y)|."""
    f = np.asarray(f, dtype=np.float64)
    if isinstance(metric_or_chain, Chain):
        e = metric_or_chain.edges
        x, y = e[:, 0], e[:, 1]
    else:
        x, y = np.nonzero(metric_or_chain.dist == 1)
    if x.size == 0:
        return 0.0
    with np.errstate(invalid="ignore"):
        diffs = np.abs(f[x] - f[y])
    # inf - inf (two zero-density states) carries no slope
    diffs = np.where(np.isnan(diffs), 0.0, diffs)
    return float(diffs.max())
