"""Finite Markov chains: validation, stationary law, adjoint and semigroup.

All analysis is in continuous time, with generator ``L = T - Id`` and
semigroup ``P_t = exp(tL)`` evaluated by uniformization, i.e. as a
Poisson(t)-weighted sum of powers of ``T``.
"""

from __future__ import annotations

import math
from functools import cached_property
from typing import Iterable, Iterator

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import (
    InputError,
    NegativeTime,
    NotADensity,
    NotIrreducible,
    RowSumError,
    ThetaOutOfRange,
)

ROW_SUM_TOL = 1e-9
REVERSIBLE_TOL = 1e-12
POISSON_TAIL = 1e-14
DENSE_STATIONARY_CAP = 4096
ZERO = 1e-15


class TransitionMatrix:
    """Sparse row-stochastic matrix stored in CSR form."""

    def __init__(self, matrix):
        if sp.issparse(matrix):
            m = sp.csr_matrix(matrix, dtype=np.float64)
        else:
            m = sp.csr_matrix(np.asarray(matrix, dtype=np.float64))
        if m.shape[0] != m.shape[1]:
            raise InputError(f"transition matrix must be square, got {m.shape}")
        m.eliminate_zeros()
        m.sort_indices()
        self.matrix = m
        self.n = m.shape[0]

    @classmethod
    def from_entries(cls, n: int, entries: Iterable[tuple[int, int, float]]):
        rows, cols, vals = [], [], []
        for r, c, p in entries:
            if not (0 <= r < n and 0 <= c < n):
                raise InputError(f"entry ({r}, {c}) outside a {n}-state space")
            rows.append(r)
            cols.append(c)
            vals.append(float(p))
        m = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
        return cls(m)

    def entries(self) -> Iterator[tuple[int, int, float]]:
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        for k in order:
            yield int(coo.row[k]), int(coo.col[k]), float(coo.data[k])

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def __getitem__(self, key):
        return self.matrix[key]


def load_matrix_file(path) -> TransitionMatrix:
    """Read ``row col prob`` triplets (0-indexed, '#' starts a comment)."""
    triplets = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise InputError(f"{path}:{lineno}: expected 'row col prob'")
            try:
                triplets.append((int(parts[0]), int(parts[1]), float(parts[2])))
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from None
    if not triplets:
        raise InputError(f"{path}: no entries")
    n = 1 + max(max(r, c) for r, c, _ in triplets)
    tm = TransitionMatrix.from_entries(n, triplets)
    check_stochastic(tm)
    return tm


def check_stochastic(tm: TransitionMatrix) -> None:
    m = tm.matrix
    if m.nnz and (m.data.min() < 0 or not np.all(np.isfinite(m.data))):
        raise InputError("transition matrix has negative or non-finite entries")
    sums = np.asarray(m.sum(axis=1)).ravel()
    bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)
    if bad.size:
        x = int(bad[0])
        raise RowSumError(f"row {x} sums to {float(sums[x])!r}")


class Chain:
    """An irreducible chain with its stationary law and adjoint.

    Treated as immutable once built; derived quantities are cached.
    """

    def __init__(self, T: TransitionMatrix, pi: np.ndarray, reversible: bool,
                 adjoint: TransitionMatrix):
        self.T = T
        self.pi = pi
        self.pi_min = float(pi.min())
        self.reversible = reversible
        self.adjoint = adjoint
        # set by constructors that know a transitive symmetry group acts on the chain
        self.transitive = False

    @property
    def n(self) -> int:
        return self.T.n

    @property
    def P(self) -> sp.csr_matrix:
        return self.T.matrix

    @property
    def Pa(self) -> sp.csr_matrix:
        return self.adjoint.matrix

    @cached_property
    def PT(self) -> sp.csr_matrix:
        # transpose, used to push distributions forward
        return self.T.matrix.T.tocsr()

    @cached_property
    def edges(self) -> np.ndarray:
        """Off-diagonal support pairs (x, y) with T(x, y) > 0, row-major."""
        coo = self.P.tocoo()
        keep = (coo.row != coo.col) & (coo.data > ZERO)
        e = np.stack([coo.row[keep], coo.col[keep]], axis=1)
        order = np.lexsort((e[:, 1], e[:, 0]))
        return e[order]

    @cached_property
    def triplets(self):
        """(row, col, prob) arrays of the stored entries."""
        coo = self.P.tocoo()
        return coo.row, coo.col, coo.data

    def dense(self) -> np.ndarray:
        return self.T.to_dense()

    def __repr__(self):
        return f"Chain(n={self.n}, reversible={self.reversible}, pi_min={self.pi_min:.3g})"


def _stationary(m: sp.csr_matrix) -> np.ndarray:
    n = m.shape[0]
    if n <= DENSE_STATIONARY_CAP:
        # bordered system: pi (T - I) = 0 with the last equation replaced by sum(pi) = 1
        a = (m.toarray() - np.eye(n)).T
        a[-1, :] = 1.0
        b = np.zeros(n)
        b[-1] = 1.0
        pi = np.linalg.solve(a, b)
    else:
        lazy_t = (0.5 * (m + sp.identity(n, format="csr"))).T.tocsr()
        pi = np.full(n, 1.0 / n)
        for _ in range(10**6):
            new = lazy_t @ pi
            new /= new.sum()
            if np.abs(new - pi).max() < 1e-13:
                pi = new
                break
            pi = new
    pi = np.where(np.abs(pi) < 1e-300, 0.0, pi)
    return pi / pi.sum()


def build_chain(T) -> Chain:
    """Validate ``T`` and return the chain with its stationary law."""
    tm = T if isinstance(T, TransitionMatrix) else TransitionMatrix(T)
    check_stochastic(tm)
    m = tm.matrix
    ncomp, _ = connected_components(m, directed=True, connection="strong")
    if ncomp != 1:
        raise NotIrreducible(f"support graph has {ncomp} strongly connected components")
    pi = _stationary(m)
    if pi.min() <= 0:
        raise NotIrreducible("stationary law is not fully supported")
    resid = np.abs(m.T @ pi - pi).max()
    if resid > 1e-10:
        raise InputError(f"stationary solve inaccurate (residual {resid:.2e})")
    flow = sp.diags(pi) @ m
    asym = flow - flow.T
    reversible = bool(asym.nnz == 0 or np.abs(asym.data).max() <= REVERSIBLE_TOL)
    adj = sp.diags(1.0 / pi) @ m.T @ sp.diags(pi)
    return Chain(tm, pi, reversible, TransitionMatrix(adj))


def lazify(chain: Chain) -> Chain:
    n = chain.n
    lazy = 0.5 * (chain.P + sp.identity(n, format="csr"))
    lazy_adj = 0.5 * (chain.Pa + sp.identity(n, format="csr"))
    return Chain(TransitionMatrix(lazy), chain.pi.copy(), chain.reversible,
                 TransitionMatrix(lazy_adj))


def rank_one_perturb(chain: Chain, theta: float) -> Chain:
    if not 0.0 <= theta <= 1.0:
        raise ThetaOutOfRange(f"theta must lie in [0, 1], got {theta}")
    pi = chain.pi
    if theta == 0.0:
        return chain
    dense = (1.0 - theta) * chain.dense() + theta * pi[None, :]
    adj = (1.0 - theta) * chain.Pa.toarray() + theta * pi[None, :]
    return Chain(TransitionMatrix(dense), pi.copy(), chain.reversible, TransitionMatrix(adj))


def poisson_weights(t: float) -> np.ndarray:
    """Poisson(t) masses for k = 0..K, K the first index whose tail is below 1e-14."""
    if t < 0 or not math.isfinite(t):
        raise NegativeTime(f"time must be finite and non-negative, got {t}")
    if t == 0:
        return np.ones(1)
    logt = math.log(t)
    weights = []
    k = 0
    while True:
        w = math.exp(-t + k * logt - math.lgamma(k + 1))
        weights.append(w)
        # geometric bound on the remaining tail once past the mode
        nxt = w * t / (k + 1)
        if k + 2 > t and nxt * (k + 2) / (k + 2 - t) < POISSON_TAIL:
            break
        k += 1
    return np.asarray(weights)


def _uniformize(op, v: np.ndarray, t: float) -> np.ndarray:
    w = poisson_weights(t)
    out = np.zeros_like(v, dtype=np.float64)
    cur = np.array(v, dtype=np.float64, copy=True)
    for k, wk in enumerate(w):
        if wk > 0:
            out += wk * cur
        if k + 1 < len(w):
            cur = op @ cur
    # renormalize by the retained mass so that stochasticity is exact up to rounding
    return out / w.sum()


def semigroup_apply(chain: Chain, v, t: float, direction: str = "forward") -> np.ndarray:
    """Return ``P_t v`` (forward) or ``P_t* v`` (adjoint).

    ``v`` may be a vector or a matrix whose columns are transformed.
    """
    v = np.asarray(v, dtype=np.float64)
    if direction == "forward":
        op = chain.P
    elif direction == "adjoint":
        op = chain.Pa
    else:
        raise InputError(f"unknown direction {direction!r}")
    return _uniformize(op, v, t)


def distributions_at(chain: Chain, starts, t: float) -> np.ndarray:
    """Rows ``P_t(x, .)`` for each start ``x``; shape (len(starts), n)."""
    starts = np.atleast_1d(np.asarray(starts, dtype=int))
    m = np.zeros((chain.n, len(starts)))
    m[starts, np.arange(len(starts))] = 1.0
    return _uniformize(chain.PT, m, t).T


def dirac_density(chain: Chain, x: int) -> np.ndarray:
    f = np.zeros(chain.n)
    f[x] = 1.0 / chain.pi[x]
    return f


def check_density(chain: Chain, f) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    if f.shape != (chain.n,) or not np.all(np.isfinite(f)):
        raise NotADensity("density must be a finite vector with one entry per state")
    if f.min() < 0:
        raise NotADensity("density has negative entries")
    mass = float(chain.pi @ f)
    if abs(mass - 1.0) > 1e-12:
        raise NotADensity(f"density has pi-mean {float(mass)!r}, expected 1")
    return f


def generator_apply(chain: Chain, f, adjoint: bool = False) -> np.ndarray:
    op = chain.Pa if adjoint else chain.P
    f = np.asarray(f, dtype=np.float64)
    return op @ f - f


def dirichlet_form(chain: Chain, f, g) -> float:
    """``<f, -L g>`` in L2(pi)."""
    f = np.asarray(f, dtype=np.float64)
    return float(-(chain.pi * f) @ generator_apply(chain, g))


def _edge_arrays(chain: Chain):
    return chain.triplets


def carre_du_champ(chain: Chain, f, g=None) -> np.ndarray:
    """Gamma(f, g)(x) = 1/2 sum_y T(x,y) (f(x)-f(y)) (g(x)-g(y))."""
    f = np.asarray(f, dtype=np.float64)
    g = f if g is None else np.asarray(g, dtype=np.float64)
    r, c, p = _edge_arrays(chain)
    vals = 0.5 * p * (f[r] - f[c]) * (g[r] - g[c])
    return np.bincount(r, weights=vals, minlength=chain.n)


def carre_du_champ_2(chain: Chain, f, g=None) -> np.ndarray:
    """Iterated operator Gamma_2(f, g) = 1/2 (L Gamma(f,g) - Gamma(f, Lg) - Gamma(g, Lf))."""
    f = np.asarray(f, dtype=np.float64)
    g = f if g is None else np.asarray(g, dtype=np.float64)
    lf = generator_apply(chain, f)
    lg = generator_apply(chain, g)
    gam = carre_du_champ(chain, f, g)
    return 0.5 * (generator_apply(chain, gam)
                  - carre_du_champ(chain, f, lg) - carre_du_champ(chain, g, lf))
