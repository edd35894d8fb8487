"""Concrete models with closed-form reference values and limit profiles."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import gammaln

from .chain_core import Chain, TransitionMatrix, build_chain, load_matrix_file
from .errors import InvalidParameters, NoKnownValues, NonpositiveTime, TooLarge

STATE_CAP = 1 << 16

KINDS = ("cycle", "hypercube", "abelian_cayley", "random_cayley", "rank_one",
         "glauber_ising", "glauber_hardcore", "zero_range_mf", "exclusion", "matrix_file")
RATE_RULES = ("gibbs", "metropolis", "sqrt")


@dataclass
class ModelSpec:
    kind: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    @classmethod
    def from_dict(cls, d) -> "ModelSpec":
        if not isinstance(d, dict) or "kind" not in d:
            raise InvalidParameters("model spec needs a 'kind'")
        params = d.get("params", {})
        if not isinstance(params, dict):
            raise InvalidParameters("'params' must be an object")
        return cls(kind=d["kind"], params=dict(params), seed=int(d.get("seed", 0)))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": self.params, "seed": self.seed}


@dataclass
class GroupData:
    moduli: tuple
    steps: dict  # element tuple -> probability


@dataclass
class GlauberData:
    configs: np.ndarray  # (N, n_sites) spin or occupation values
    rates: np.ndarray  # (N, n_sites) normalized flip rates
    flip: np.ndarray  # (N, n_sites) index of x^i, -1 outside the state space
    log_weight: np.ndarray  # unnormalized log pi
    rule: str
    scale: float  # the constant C the raw rates were divided by


@dataclass
class Model:
    spec: ModelSpec
    chain: Chain
    group: GroupData | None = None
    glauber: GlauberData | None = None
    scale: float = 1.0
    metadata: dict = field(default_factory=dict)

    @property
    def name(self) -> str:
        return model_name(self.spec)


def model_name(spec: ModelSpec) -> str:
    p = spec.params
    bits = [spec.kind]
    for key in ("n", "moduli", "n_sites", "graph", "m", "beta", "zeta", "rate_rule", "k"):
        if key in p:
            v = p[key]
            bits.append(f"{key}={'x'.join(map(str, v)) if isinstance(v, (list, tuple)) else v}")
    return ",".join(bits)


def _need(p, key, cast=int):
    if key not in p:
        raise InvalidParameters(f"missing parameter {key!r}")
    try:
        return cast(p[key])
    except (TypeError, ValueError) as exc:
        raise InvalidParameters(f"bad parameter {key!r}: {p[key]!r}") from exc


def _check_size(count):
    if count > STATE_CAP:
        raise TooLarge(f"{count} states exceed the cap {STATE_CAP}")


# ---------------------------------------------------------------------------
# group walks

def _radix(moduli):
    moduli = np.asarray(moduli, dtype=np.int64)
    weights = np.ones(len(moduli), dtype=np.int64)
    for i in range(len(moduli) - 2, -1, -1):
        weights[i] = weights[i + 1] * moduli[i + 1]
    return moduli, weights


def group_walk(moduli, steps: dict) -> Chain:
    """Random walk x -> x + s on Z_{m1} x ... x Z_{mk}, first coordinate most significant."""
    moduli, weights = _radix(moduli)
    size = int(np.prod(moduli))
    _check_size(size)
    idx = np.arange(size)
    coords = (idx[:, None] // weights[None, :]) % moduli[None, :]
    rows, cols, vals = [], [], []
    for s, p in steps.items():
        tgt = ((coords + np.asarray(s)[None, :]) % moduli[None, :]) @ weights
        rows.append(idx)
        cols.append(tgt)
        vals.append(np.full(size, p))
    m = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(size, size))
    m.sum_duplicates()
    chain = build_chain(TransitionMatrix(m))
    chain.transitive = True
    return chain


def _symmetric_steps(moduli, generators):
    moduli = np.asarray(moduli, dtype=np.int64)
    elems = set()
    for g in generators:
        g = np.asarray(g, dtype=np.int64) % moduli
        elems.add(tuple(int(v) for v in g))
        elems.add(tuple(int(v) for v in (-g) % moduli))
    elems = sorted(elems)
    return {e: 1.0 / len(elems) for e in elems}


def _cayley_model(spec, moduli, generators):
    moduli = tuple(int(m) for m in moduli)
    if not moduli or min(moduli) < 1:
        raise InvalidParameters("moduli must be positive integers")
    for g in generators:
        if len(g) != len(moduli):
            raise InvalidParameters(f"generator {g} has the wrong length")
    steps = _symmetric_steps(moduli, generators)
    group = GroupData(moduli=moduli, steps=steps)
    return Model(spec, group_walk(moduli, steps), group=group)


# ---------------------------------------------------------------------------
# spin systems

def _graph_edges(p, n_sites):
    g = p.get("graph", "path")
    if isinstance(g, str):
        if g == "path":
            return [(i, i + 1) for i in range(n_sites - 1)]
        if g == "cycle":
            return [(i, (i + 1) % n_sites) for i in range(n_sites)] if n_sites > 2 else [(0, 1)]
        if g == "complete":
            return [(i, j) for i in range(n_sites) for j in range(i + 1, n_sites)]
        if g == "empty":
            return []
        raise InvalidParameters(f"unknown graph {g!r}")
    edges = [(int(a), int(b)) for a, b in g]
    for a, b in edges:
        if not (0 <= a < n_sites and 0 <= b < n_sites) or a == b:
            raise InvalidParameters(f"bad edge ({a}, {b})")
    return edges


def _bits(n_sites):
    idx = np.arange(1 << n_sites)
    shifts = np.arange(n_sites - 1, -1, -1)
    return (idx[:, None] >> shifts[None, :]) & 1


def _rate(rule, log_ratio):
    if rule == "gibbs":
        # r/(1+r) written as a logistic function
        return 0.5 * (1.0 + np.tanh(0.5 * log_ratio))
    if rule == "metropolis":
        return np.exp(np.minimum(log_ratio, 0.0))
    if rule == "sqrt":
        return np.exp(0.5 * log_ratio)
    raise InvalidParameters(f"unknown rate rule {rule!r}")


def glauber_chain(configs, log_weight, rule, allowed=None):
    """Single-site flip dynamics on a subset of {0,1}^n (binary order) for the law exp(log_weight).

    configs: (N, n) 0/1 array of the states kept, in increasing binary order.
    """
    nstate, nsite = configs.shape
    codes = configs @ (1 << np.arange(nsite - 1, -1, -1))
    lookup = {int(c): i for i, c in enumerate(codes)}
    flip = np.full((nstate, nsite), -1, dtype=np.int64)
    raw = np.zeros((nstate, nsite))
    for i in range(nsite):
        tgt = codes ^ (1 << (nsite - 1 - i))
        j = np.array([lookup.get(int(c), -1) for c in tgt])
        ok = j >= 0
        flip[ok, i] = j[ok]
        raw[ok, i] = _rate(rule, log_weight[j[ok]] - log_weight[ok])
    scale = float(raw.sum(axis=1).max())
    rates = raw / scale
    rows = np.repeat(np.arange(nstate), nsite)
    cols = flip.ravel()
    vals = rates.ravel()
    keep = cols >= 0
    off = sp.csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=(nstate, nstate))
    diag = sp.diags(1.0 - rates.sum(axis=1))
    m = (off + diag).tocsr()
    m.eliminate_zeros()
    data = GlauberData(configs=configs, rates=rates, flip=flip, log_weight=log_weight,
                       rule=rule, scale=scale)
    return build_chain(TransitionMatrix(m)), data


def _ising(spec):
    p = spec.params
    n_sites = _need(p, "n_sites")
    beta = _need(p, "beta", float)
    rule = p.get("rate_rule", "gibbs")
    if n_sites < 1 or beta < 0:
        raise InvalidParameters("ising needs n_sites >= 1 and beta >= 0")
    if rule not in RATE_RULES:
        raise InvalidParameters(f"unknown rate rule {rule!r}")
    _check_size(1 << n_sites)
    G = np.zeros((n_sites, n_sites))
    if p.get("graph") == "complete":
        # Curie-Weiss: G_ij = beta / (2 n)
        G[:] = beta / (2.0 * n_sites)
        np.fill_diagonal(G, 0.0)
    else:
        for a, b in _graph_edges(p, n_sites):
            G[a, b] += beta / 2.0
            G[b, a] += beta / 2.0
    configs = _bits(n_sites)
    spins = 2 * configs - 1
    log_w = np.einsum("xi,ij,xj->x", spins, G, spins)
    chain, data = glauber_chain(configs, log_w, rule)
    return Model(spec, chain, glauber=data, scale=data.scale,
                 metadata={"interaction": G})


def _hardcore(spec):
    p = spec.params
    n_sites = _need(p, "n_sites")
    zeta = _need(p, "zeta", float)
    rule = p.get("rate_rule", "gibbs")
    if n_sites < 1 or zeta <= 0:
        raise InvalidParameters("hardcore needs n_sites >= 1 and zeta > 0")
    if rule not in RATE_RULES:
        raise InvalidParameters(f"unknown rate rule {rule!r}")
    _check_size(1 << n_sites)
    edges = _graph_edges(p, n_sites)
    configs = _bits(n_sites)
    ok = np.ones(len(configs), dtype=bool)
    for a, b in edges:
        ok &= ~((configs[:, a] == 1) & (configs[:, b] == 1))
    configs = configs[ok]
    log_w = configs.sum(axis=1) * math.log(zeta)
    chain, data = glauber_chain(configs, log_w, rule)
    return Model(spec, chain, glauber=data, scale=data.scale)


# ---------------------------------------------------------------------------
# particle systems

def _compositions(m, n):
    """All x in Z_+^n with sum m, in lexicographic order."""
    if n == 1:
        return [(m,)]
    out = []
    for first in range(m + 1):
        for rest in _compositions(m - first, n - 1):
            out.append((first,) + rest)
    return out


def _geometry_matrix(p, n):
    if "G" in p:
        G = np.asarray(p["G"], dtype=np.float64)
        if G.shape != (n, n) or np.any(G < 0) or np.abs(G.sum(axis=1) - 1).max() > 1e-9:
            raise InvalidParameters("G must be an n x n stochastic matrix")
        return G
    edges = _graph_edges({"graph": p.get("graph", "cycle")}, n)
    A = np.zeros((n, n))
    for a, b in edges:
        A[a, b] = A[b, a] = 1.0
    deg = A.sum(axis=1)
    if np.any(deg == 0):
        raise InvalidParameters("geometry graph has isolated sites")
    return A / deg[:, None]


def _particle_chain(states, moves):
    """Chain from a list of states and a function state -> [(target state, rate)]."""
    index = {s: i for i, s in enumerate(states)}
    rows, cols, vals = [], [], []
    for s in states:
        for tgt, rate in moves(s):
            if rate > 0:
                rows.append(index[s])
                cols.append(index[tgt])
                vals.append(rate)
    n = len(states)
    off = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    off.sum_duplicates()
    total = np.asarray(off.sum(axis=1)).ravel()
    scale = max(1.0, float(total.max()))
    off = off / scale
    m = (off + sp.diags(1.0 - total / scale)).tocsr()
    m.eliminate_zeros()
    return build_chain(TransitionMatrix(m)), scale


def _exclusion(spec):
    p = spec.params
    n = _need(p, "n")
    m = _need(p, "m")
    if not 0 < m < n:
        raise InvalidParameters("exclusion needs 0 < m < n")
    _check_size(math.comb(n, m))
    G = _geometry_matrix(p, n)
    if np.abs(G - G.T).max() > 1e-12:
        raise InvalidParameters("exclusion needs a symmetric G")
    states = [s for s in itertools.product((0, 1), repeat=n) if sum(s) == m]

    def moves(x):
        for i in range(n):
            if not x[i]:
                continue
            for j in range(n):
                if i != j and not x[j] and G[i, j] > 0:
                    y = list(x)
                    y[i], y[j] = 0, 1
                    yield tuple(y), G[i, j] / n

    chain, scale = _particle_chain(states, moves)
    return Model(spec, chain, scale=scale, metadata={"G": G, "states": states})


def _zero_range_rates(p, n, m):
    r = p.get("rates", "linear")
    ks = np.arange(m + 1, dtype=np.float64)
    if r == "linear":
        table = ks.copy()
    elif r == "constant":
        table = (ks > 0).astype(np.float64)
    else:
        vals = np.asarray(r, dtype=np.float64)
        if vals.ndim != 1 or vals.size < m or np.any(vals[:m] <= 0):
            raise InvalidParameters("rates must list r(1..m) > 0")
        table = np.concatenate([[0.0], vals[:m]])
    return np.tile(table, (n, 1))


def _zero_range(spec):
    p = spec.params
    n = _need(p, "n")
    m = _need(p, "m")
    if n < 2 or m < 1:
        raise InvalidParameters("zero-range needs n >= 2 sites and m >= 1 particles")
    _check_size(math.comb(n + m - 1, m))
    G = np.full((n, n), 1.0 / n)
    rates = _zero_range_rates(p, n, m)
    states = _compositions(m, n)

    def moves(x):
        for i in range(n):
            if x[i] == 0:
                continue
            for j in range(n):
                if i != j:
                    y = list(x)
                    y[i] -= 1
                    y[j] += 1
                    yield tuple(y), G[i, j] * rates[i, x[i]] / n

    chain, scale = _particle_chain(states, moves)
    return Model(spec, chain, scale=scale,
                 metadata={"G": G, "rates": rates, "states": states})


def zero_range_product_law(model: Model) -> np.ndarray:
    """pi(x) proportional to prod_i p_i^{x_i} / (r_i(1) ... r_i(x_i))."""
    G = model.metadata["G"]
    rates = model.metadata["rates"]
    w, v = np.linalg.eig(G.T)
    p = np.real(v[:, np.argmin(np.abs(w - 1))])
    p = p / p.sum()
    logs = []
    for x in model.metadata["states"]:
        s = 0.0
        for i, k in enumerate(x):
            s += k * math.log(p[i]) - float(np.log(rates[i, 1:k + 1]).sum())
        logs.append(s)
    logs = np.asarray(logs)
    out = np.exp(logs - logs.max())
    return out / out.sum()


# ---------------------------------------------------------------------------

def build_model(spec) -> Model:
    if isinstance(spec, dict):
        spec = ModelSpec.from_dict(spec)
    p = spec.params
    kind = spec.kind
    if kind == "cycle":
        n = _need(p, "n")
        if n < 2:
            raise InvalidParameters("cycle needs n >= 2")
        return _cayley_model(spec, (n,), [(1,)])
    if kind == "hypercube":
        n = _need(p, "n")
        if n < 1:
            raise InvalidParameters("hypercube needs n >= 1")
        _check_size(1 << n)
        gens = [tuple(int(i == j) for j in range(n)) for i in range(n)]
        return _cayley_model(spec, (2,) * n, gens)
    if kind == "abelian_cayley":
        moduli = p.get("moduli")
        gens = p.get("generators")
        if not moduli or not gens:
            raise InvalidParameters("abelian_cayley needs moduli and generators")
        return _cayley_model(spec, moduli, gens)
    if kind == "random_cayley":
        moduli = tuple(int(v) for v in p.get("moduli", ()))
        k = _need(p, "k")
        if not moduli:
            raise InvalidParameters("random_cayley needs moduli")
        size = int(np.prod(moduli))
        if not 1 <= k < size:
            raise InvalidParameters("random_cayley needs 1 <= k < group order")
        rng = np.random.default_rng(spec.seed)
        picks = rng.choice(np.arange(1, size), size=k, replace=False)
        mod, weights = _radix(moduli)
        gens = [tuple(int(v) for v in (int(c) // weights) % mod) for c in sorted(picks)]
        model = _cayley_model(spec, moduli, gens)
        model.metadata["generators"] = gens
        return model
    if kind == "rank_one":
        if "pi" in p:
            pi = np.asarray(p["pi"], dtype=np.float64)
        else:
            n = _need(p, "n")
            pmin = _need(p, "pi_min", float)
            if n < 2 or not 0 < pmin <= 1.0 / n:
                raise InvalidParameters("rank_one needs n >= 2 and 0 < pi_min <= 1/n")
            pi = np.concatenate([[pmin], np.full(n - 1, (1 - pmin) / (n - 1))])
        if pi.ndim != 1 or np.any(pi <= 0) or abs(pi.sum() - 1) > 1e-12:
            raise InvalidParameters("rank_one needs a positive probability vector")
        return Model(spec, build_chain(np.tile(pi, (pi.size, 1))))
    if kind == "glauber_ising":
        return _ising(spec)
    if kind == "glauber_hardcore":
        return _hardcore(spec)
    if kind == "zero_range_mf":
        return _zero_range(spec)
    if kind == "exclusion":
        return _exclusion(spec)
    if kind == "matrix_file":
        path = p.get("path")
        if not path:
            raise InvalidParameters("matrix_file needs a path")
        return Model(spec, build_chain(load_matrix_file(path)))
    raise InvalidParameters(f"unknown model kind {kind!r}")


def product_chain(a: Chain, b: Chain) -> Chain:
    """Chain on the product space with L = (L_a (x) I + I (x) L_b) / 2."""
    ia = sp.identity(a.n, format="csr")
    ib = sp.identity(b.n, format="csr")
    m = 0.5 * (sp.kron(a.P, ib) + sp.kron(ia, b.P))
    return build_chain(TransitionMatrix(m.tocsr()))


# ---------------------------------------------------------------------------
# reference values

def reference_values(spec) -> dict:
    if isinstance(spec, dict):
        spec = ModelSpec.from_dict(spec)
    p = spec.params
    if spec.kind == "hypercube":
        n = _need(p, "n")
        return {"gamma": 2 / n, "lambda": 2 / n, "alpha": 4 / n, "beta": 1 / n,
                "kappa1": 2 / n, "rho": 2 / n, "diameter": n, "d": n}
    if spec.kind == "cycle":
        n = _need(p, "n")
        gap = 1 - math.cos(2 * math.pi / n)
        out = {"gamma": gap, "lambda": gap}
        if n % 2 == 0 and n >= 4:
            out.update(alpha=2 * gap, beta=gap / 2)
        return out
    if spec.kind == "rank_one":
        pi = build_model(spec).chain.pi
        ps = float(pi.min())
        # 1/2 + pi* from Gamma f = (1+f^2)/2, Gamma_2 f = (3+f^2)/4 and max f^2 = (1-pi*)/pi*
        return {"lambda": 1.0, "gamma": 1.0, "kappa1": 1.0, "alpha_lower": 1.0,
                "alpha_upper": 2.0, "rho": 0.5 + ps, "d": 1 / ps}
    raise NoKnownValues(f"no closed-form values for kind {spec.kind!r}")


# ---------------------------------------------------------------------------
# closed-form profiles

def cube_exact_tv(n: int, t: float) -> float:
    """Worst-case TV of the walk on {0,1}^n at time t, summing over Hamming levels."""
    if t < 0:
        raise NonpositiveTime("time must be non-negative")
    k = np.arange(n + 1, dtype=np.float64)
    logc = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1) - n * math.log(2.0)
    u = math.exp(-2.0 * t / n)
    with np.errstate(divide="ignore", invalid="ignore"):
        logdens = (n - k) * math.log1p(u) + k * (math.log1p(-u) if u < 1 else -np.inf)
    logdens = np.where(k == 0, (n - k) * math.log1p(u), logdens)
    gap = -np.expm1(np.minimum(logdens, 0.0))
    gap = np.where(logdens < 0, gap, 0.0)
    return float(np.sum(np.exp(logc) * gap))


def cube_profile_F(s: float) -> float:
    return math.erf(math.exp(-2.0 * s) / (2.0 * math.sqrt(2.0)))


def _theta_density(z: float, t: float) -> float:
    norm = 1.0 / math.sqrt(2 * math.pi * t)
    total = norm * math.exp(-z * z / (2 * t))
    k = 1
    while True:
        a = norm * math.exp(-(z - k) ** 2 / (2 * t))
        b = norm * math.exp(-(z + k) ** 2 / (2 * t))
        total += a + b
        if a + b < 1e-16:
            break
        k += 1
    return total


def _adaptive_simpson(fun, a, b, tol, depth=50):
    def simpson(fa, fm, fb, a, b):
        return (b - a) * (fa + 4 * fm + fb) / 6

    def rec(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = fun(lm), fun(rm)
        left = simpson(fa, flm, fm, a, m)
        right = simpson(fm, frm, fb, m, b)
        if depth <= 0 or abs(left + right - whole) <= 15 * tol:
            return left + right + (left + right - whole) / 15
        return (rec(a, m, fa, flm, fm, left, tol / 2, depth - 1)
                + rec(m, b, fm, frm, fb, right, tol / 2, depth - 1))

    fa, fb, fm = fun(a), fun(b), fun(0.5 * (a + b))
    return rec(a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, depth)


def cycle_profile_F(t: float) -> float:
    """Limit profile of the cycle: integral over [0,1] of (1 - theta density)_+."""
    if t <= 0:
        raise NonpositiveTime("the cycle profile needs t > 0")
    return _adaptive_simpson(lambda z: max(0.0, 1.0 - _theta_density(z, t)), 0.0, 1.0, 1e-9)


def cube_varentropy_closed_form(n: int, t: float) -> float:
    if t <= 0:
        return math.inf
    u = math.exp(-2.0 * t / n)
    return (n / 4) * (1 - u * u) * math.log((1 + u) / (1 - u)) ** 2


# canonical zoo: every model has at most 1024 states
ZOO = [
    ModelSpec("cycle", {"n": 10}),
    ModelSpec("cycle", {"n": 12}),
    ModelSpec("hypercube", {"n": 6}),
    ModelSpec("hypercube", {"n": 8}),
    ModelSpec("abelian_cayley", {"moduli": [6, 4], "generators": [[1, 0], [0, 1]]}),
    ModelSpec("random_cayley", {"moduli": [31], "k": 3}, seed=7),
    ModelSpec("rank_one", {"n": 6, "pi_min": 0.1}),
    ModelSpec("glauber_ising", {"n_sites": 4, "graph": "path", "beta": 0.05,
                                "rate_rule": "gibbs"}),
    ModelSpec("glauber_ising", {"n_sites": 6, "graph": "complete", "beta": 0.5,
                                "rate_rule": "metropolis"}),
    ModelSpec("glauber_hardcore", {"n_sites": 4, "graph": "path", "zeta": 0.4,
                                   "rate_rule": "sqrt"}),
    ModelSpec("zero_range_mf", {"n": 3, "m": 4, "rates": "linear"}),
    ModelSpec("exclusion", {"n": 6, "m": 3, "graph": "cycle"}),
]
