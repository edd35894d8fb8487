"""Command-line interface: analyze, profile, sweep and verify."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import warnings

import numpy as np

from . import functionals
from .chain_core import dirac_density
from .cutoff import FAMILIES, cutoff_sweep, entropy_slope, varentropy_at, width_bounds
from .errors import CutoffLabError, InputError
from .functionals import (
    entropy,
    mixing_time,
    tv_of_density,
    varentropy,
)
from .geometry import lipschitz_seminorm
from .model_zoo import ModelSpec, build_model
from .verify import battery_passed, prepare, rho_certified, run_battery

DEFAULT_EPSILONS = (0.4, 0.25, 0.1, 1.0 / (2.0 * math.e))


# ---------------------------------------------------------------------------
# serialization

def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    return format(x, ".17g")


def dumps(obj) -> str:
    """JSON with sorted keys and 17 significant digits for every float."""
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        items = sorted((str(k), v) for k, v in obj.items())
        return "{" + ", ".join(f"{json.dumps(k)}: {dumps(v)}" for k, v in items) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(dumps(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _eps_key(eps: float) -> str:
    return repr(float(eps))  # shortest string that round-trips


# ---------------------------------------------------------------------------
# config handling

def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON: {exc}") from exc
    if not isinstance(cfg, dict) or "model" not in cfg:
        raise InputError("config must be an object with a 'model' entry")
    eps = cfg.get("epsilons", list(DEFAULT_EPSILONS))
    if not isinstance(eps, list) or not all(isinstance(e, (int, float)) for e in eps):
        raise InputError("'epsilons' must be a list of numbers")
    for e in eps:
        if not 0 < e < 0.5:
            raise InputError(f"epsilon {e} outside (0, 1/2)")
    cfg["epsilons"] = [float(e) for e in eps]
    cfg["seed"] = int(cfg.get("seed", 0))
    if cfg.get("dense_cap") is not None:
        functionals.DENSE_CAP = int(cfg["dense_cap"])
    return cfg


def _model_from(cfg):
    spec = ModelSpec.from_dict(cfg["model"])
    if "seed" not in cfg["model"]:
        spec.seed = cfg["seed"]
    return build_model(spec)


def _start(cfg, chain):
    s = cfg.get("start_state")
    if s is None:
        return "worst"
    s = int(s)
    if not 0 <= s < chain.n:
        raise InputError(f"start_state {s} out of range")
    return dirac_density(chain, s)


def _bracket(b):
    if b is None:
        return None
    return {"exact": b.exact, "lower": b.lower, "upper": b.upper, "residual": b.residual,
            "budget_exhausted": b.budget_exhausted}


def build_report(cfg) -> tuple:
    model = _model_from(cfg)
    chain = model.chain
    ctx = prepare(model, seed=cfg["seed"], seeds=int(cfg.get("seeds", 64)),
                  budget=int(cfg.get("budget", 400)))
    start = _start(cfg, chain)
    metric, curv = ctx.metric, ctx.curvature
    rho_ok = rho_certified(ctx)
    tmix, wmix, veps, crit = {}, {}, {}, {}
    for eps in cfg["epsilons"]:
        diag = width_bounds(chain, eps, gamma=ctx.gamma, lam=ctx.lam,
                            alpha_lower=ctx.alpha_lower, rho_nonneg=rho_ok, metric=metric,
                            start=start)
        tmix[_eps_key(eps)] = diag.t_mix_table[eps]
        wmix[_eps_key(eps)] = diag.width
        veps[_eps_key(eps)] = diag.varentropy_correction
        crit[_eps_key(eps)] = diag.criterion_ratio
    eps0 = min(cfg["epsilons"], key=lambda e: abs(e - 0.25))
    checks = run_battery(model, seed=cfg["seed"], ctx=ctx)
    report = {
        "model": model.spec.to_dict(),
        "name": model.name,
        "n": chain.n,
        "pi_min": chain.pi_min,
        "reversible": chain.reversible,
        "diameter": metric.diameter if metric is not None else None,
        "d_sparsity": metric.d_sparsity if metric is not None else None,
        "lambda": ctx.lam,
        "gamma": ctx.gamma,
        "alpha_bracket": _bracket(ctx.alpha),
        "beta_bracket": _bracket(ctx.beta),
        "kappa1": curv.kappa1 if curv is not None else None,
        "kappa1_argmin_edge": list(curv.kappa1_argmin_edge) if curv is not None else None,
        "sectional_nonneg": curv.sectional_nonneg if curv is not None else None,
        "rho": curv.rho if curv is not None else None,
        "rho_argmin_state": curv.rho_argmin_state if curv is not None else None,
        "analytic_lower_bounds": curv.analytic_lower_bounds if curv is not None else {},
        "t_mix": tmix,
        "w_mix": wmix,
        "V_eps": veps,
        "criterion_ratio": crit,
        "product_condition": ctx.lam * mixing_time(chain, eps0, start),
        "inequality_checks": {c.name: {"holds": c.status != "FAIL", "status": c.status,
                                       "slack": c.slack} for c in checks},
        "seed": cfg["seed"],
        "epsilons": cfg["epsilons"],
    }
    return report, checks


# ---------------------------------------------------------------------------
# commands

def _open_out(path):
    return sys.stdout if path in (None, "-") else open(path, "w", newline="")


def cmd_analyze(config_path, out_path=None) -> int:
    cfg = load_config(config_path)
    report, _ = build_report(cfg)
    out = _open_out(out_path)
    try:
        out.write(dumps(report) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def profile_rows(cfg, t0, t1, steps):
    if not (0 <= t0 < t1) or steps < 2:
        raise InputError("profile needs 0 <= t0 < t1 and steps >= 2")
    model = _model_from(cfg)
    chain = model.chain
    s = cfg.get("start_state")
    if s is None:
        starts = [0] if chain.transitive else list(range(chain.n))
    else:
        _start(cfg, chain)
        starts = [int(s)]
    rows = []
    for t in np.linspace(t0, t1, steps):
        dists = functionals.distributions_at(chain, starts, t)
        vals = {"dtv": 0.0, "entropy": 0.0, "varentropy": 0.0, "entropy_slope": 0.0,
                "roughness": 0.0}
        for r in dists:
            f = np.maximum(r / chain.pi, 0.0)
            with np.errstate(divide="ignore"):
                rough = lipschitz_seminorm(chain, np.log(f))
            cur = {"dtv": tv_of_density(chain, f), "entropy": entropy(chain, f),
                   "varentropy": varentropy(chain, f), "entropy_slope": entropy_slope(chain, f),
                   "roughness": rough}
            for k in vals:
                vals[k] = max(vals[k], cur[k])
        rows.append({"t": float(t), **vals})
    return rows


def _write_csv(rows, header, out_path):
    out = _open_out(out_path)
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt_float(r[h]) if isinstance(r[h], float) else r[h] for h in header])
    finally:
        if out is not sys.stdout:
            out.close()


PROFILE_HEADER = ["t", "dtv", "entropy", "varentropy", "entropy_slope", "roughness"]
SWEEP_HEADER = ["n", "tmix_lo", "tmix_hi", "ratio", "product_condition", "criterion_ratio"]


def cmd_profile(config_path, t0, t1, steps, out_csv=None) -> int:
    cfg = load_config(config_path)
    rows = profile_rows(cfg, t0, t1, steps)
    _write_csv(rows, PROFILE_HEADER, out_csv)
    return 0


def _parse_sizes(sizes):
    if isinstance(sizes, str):
        try:
            sizes = [int(s) for s in sizes.split(",") if s.strip()]
        except ValueError as exc:
            raise InputError(f"cannot parse sizes {sizes!r}") from exc
    if not sizes:
        raise InputError("empty size list")
    return list(sizes)


def cmd_sweep(family, sizes, epsilon=0.25, out_csv=None) -> int:
    if family not in FAMILIES:
        raise InputError(f"unknown family {family!r}; known: {', '.join(FAMILIES)}")
    rows = cutoff_sweep(family, _parse_sizes(sizes), epsilon)
    for r in rows:
        if r["error"]:
            print(f"n={r['n']}: {r['error']}", file=sys.stderr)
    _write_csv(rows, SWEEP_HEADER, out_csv)
    return 0


def cmd_verify(config_path) -> int:
    cfg = load_config(config_path)
    model = _model_from(cfg)
    results = run_battery(model, seed=cfg["seed"], seeds=int(cfg.get("seeds", 64)),
                          budget=int(cfg.get("budget", 400)))
    for r in results:
        print(r.line())
    return 0 if battery_passed(results) else 1


def _threads():
    raw = os.environ.get("CUTOFFLAB_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError as exc:
        raise InputError(f"CUTOFFLAB_THREADS must be a positive integer, got {raw!r}") from exc
    if n < 1:
        raise InputError("CUTOFFLAB_THREADS must be a positive integer")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cutofflab",
                                description="Mixing, curvature and cutoff diagnostics "
                                            "for finite Markov chains.")
    sub = p.add_subparsers(dest="command", required=True)
    a = sub.add_parser("analyze", help="write a full JSON analysis report")
    a.add_argument("config")
    a.add_argument("-o", "--out", default=None)
    pr = sub.add_parser("profile", help="CSV of distance, entropy and varentropy curves")
    pr.add_argument("config")
    pr.add_argument("--t0", type=float, default=0.0)
    pr.add_argument("--t1", type=float, required=True)
    pr.add_argument("--steps", type=int, default=50)
    pr.add_argument("-o", "--out", default=None)
    s = sub.add_parser("sweep", help="CSV of mixing-time trends across sizes")
    s.add_argument("family")
    s.add_argument("--sizes", required=True, help="comma separated, e.g. 6,8,10")
    s.add_argument("--epsilon", type=float, default=0.25)
    s.add_argument("-o", "--out", default=None)
    v = sub.add_parser("verify", help="run the inequality battery; exit 1 on any failure")
    v.add_argument("config")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _threads()
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            if args.command == "analyze":
                return cmd_analyze(args.config, args.out)
            if args.command == "profile":
                return cmd_profile(args.config, args.t0, args.t1, args.steps, args.out)
            if args.command == "sweep":
                return cmd_sweep(args.family, args.sizes, args.epsilon, args.out)
            return cmd_verify(args.config)
    except CutoffLabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
