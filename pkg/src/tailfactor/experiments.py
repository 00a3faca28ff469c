"""Simulation-study protocols: generate, fit, summarize.

Each experiment returns a dict with per-replicate estimate tables and
summary statistics, and is reproducible from (name, scale, seed).  The
block-maxima studies use the factor model's exact margins ("margins
known"), the threshold studies standardize to unit Pareto with exact
margins and exact thresholds; replicate coordinates are drawn per dataset
for the tables and held fixed for the anchored-gate study.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from functools import partial

import numpy as np
from numpy.random import Generator, Philox

from .errors import DomainError
from .kernels import FactorLaw, std_normal_cdf
from . import inference as inf
from . import simulate as sim

__all__ = ["run_experiment", "EXPERIMENTS"]

_BM_BLOCK = 10_000  # default block size approximating the EV limit

# box constraints for the spatial studies: generous around the design
# values but short of the long near-unidentified ridge in (p1, alpha0)
_STUDY_BOUNDS = {
    "p1": (0.1, 6.0), "p2": (0.3, 2.0), "alpha0": (0.05, 2.5),
    "beta0": (-5.0, 5.0), "beta1": (-5.0, 5.0), "beta2": (-5.0, 5.0),
    "rho_star": (0.05, 0.99),
}


def _rng(seed, tag):
    return Generator(Philox(key=[np.uint64(seed), np.uint64(tag)]))


def _map_replicates(fn, n_rep, seed, threads=1):
    args = [(seed, r) for r in range(n_rep)]
    if threads <= 1:
        return [fn(a) for a in args]
    with ProcessPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, args))


def _rmse(estimates, truth):
    a = np.asarray(estimates, dtype=float)
    return {k: float(np.sqrt(np.mean((a[:, i] - truth[k]) ** 2)))
            for i, k in enumerate(truth)}


# ---------------------------------------------------------------------------
# table 1: pairwise estimation for the shared-gate family, block maxima

_TAB1_TRUTH = {"p1": 1.5, "p2": 1.0, "alpha0": 1.0 / 3.0,
               "beta0": 0.5, "beta1": 1.5, "beta2": -0.5}


def _table1_rep(arg, d=20, n_max=250, family="shared-gate", rho_star=None,
                triples=None):
    seed, r = arg
    rng = _rng(seed, 0x7431_0000 + r)
    coords = rng.uniform(0.0, 1.0, (d, 2))
    sp = inf.SpatialParam(coords, p1=_TAB1_TRUTH["p1"], p2=_TAB1_TRUTH["p2"],
                          beta=(_TAB1_TRUTH["beta0"], _TAB1_TRUTH["beta1"],
                                _TAB1_TRUTH["beta2"]),
                          alpha0=_TAB1_TRUTH["alpha0"], rho_star=rho_star)
    model = inf.build_model(family, sp)
    spec = sim.spec_for_model(model)
    raw = sim.block_maxima(spec, n_max, _BM_BLOCK,
                           seed=int(rng.integers(2**62)))
    U = sim.uniform_from_known_margins(raw, spec, block_size=_BM_BLOCK)
    init = dict(_TAB1_TRUTH)
    if rho_star is not None:
        init["rho_star"] = rho_star
    cfg = inf.FitConfig(objective="pairwise-bm", init=init,
                        bounds=dict(_STUDY_BOUNDS),
                        restarts=1, f_tol=1e-6, x_tol=1e-5, max_iter=1000,
                        seed=r)
    rep = inf.fit(U, family, cfg, coords=coords)
    out = {"replicate": r, "converged": rep.converged, **rep.theta}
    if triples is not None:
        cfg3 = inf.FitConfig(objective="triplewise-bm", init=dict(init),
                             bounds=dict(_STUDY_BOUNDS),
                             restarts=1, f_tol=1e-5, x_tol=1e-4,
                             max_iter=600, seed=r, triples=triples)
        rep3 = inf.fit(U, family, cfg3, coords=coords)
        out["triplewise"] = {"converged": rep3.converged, **rep3.theta}
    return out


def run_table1(scale="desk", seed=0, threads=1):
    """Pairwise-likelihood RMSEs for the shared-gate block-maxima study."""
    n_rep = 50 if scale == "desk" else 500
    rows = _map_replicates(_table1_rep, n_rep, seed, threads)
    est = [[row[k] for k in _TAB1_TRUTH] for row in rows]
    summary = _rmse(est, _TAB1_TRUTH)
    reference = {"alpha0": 0.07, "beta0": 0.11, "beta1": 0.06, "beta2": 0.02}
    return {
        "name": "table1", "scale": scale, "seed": seed,
        "truth": _TAB1_TRUTH, "columns": list(_TAB1_TRUTH),
        "replicates": rows, "rmse": summary,
        "reference_rmse_n250": reference,
    }


# ---------------------------------------------------------------------------
# table 2: pairwise vs triplewise for the equicorrelated-gate family

_TAB2_RHO_STAR = 0.8


def _table2_rep(arg):
    return _table1_rep(arg, family="equi-gate", rho_star=_TAB2_RHO_STAR,
                       triples=120)


def run_table2(scale="desk", seed=0, threads=1):
    """Pairwise vs triplewise RMSES for the equicorrelated-gate study."""
    n_rep = 25 if scale == "desk" else 500
    rows = _map_replicates(_table2_rep, n_rep, seed, threads)
    truth = dict(_TAB1_TRUTH)
    truth["rho_star"] = _TAB2_RHO_STAR
    pair_est = [[row[k] for k in truth] for row in rows]
    tri_est = [[row["triplewise"][k] for k in truth] for row in rows]
    return {
        "name": "table2", "scale": scale, "seed": seed,
        "truth": truth, "columns": list(truth),
        "replicates": rows,
        "rmse_pairwise": _rmse(pair_est, truth),
        "rmse_triplewise": _rmse(tri_est, truth),
        "reference": "pairwise vs triplewise alpha RMSE 0.35 vs 0.10 (d=20, N=250)",
    }


# ---------------------------------------------------------------------------
# anchored-gate threshold study (boxplots over replicates)

_FIG4_TRUTH = {"p1": 0.5, "p2": 1.5, "alpha0": 1.2, "c0": 0.8}
# fixed site layout: four sites close to the anchor (gate-dominated
# margins keep the finite-threshold approximation honest) plus one
# distant contrast site that identifies the gate level
_FIG4_COORDS = np.array([[0.50, 0.52], [0.42, 0.45], [0.62, 0.55],
                         [0.50, 0.72], [0.78, 0.42]])


def fig4_design(d=5):
    return _FIG4_COORDS.copy(), (0.5, 0.5)


def _fig4_rep(arg, n=200_000, quantile=0.995, d=5):
    seed, r = arg
    coords, s0 = fig4_design(d)
    sp = inf.SpatialParam(coords, p1=_FIG4_TRUTH["p1"], p2=_FIG4_TRUTH["p2"],
                          alpha0=_FIG4_TRUTH["alpha0"], s0=s0,
                          c0=_FIG4_TRUTH["c0"])
    spec = sim.spec_for_model(inf.build_model("esn-hr", sp))
    raw = sim.sample_factor(spec, n, seed=(seed * 977 + r) & (2**62 - 1))
    U = sim.uniform_from_known_margins(raw, spec)
    Y = sim.pot_extract(sim.to_unit_pareto(U), quantile, thresholds="exact")
    # coarse scan over the gate level, then a free refinement
    best = None
    for c0g in (0.0, 0.8, 1.6):
        cfg = inf.FitConfig(objective="mgpd-full",
                            init={"p1": 0.8, "p2": 1.2, "alpha0": 1.0},
                            fixed={"c0": c0g}, restarts=1, f_tol=1e-3,
                            x_tol=1e-3, max_iter=220, seed=r)
        cand = inf.fit(Y, "esn-hr", cfg, coords=coords, s0=s0)
        if best is None or cand.loglik > best.loglik:
            best = cand
    init = dict(best.theta)
    init["c0"] = best.fixed["c0"]
    cfg = inf.FitConfig(objective="mgpd-full", init=init, restarts=1,
                        f_tol=1e-4, x_tol=1e-4, max_iter=900, seed=r)
    rep = inf.fit(Y, "esn-hr", cfg, coords=coords, s0=s0)
    return {"replicate": r, "quantile": quantile, "m": Y.seed_info["m"],
            "converged": rep.converged, **rep.theta}


def run_fig4(scale="desk", seed=0, threads=1):
    """Threshold study for the anchored-gate (ESN) family at d = 5."""
    n_rep = 25 if scale == "desk" else 500
    quantiles = (0.995,) if scale == "desk" else (0.99, 0.995, 0.999)
    rows = []
    for q in quantiles:
        rows += _map_replicates(partial(_fig4_rep, quantile=q),
                                n_rep, seed, threads)
    names = list(_FIG4_TRUTH)
    medians = {}
    for q in quantiles:
        sub = np.array([[row[k] for k in names] for row in rows
                        if row["quantile"] == q])
        medians[q] = {k: float(np.median(sub[:, i]))
                      for i, k in enumerate(names)}
    return {
        "name": "fig4", "scale": scale, "seed": seed, "truth": _FIG4_TRUTH,
        "columns": names, "replicates": rows, "medians": medians,
    }


# ---------------------------------------------------------------------------
# bivariate epsilon-likelihood threshold study

_FIG5_LAMBDA = 0.8050
_FIG5_ZETA_STAR = 1.8411


def fig5_truth():
    return {"lambda": _FIG5_LAMBDA, "zeta_star": _FIG5_ZETA_STAR}


def _fig5_spec():
    # gate thresholds realize the zeta ratio with c1 = 0; low thresholds
    # keep the shock part dominant in the margins, so the finite-threshold
    # epsilon allocation stays close to the limit
    from scipy.special import ndtri

    rho = 1.0 - _FIG5_LAMBDA**2 / 2.0
    zeta1 = 0.5
    zeta2 = zeta1 / _FIG5_ZETA_STAR
    c = [0.0, -float(ndtri(zeta2))]
    return sim.FactorSpec([1.0, 1.0], c, FactorLaw.exponential(),
                          np.array([[1.0, rho], [rho, 1.0]]), gates="common")


def _fig5_rep(arg, n=100_000, quantile=0.999, epsilon=0.05):
    seed, r = arg
    spec = _fig5_spec()
    raw = sim.sample_factor(spec, n, seed=(seed * 1013 + r) & (2**62 - 1))
    U = sim.uniform_from_known_margins(raw, spec)
    Y = sim.pot_extract(sim.to_unit_pareto(U), quantile, thresholds="exact")
    cfg = inf.FitConfig(objective="mgpd-eps", epsilon=epsilon,
                        init={"lambda": 1.0, "zeta_star": 1.5},
                        restarts=2, f_tol=1e-9, x_tol=1e-8, seed=r,
                        zero_face="interior")
    rep = inf.fit(Y, "shared-gate", cfg)
    return {"replicate": r, "n": n, "quantile": quantile, "epsilon": epsilon,
            "m": Y.seed_info["m"], "converged": rep.converged, **rep.theta,
            **{f"count_{k}": v for k, v in rep.counts.items()}}


def run_fig5(scale="desk", seed=0, threads=1):
    """Bivariate shared-gate epsilon-likelihood study over (n, q, eps)."""
    n_rep = 50 if scale == "desk" else 500
    if scale == "desk":
        cells = [(100_000, 0.999, e) for e in (0.025, 0.05, 0.1)]
        cells += [(100_000, 0.99, 0.05)]
    else:
        cells = [(n, q, e)
                 for n in (10_000, 100_000, 200_000)
                 for q in ((0.98, 0.99, 0.995) if n == 10_000
                           else (0.99, 0.999, 0.9995))
                 for e in (0.025, 0.05, 0.1)]
    rows = []
    for (n, q, e) in cells:
        rows += _map_replicates(
            partial(_fig5_rep, n=n, quantile=q, epsilon=e),
            n_rep, seed, threads)
    truth = fig5_truth()
    means = {}
    for (n, q, e) in cells:
        sub = np.array([[row["lambda"], row["zeta_star"]] for row in rows
                        if (row["n"], row["quantile"], row["epsilon"]) == (n, q, e)])
        means[f"n={n},q={q},eps={e}"] = {
            "lambda": float(sub[:, 0].mean()),
            "zeta_star": float(sub[:, 1].mean()),
        }
    return {
        "name": "fig5", "scale": scale, "seed": seed, "truth": truth,
        "columns": ["lambda", "zeta_star"], "replicates": rows, "means": means,
    }


EXPERIMENTS = {
    "table1": run_table1,
    "table2": run_table2,
    "fig4": run_fig4,
    "fig5": run_fig5,
}


def run_experiment(name, scale="desk", seed=0, threads=1):
    """Dispatch an experiment by name; unknown names raise DomainError."""
    if name not in EXPERIMENTS:
        raise DomainError(
            f"unknown experiment {name!r}; valid names: {sorted(EXPERIMENTS)}")
    if scale not in ("desk", "paper"):
        raise DomainError("scale must be 'desk' or 'paper'")
    return EXPERIMENTS[name](scale=scale, seed=seed, threads=threads)
