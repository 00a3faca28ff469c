"""Command-line interface: simulate | fit | diagnose | experiment.

Every command reads a JSON config, writes delimited output plus a
manifest, and renders PNG figures next to the CSVs where a plot is the
natural view of the data.  Exit codes: 0 ok, 2 config/validation error,
3 runtime error, 4 fit did not converge (report still written).
"""

from __future__ import annotations

import functools
import sys
from pathlib import Path

import click
import numpy as np

from .errors import ConfigError, NonConvergence, NotPSD, TailFactorError
from . import _io
from . import diagnostics as diag
from . import experiments as exp
from . import inference as inf
from . import models as M
from . import simulate as sim

EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_NONCONVERGENCE = 4


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="JSON configuration file.")
@click.option("--seed", type=int, default=0, show_default=True,
              help="Master seed.")
@click.option("--out", "out_dir", type=click.Path(), default=".",
              show_default=True, help="Output directory.")
@click.option("--threads", type=int, default=1, show_default=True,
              help="Worker processes for experiment replicates.")
@click.option("--quiet", is_flag=True, default=False, help="Suppress chatter.")
@click.pass_context
def main(ctx, config_path, seed, out_dir, threads, quiet):
    """Additive factor models for multivariate extremes."""
    ctx.ensure_object(dict)
    ctx.obj.update(config=config_path, seed=seed, out=out_dir,
                   threads=threads, quiet=quiet)


def _say(ctx, msg):
    if not ctx.obj.get("quiet"):
        click.echo(msg)


def _out_dir(ctx):
    out = Path(ctx.obj["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_cfg(ctx, required=True):
    path = ctx.obj.get("config")
    if path is None:
        if required:
            raise ConfigError("a --config file is required")
        return {}
    return _io.load_config(path)


def _fail(code, msg):
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


def _guard(fn):
    @functools.wraps(fn)
    def wrapped(ctx, *a, **kw):
        try:
            return fn(ctx, *a, **kw)
        except (ConfigError, NotPSD) as e:
            _fail(EXIT_CONFIG, e)
        except NonConvergence as e:
            _fail(EXIT_NONCONVERGENCE, e)
        except TailFactorError as e:
            _fail(EXIT_RUNTIME, e)
        except OSError as e:
            _fail(EXIT_RUNTIME, e)
    return wrapped


# ---------------------------------------------------------------------------
# simulate


@main.command()
@click.pass_context
@_guard
def simulate(ctx):
    """Draw from the factor model and write data.csv + manifest.json."""
    cfg = _load_cfg(ctx)
    _io.check_keys(cfg, {"spec", "n", "block_maxima", "transform",
                         "schema_version"}, "simulate config")
    spec = _io.factor_spec_from_config(_io.require(cfg, "spec",
                                                   "simulate config"))
    seed = ctx.obj["seed"]
    out = _out_dir(ctx)
    bm = cfg.get("block_maxima")
    if bm is not None:
        _io.check_keys(bm, {"n_blocks", "block_size"}, "block_maxima")
        data = sim.block_maxima(spec, int(bm["n_blocks"]),
                                int(bm["block_size"]), seed=seed)
        counts = {"n": data.n, "block_size": int(bm["block_size"])}
    else:
        n = int(_io.require(cfg, "n", "simulate config"))
        data = sim.sample_factor(spec, n, seed=seed)
        counts = {"n": data.n}
    transform = cfg.get("transform")
    if transform is not None:
        if transform not in ("uniform", "unit-pareto", "unit-frechet"):
            raise ConfigError(f"unknown transform {transform!r}")
        u = sim.to_uniform(data, mode="empirical")
        data = {"uniform": u,
                "unit-pareto": sim.to_unit_pareto(u) if transform == "unit-pareto" else u,
                "unit-frechet": sim.to_unit_frechet(u) if transform == "unit-frechet" else u,
                }[transform]
    _io.write_matrix_csv(out / "data.csv", data.data)
    _io.write_manifest(out, "simulate", cfg, seed, data.scale, counts)
    _say(ctx, f"wrote {out / 'data.csv'} ({data.n} rows, scale {data.scale})")


# ---------------------------------------------------------------------------
# fit


def _prepare_fit_data(cfg, seed):
    data, _ = _io.read_matrix_csv(_io.require(cfg, "data", "fit config"))
    scale = cfg.get("scale", "uniform")
    objective = _io.require(cfg, "objective", "fit config")
    if objective in ("pairwise-bm", "triplewise-bm"):
        if scale == "raw":
            u = sim.to_uniform(sim.SampleMatrix(data, "raw"))
        elif scale == "uniform":
            u = sim.SampleMatrix(data, "uniform")
        else:
            raise ConfigError("block-maxima objectives need raw or uniform data")
        return u, None
    if objective in ("mgpd-full", "mgpd-eps"):
        if scale == "exceedance":
            return sim.SampleMatrix(data, "exceedance"), None
        if scale == "raw":
            u = sim.to_uniform(sim.SampleMatrix(data, "raw"))
            pareto = sim.to_unit_pareto(u)
        elif scale == "uniform":
            pareto = sim.to_unit_pareto(sim.SampleMatrix(data, "uniform"))
        elif scale == "unit-pareto":
            pareto = sim.SampleMatrix(data, "unit-pareto")
        else:
            raise ConfigError(f"unknown scale {scale!r}")
        q = float(cfg.get("quantile", 0.99))
        y = sim.pot_extract(pareto, q)
        return y, q
    raise ConfigError(f"unknown objective {objective!r}")


@main.command()
@click.pass_context
@_guard
def fit(ctx):
    """Fit a family to data and write report.json."""
    cfg = _load_cfg(ctx)
    _io.check_keys(cfg, {"data", "family", "objective", "scale", "quantile",
                         "epsilon", "coords", "s0", "init", "bounds", "fixed",
                         "optimizer", "zero_face", "triples",
                         "schema_version"}, "fit config")
    family = _io.require(cfg, "family", "fit config")
    data, quantile = _prepare_fit_data(cfg, ctx.obj["seed"])
    opt = cfg.get("optimizer", {})
    _io.check_keys(opt, {"max_iter", "f_tol", "x_tol", "restarts"}, "optimizer")
    config = inf.FitConfig(
        objective=cfg["objective"],
        epsilon=float(cfg.get("epsilon", 0.05)),
        init=dict(cfg.get("init", {})),
        bounds={k: tuple(v) for k, v in cfg.get("bounds", {}).items()},
        fixed=dict(cfg.get("fixed", {})),
        max_iter=int(opt.get("max_iter", 2000)),
        f_tol=float(opt.get("f_tol", 1e-8)),
        x_tol=float(opt.get("x_tol", 1e-8)),
        restarts=int(opt.get("restarts", 3)),
        seed=ctx.obj["seed"],
        triples=cfg.get("triples"),
        zero_face=cfg.get("zero_face", "error"),
    )
    coords = np.asarray(cfg["coords"], float) if "coords" in cfg else None
    s0 = tuple(cfg["s0"]) if cfg.get("s0") is not None else None
    report = inf.fit(data, family, config, coords=coords, s0=s0)
    out = _out_dir(ctx)
    payload = {
        "family": family,
        "objective": report.objective,
        "estimates": {k: float(v) for k, v in report.theta.items()},
        "fixed": {k: {"value": float(v), "fixed": True}
                  for k, v in report.fixed.items()},
        "loglik": report.loglik,
        "converged": report.converged,
        "n_eval": report.n_eval,
        "counts": report.counts,
        "aic": report.aic,
        "bic": report.bic,
        "quantile": quantile,
    }
    if len(payload["estimates"]) == 1 and "lambda" in payload["estimates"]:
        payload["lambda"] = payload["estimates"]["lambda"]
    _io.write_json(out / "report.json", payload)
    _io.write_manifest(out, "fit", cfg, ctx.obj["seed"], data.scale,
                       report.counts or {"n": data.n})
    _say(ctx, f"wrote {out / 'report.json'} (loglik {report.loglik:.3f}, "
              f"converged {report.converged})")
    if not report.converged:
        _fail(EXIT_NONCONVERGENCE, "fit did not converge (report written)")


# ---------------------------------------------------------------------------
# diagnose


def _grid(lo, hi, n):
    return np.linspace(lo, hi, n)


@main.command()
@click.pass_context
@_guard
def diagnose(ctx):
    """Write grid CSVs (stdf, densities, Pickands, coefficients) + figures."""
    cfg = _load_cfg(ctx)
    _io.check_keys(cfg, {"model", "grid_n", "data", "coords", "pair_rules",
                         "sweep", "schema_version"}, "diagnose config")
    model = _io.model_from_config(_io.require(cfg, "model", "diagnose config"))
    if model.dim != 2:
        raise ConfigError("diagnose panels are bivariate; restrict the model")
    n = int(cfg.get("grid_n", 60))
    out = _out_dir(ctx)
    artifacts = {}

    g = _grid(0.05, 3.0, n)
    Z = np.array([[M.stdf(model, [a, b]) for b in g] for a in g])
    _io.write_csv(out / "stdf.csv", ["x1", "x2", "value"],
                  [(a, b, Z[i, j]) for i, a in enumerate(g)
                   for j, b in enumerate(g)])
    artifacts["stdf"] = (g, Z)

    gu = _grid(0.02, 0.98, n)
    try:
        C = np.array([[M.ev_copula_pdf2(model, a, b) for b in gu] for a in gu])
        _io.write_csv(out / "copula_density.csv", ["u1", "u2", "value"],
                      [(a, b, C[i, j]) for i, a in enumerate(gu)
                       for j, b in enumerate(gu)])
        artifacts["copula_density"] = (gu, C)
    except TailFactorError:
        pass  # families without a copula density on a kink line

    from .kernels import GevParams

    gumbel = [GevParams(), GevParams()]
    gx = _grid(-2.0, 6.0, n)
    try:
        E = np.array([[M.mev_pdf2(model, a, b, gumbel) for b in gx] for a in gx])
        _io.write_csv(out / "ev_density.csv", ["x1", "x2", "value"],
                      [(a, b, E[i, j]) for i, a in enumerate(gx)
                       for j, b in enumerate(gx)])
        artifacts["ev_density"] = (gx, E)
    except TailFactorError:
        pass

    gy = _grid(0.05, 4.0, n)
    try:
        H = np.array([[M.mgpd_pdf(model, [a, b]) for b in gy] for a in gy])
        with np.errstate(divide="ignore"):
            logH = np.where(H > 0, np.log(np.maximum(H, 1e-300)), np.nan)
        _io.write_csv(out / "mgpd_logdensity.csv", ["x1", "x2", "value"],
                      [(a, b, logH[i, j]) for i, a in enumerate(gy)
                       for j, b in enumerate(gy)])
        artifacts["mgpd_logdensity"] = (gy, logH)
    except TailFactorError:
        pass

    t = diag.default_grid()
    curves = {"model": diag.model_pickands(model, t).values}
    data_cfg = cfg.get("data")
    U = None
    if data_cfg is not None:
        U, _ = _io.read_matrix_csv(data_cfg)
        if U.shape[1] == 2:
            curves["nonparametric"] = diag.pickands_cfg(U, grid=t).values
    _io.write_csv(out / "pickands.csv", ["t"] + list(curves),
                  [(ti, *[c[i] for c in curves.values()])
                   for i, ti in enumerate(t)])
    artifacts["pickands"] = (t, curves)

    sweep = cfg.get("sweep")
    if sweep is not None:
        _io.check_keys(sweep, {"parameter", "lo", "hi", "n"}, "sweep")
        xs = _grid(float(sweep["lo"]), float(sweep["hi"]),
                   int(sweep.get("n", 41)))
        name = sweep["parameter"]
        vals = []
        base = dict(cfg["model"])
        for v in xs:
            base2 = dict(base)
            base2[name] = v
            vals.append(M.extremal_coefficient(_io.model_from_config(base2)))
        _io.write_csv(out / "extremal_coefficient.csv", [name, "theta"],
                      list(zip(xs, vals)))
        artifacts["extremal_coefficient"] = (xs, {"theta": np.asarray(vals)})

    counts = {}
    if U is not None and cfg.get("coords") is not None:
        coords = np.asarray(cfg["coords"], float)
        rules = cfg.get("pair_rules") or [{"rule": "all"}]
        rcurves = {}
        rows = []
        for spec_rule in rules:
            _io.check_keys(spec_rule, {"rule", "cutoff"}, "pair_rules")
            rule = spec_rule.get("rule", "all")
            cutoff = spec_rule.get("cutoff")
            pairs = diag.pair_sets_by_distance(coords, rule, cutoff)
            if not pairs:
                continue
            label = rule if rule == "all" else f"{rule}{cutoff}"
            vals = diag.rmse_curve(model, U, pairs, grid=t)
            integral, mid = diag.rmse_aggregate(t, vals)
            rcurves[label] = vals
            rows.append((label, len(pairs), integral, mid))
        _io.write_csv(out / "rmse_summary.csv",
                      ["pair_set", "n_pairs", "integral", "at_half"], rows)
        if rcurves:
            _io.write_csv(out / "rmse_curves.csv", ["t"] + list(rcurves),
                          [(ti, *[c[i] for c in rcurves.values()])
                           for i, ti in enumerate(t)])
            artifacts["rmse"] = (t, rcurves)
        counts["pair_sets"] = len(rows)

    from . import figures

    figures.render_diagnose(out, artifacts)
    _io.write_manifest(out, "diagnose", cfg, ctx.obj["seed"], "grids", counts)
    _say(ctx, f"wrote diagnostic grids and figures to {out}")


# ---------------------------------------------------------------------------
# experiment


@main.command()
@click.argument("name")
@click.option("--scale", type=click.Choice(["desk", "paper"]), default="desk",
              show_default=True)
@click.pass_context
@_guard
def experiment(ctx, name, scale):
    """Run a packaged simulation study (table1 | table2 | fig4 | fig5)."""
    if name not in exp.EXPERIMENTS:
        raise ConfigError(
            f"unknown experiment {name!r}; valid names: "
            f"{sorted(exp.EXPERIMENTS)}")
    seed = ctx.obj["seed"]
    out = _out_dir(ctx)
    result = exp.run_experiment(name, scale=scale, seed=seed,
                                threads=ctx.obj["threads"])
    rows = result["replicates"]
    header = sorted({k for r in rows for k in r if not isinstance(r[k], dict)})
    _io.write_csv(out / f"{name}_replicates.csv", header,
                  [[r.get(k, "") for k in header] for r in rows])
    if name == "table2":
        _io.write_csv(out / f"{name}_triplewise.csv",
                      ["replicate"] + result["columns"],
                      [[r["replicate"]] + [r["triplewise"][k]
                                           for k in result["columns"]]
                       for r in rows])
    summary = {k: v for k, v in result.items() if k != "replicates"}
    _io.write_json(out / f"{name}_summary.json", summary)
    from . import figures

    figures.render_experiment(out, result)
    _io.write_manifest(out, "experiment", {"name": name, "scale": scale},
                       seed, scale, {"replicates": len(rows)})
    _say(ctx, f"wrote {name} results to {out}")


if __name__ == "__main__":
    main()
