"""Rendering of diagnostic panels and experiment summaries to PNG files.

Every figure is drawn from data already written to CSV next to it, so the
plots are a convenience view of the delimited output, not an extra data
source.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_surface(path, x, y, z, title, logscale=False):
    fig, ax = plt.subplots(figsize=(4.6, 4.0))
    vals = np.log(z) if logscale else z
    pc = ax.pcolormesh(x, y, vals.T, shading="auto", cmap="viridis")
    fig.colorbar(pc, ax=ax)
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    ax.set_title(title)
    _save(fig, path)


def render_curves(path, x, curves, title, xlabel, ylabel, bounds=None):
    fig, ax = plt.subplots(figsize=(4.6, 4.0))
    for label, y in curves.items():
        ax.plot(x, y, label=label)
    if bounds is not None:
        lo, hi = bounds
        ax.plot(x, lo, "k--", lw=0.8)
        ax.plot(x, hi, "k--", lw=0.8)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    if len(curves) > 1:
        ax.legend(fontsize=8)
    _save(fig, path)


def render_boxplots(path, groups, truth, title):
    """One panel per parameter; groups maps parameter -> {label: values}."""
    names = list(groups)
    fig, axes = plt.subplots(1, len(names), figsize=(3.0 * len(names), 3.4))
    if len(names) == 1:
        axes = [axes]
    for ax, name in zip(axes, names):
        data = groups[name]
        ax.boxplot(list(data.values()), tick_labels=list(data.keys()))
        if truth.get(name) is not None:
            ax.axhline(truth[name], color="crimson", ls="--", lw=1.0)
        ax.set_title(name)
        ax.tick_params(axis="x", rotation=45, labelsize=7)
    fig.suptitle(title)
    _save(fig, path)


def render_rmse_bars(path, rmse_sets, title):
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    labels = sorted({k for s in rmse_sets.values() for k in s})
    width = 0.8 / len(rmse_sets)
    xs = np.arange(len(labels))
    for i, (name, vals) in enumerate(rmse_sets.items()):
        ax.bar(xs + i * width, [vals.get(k, np.nan) for k in labels],
               width, label=name)
    ax.set_xticks(xs + 0.4 - width / 2)
    ax.set_xticklabels(labels, rotation=45, fontsize=8)
    ax.set_ylabel("RMSE")
    ax.set_title(title)
    ax.legend(fontsize=8)
    _save(fig, path)


def render_diagnose(out_dir, artifacts):
    """Render the panels written by the diagnose command."""
    out = Path(out_dir)
    if "stdf" in artifacts:
        g, Z = artifacts["stdf"]
        render_surface(out / "stdf.png", g, g, Z, "stable tail dependence l(x)")
    if "copula_density" in artifacts:
        g, Z = artifacts["copula_density"]
        render_surface(out / "copula_density.png", g, g, Z, "EV copula density")
    if "ev_density" in artifacts:
        g, Z = artifacts["ev_density"]
        render_surface(out / "ev_density.png", g, g, Z, "EV density (Gumbel margins)")
    if "mgpd_logdensity" in artifacts:
        g, Z = artifacts["mgpd_logdensity"]
        render_surface(out / "mgpd_logdensity.png", g, g, Z, "log mGPD density")
    if "pickands" in artifacts:
        t, curves = artifacts["pickands"]
        render_curves(out / "pickands.png", t, curves, "Pickands dependence",
                      "t", "A(t)",
                      bounds=(np.maximum(t, 1 - t), np.ones_like(t)))
    if "extremal_coefficient" in artifacts:
        xs, curves = artifacts["extremal_coefficient"]
        render_curves(out / "extremal_coefficient.png", xs, curves,
                      "extremal coefficient", "parameter", "theta")
    if "rmse" in artifacts:
        t, curves = artifacts["rmse"]
        render_curves(out / "rmse.png", t, curves, "Pickands RMSE by pair set",
                      "t", "RMSE(t)")


def render_experiment(out_dir, result):
    out = Path(out_dir)
    name = result["name"]
    cols = result["columns"]
    rows = result["replicates"]
    truth = result.get("truth", {})
    if name in ("table1", "table2"):
        groups = {}
        for k in cols:
            groups[k] = {"pairwise": [r[k] for r in rows]}
            if name == "table2":
                groups[k]["triplewise"] = [r["triplewise"][k] for r in rows]
        render_boxplots(out / f"{name}_estimates.png", groups, truth,
                        f"{name}: parameter estimates")
        sets = ({"pairwise": result["rmse"]} if name == "table1" else
                {"pairwise": result["rmse_pairwise"],
                 "triplewise": result["rmse_triplewise"]})
        render_rmse_bars(out / f"{name}_rmse.png", sets, f"{name}: RMSE")
    elif name == "fig4":
        groups = {k: {} for k in cols}
        for r in rows:
            for k in cols:
                groups[k].setdefault(f"q={r['quantile']}", []).append(r[k])
        render_boxplots(out / "fig4_estimates.png", groups, truth,
                        "threshold study: anchored-gate model")
    elif name == "fig5":
        groups = {k: {} for k in cols}
        for r in rows:
            label = f"q={r['quantile']},e={r['epsilon']}"
            for k in cols:
                groups[k].setdefault(label, []).append(r[k])
        render_boxplots(out / "fig5_estimates.png", groups, truth,
                        "threshold study: bivariate gated model")
