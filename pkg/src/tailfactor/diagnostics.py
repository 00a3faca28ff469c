"""Nonparametric dependence estimation and goodness-of-fit summaries.

The nonparametric Pickands estimator is the rank-based Caperaa-Fougeres-
Genest estimator with endpoint correction, clamped into the admissible
band max(t, 1-t) <= A(t) <= 1.  Model fit is summarized by the pointwise
RMSE between nonparametric and model curves across a set of pairs, its
integral over (0, 1), and its value at t = 1/2 (the tail-dependence
summary 2(1 - A(1/2))).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import DegenerateData, DimMismatch, EmptyPairSet, GridError
from . import models as M

__all__ = [
    "PickandsCurve",
    "default_grid",
    "pickands_cfg",
    "model_pickands",
    "rmse_curve",
    "rmse_aggregate",
    "pair_sets_by_distance",
]

_EULER_GAMMA = 0.5772156649015329


@dataclass(frozen=True)
class PickandsCurve:
    """A Pickands dependence curve on a grid of t in (0, 1)."""

    grid: np.ndarray
    values: np.ndarray
    source: str  # "model" | "nonparametric"

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.shape != v.shape:
            raise DimMismatch("grid and values disagree")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)


def default_grid(n=101):
    """Equispaced grid on [0, 1] containing 0.5 (n must be odd)."""
    if n < 51 or n % 2 == 0:
        raise GridError("grid needs at least 51 points and must contain 0.5")
    return np.linspace(0.0, 1.0, n)


def pickands_cfg(u, v=None, grid=None):
    """Rank-free CFG estimate of the Pickands function of a bivariate sample.

    Accepts an (n, 2) uniform-scale matrix or two separate columns.  The
    convention matches the model side: A(t) = l(t, 1 - t), so the
    minimum in the exponential functional weights the first coordinate by
    t and the second by 1 - t.
    """
    if v is None:
        uv = np.asarray(u, dtype=float)
        u, v = uv[:, 0], uv[:, 1]
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    n = len(u)
    if n < 20:
        raise DegenerateData("CFG estimator needs at least 20 points")
    if u.std() == 0 or v.std() == 0:
        raise DegenerateData("zero-variance column")
    if grid is None:
        grid = default_grid()
    g = np.asarray(grid, dtype=float)
    e = -np.log(np.clip(u, 1e-15, 1 - 1e-15))
    f = -np.log(np.clip(v, 1e-15, 1 - 1e-15))

    def log_a(t):
        if t <= 0.0:
            xi = e
        elif t >= 1.0:
            xi = f
        else:
            xi = np.minimum(e / t, f / (1.0 - t))
        return -_EULER_GAMMA - float(np.mean(np.log(xi)))

    raw = np.array([log_a(t) for t in g])
    la0 = log_a(0.0)
    la1 = log_a(1.0)
    corrected = raw - (1.0 - g) * la0 - g * la1
    vals = np.exp(corrected)
    vals = np.clip(vals, np.maximum(g, 1.0 - g), 1.0)
    return PickandsCurve(g, vals, "nonparametric")


def model_pickands(model, grid=None, pair=None, seed=0):
    """Model Pickands curve A(t) = l(t, 1 - t), optionally for one pair."""
    if grid is None:
        grid = default_grid()
    g = np.asarray(grid, dtype=float)
    m = model if pair is None else M.margin(model, pair)
    if m.dim != 2:
        raise DimMismatch("Pickands curve needs a bivariate (restricted) model")
    vals = np.array([M.pickands(m, t, seed=seed) for t in g])
    return PickandsCurve(g, vals, "model")


def rmse_curve(model, data, pairs, grid=None, seed=0):
    """Pointwise RMSE between nonparametric and model Pickands curves.

    ``data`` is a uniform-scale matrix (or SampleMatrix); ``pairs`` a
    nonempty iterable of (i, j) index pairs.
    """
    from .simulate import SampleMatrix

    U = data.data if isinstance(data, SampleMatrix) else np.asarray(data, float)
    pairs = list(pairs)
    if not pairs:
        raise EmptyPairSet("no pairs selected")
    if grid is None:
        grid = default_grid()
    g = np.asarray(grid, dtype=float)
    acc = np.zeros_like(g)
    for (i, j) in pairs:
        emp = pickands_cfg(U[:, i], U[:, j], grid=g)
        mod = model_pickands(model, grid=g, pair=(i, j) if model.dim > 2 else None,
                             seed=seed)
        acc += (emp.values - mod.values) ** 2
    return np.sqrt(acc / len(pairs))


def rmse_aggregate(grid, values):
    """(integral over (0,1) by the trapezoid rule, value at t = 1/2)."""
    g = np.asarray(grid, dtype=float)
    v = np.asarray(values, dtype=float)
    if len(g) < 51:
        raise GridError("grid must have at least 51 points")
    if not (g[0] <= 1e-9 and g[-1] >= 1 - 1e-9):
        raise GridError("grid must cover (0, 1)")
    hits = np.isclose(g, 0.5, atol=1e-12)
    if not hits.any():
        raise GridError("grid must contain t = 0.5")
    return float(np.trapezoid(v, g)), float(v[hits][0])


def pair_sets_by_distance(coords, rule="all", cutoff=None):
    """Pairs filtered by Euclidean distance: 'all', 'lt' or 'gt' a cutoff."""
    pts = np.asarray(coords, dtype=float)
    d = pts.shape[0]
    out = []
    for (i, j) in combinations(range(d), 2):
        dist = math.dist(pts[i], pts[j])
        if rule == "all":
            out.append((i, j))
        elif rule == "lt":
            if dist < cutoff:
                out.append((i, j))
        elif rule == "gt":
            if dist > cutoff:
                out.append((i, j))
        else:
            raise GridError(f"unknown rule {rule!r}")
    return out
