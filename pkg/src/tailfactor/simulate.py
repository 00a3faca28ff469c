"""Seeded generation from the pre-limit additive factor model.

The generative model is X_i = Z_i + (1/alpha_i) * V0 * 1(G_i > c_i) with a
joint Gaussian layer (Z, G), a common heavy factor V0, and per-component
gate thresholds c_i.  Output is a pure function of (spec, n, seed): rows
are produced in fixed-size blocks keyed by (seed, block index) with a
counter-based generator, so any parallel schedule yields identical data.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.random import Generator, Philox
from scipy.special import ndtr, ndtri
from scipy.stats import rankdata

from .errors import (
    DegenerateData,
    DimMismatch,
    DomainError,
    InvalidModel,
    NotPSD,
    TiesDetected,
    TooFewExceedances,
)
from .kernels import GevParams, FactorLaw, _validate_corr, factor_quantile, gev_cdf
from . import models as _models

__all__ = [
    "FactorSpec",
    "SampleMatrix",
    "sample_factor",
    "block_maxima",
    "to_uniform",
    "to_unit_pareto",
    "to_unit_frechet",
    "pot_extract",
    "spec_for_model",
]

_BLOCK_ROWS = 1 << 16  # fixed chunk size; part of the determinism contract

SCALES = ("raw", "uniform", "unit-pareto", "unit-frechet", "exceedance")


@dataclass(frozen=True, eq=False)
class SampleMatrix:
    """An n x d observation block tagged with its marginal scale."""

    data: np.ndarray
    scale: str
    seed_info: dict = field(default_factory=dict)

    def __post_init__(self):
        a = np.asarray(self.data, dtype=float)
        if a.ndim != 2:
            raise DimMismatch("data must be an n x d matrix")
        if self.scale not in SCALES:
            raise DomainError(f"unknown scale tag {self.scale!r}")
        if self.scale == "uniform" and (a.min() <= 0 or a.max() >= 1):
            raise DomainError("uniform-scale entries must lie strictly in (0, 1)")
        if self.scale == "unit-pareto" and a.min() < 1.0:
            raise DomainError("unit-pareto entries must be >= 1")
        object.__setattr__(self, "data", a)

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def d(self):
        return self.data.shape[1]


@dataclass(frozen=True, eq=False)
class FactorSpec:
    """Generative parameters of the factor model.

    gates is one of
      - "common":      a single gate variable G shared by all components,
                       cross_corr (length d) holds Cor(Z_i, G) (default 0);
      - ("equicorrelated", rho_star): gates with equicorrelation rho_star,
                       independent of Z unless cross_corr (d x d) is given;
      - a d x d correlation matrix for a general gate layer.
    """

    alpha: np.ndarray
    c: np.ndarray
    v0: FactorLaw
    corr_z: np.ndarray
    gates: object = "common"
    cross_corr: np.ndarray | None = None

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        R = _validate_corr(self.corr_z)
        if len(a) != len(c) or R.shape[0] != len(a):
            raise DimMismatch("alpha, c, corr_z disagree on dimension")
        if np.any(a <= 0):
            raise InvalidModel("alpha must be positive")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "corr_z", R)
        self.joint_corr  # validate eagerly

    @property
    def d(self):
        return len(self.alpha)

    @property
    def common_gate(self):
        return isinstance(self.gates, str) and self.gates == "common"

    @property
    def n_gates(self):
        return 1 if self.common_gate else self.d

    @cached_property
    def joint_corr(self):
        """Correlation matrix of (Z_1..Z_d, gate variables)."""
        d = self.d
        g = self.n_gates
        J = np.empty((d + g, d + g))
        J[:d, :d] = self.corr_z
        if self.common_gate:
            cross = np.zeros((d, 1))
            if self.cross_corr is not None:
                cross = np.asarray(self.cross_corr, dtype=float).reshape(d, 1)
            G = np.ones((1, 1))
        elif isinstance(self.gates, tuple) and self.gates[0] == "equicorrelated":
            rho_star = float(self.gates[1])
            if not 0.0 <= rho_star <= 1.0:
                raise InvalidModel("gate equicorrelation must lie in [0, 1]")
            G = np.full((d, d), min(rho_star, 1.0 - 1e-12))
            np.fill_diagonal(G, 1.0)
            cross = np.zeros((d, d))
            if self.cross_corr is not None:
                cross = np.asarray(self.cross_corr, dtype=float).reshape(d, d)
        else:
            G = _validate_corr(self.gates)
            if G.shape[0] != d:
                raise DimMismatch("gate correlation matrix has wrong dimension")
            cross = np.zeros((d, d))
            if self.cross_corr is not None:
                cross = np.asarray(self.cross_corr, dtype=float).reshape(d, d)
        J[:d, d:] = cross
        J[d:, :d] = cross.T
        J[d:, d:] = G
        try:
            return _validate_corr(J)
        except NotPSD as e:
            raise NotPSD(f"joint correlation of (levels, gates) invalid: {e}") from e

    @cached_property
    def _chol(self):
        J = self.joint_corr.copy()
        off = ~np.eye(J.shape[0], dtype=bool)
        J[off] = np.clip(J[off], -1 + 1e-12, 1 - 1e-12)
        return np.linalg.cholesky(J + 1e-12 * np.eye(J.shape[0]))


def spec_for_model(model, v0=None):
    """A factor specification whose extreme-value limit is ``model``.

    For HuslerReiss and direct (lam, tau) models a representative factor
    parameterization is synthesized; InvalidModel is raised when none of
    the candidate scalings yields a valid joint correlation.
    """
    if isinstance(model, _models.SharedGate):
        return FactorSpec(model.alpha, model.c, v0 or FactorLaw.exponential(),
                          model.rho, gates="common")
    if isinstance(model, _models.EquiGate):
        return FactorSpec(model.alpha, model.c, v0 or FactorLaw.exponential(),
                          model.rho, gates=("equicorrelated", model.rho_star))
    if isinstance(model, _models.MarshallOlkin):
        d = model.dim
        return FactorSpec(np.ones(d), model.c, v0 or FactorLaw.pareto(2.0),
                          np.eye(d), gates=model.orthant_corr)
    if isinstance(model, _models.SkewHuslerReiss):
        z1z2, z1g1, z1g2, z2g1, z2g2, g1g2 = model.rho
        gates = np.array([[1.0, g1g2], [g1g2, 1.0]])
        cross = np.array([[z1g1, z1g2], [z2g1, z2g2]])
        return FactorSpec(model.alpha, model.c, v0 or FactorLaw.exponential(),
                          np.array([[1.0, z1z2], [z1z2, 1.0]]),
                          gates=gates, cross_corr=cross)
    if isinstance(model, _models.EsnHuslerReiss):
        if model.alpha is not None:
            return FactorSpec(model.alpha, np.full(model.dim, float(model.c0)),
                              v0 or FactorLaw.exponential(), model.rho,
                              gates="common", cross_corr=model.rho0)
        return _spec_from_lambda_tau(model.lam_f, model.tau, v0)
    if isinstance(model, _models.HuslerReiss):
        return _spec_from_lambda_tau(model.lam_f, None, v0)
    raise InvalidModel(f"no factor representation for {type(model).__name__}")


def _spec_from_lambda_tau(lam_f, tau, v0):
    d = lam_f.shape[0]
    lmax = lam_f[~np.eye(d, dtype=bool)].max() if d > 1 else 1.0
    for scale in (1.0, 1.4, 1.9, 2.6, 4.0, 8.0):
        a0 = max(1.0, lmax / 1.9) * scale
        rho = 1.0 - (lam_f / a0) ** 2 / 2.0
        np.fill_diagonal(rho, 1.0)
        if np.abs(rho).max() > 1:
            continue
        try:
            if tau is None:
                return FactorSpec(np.full(d, a0), np.full(d, -np.inf),
                                  v0 or FactorLaw.exponential(), rho, gates="common")
            rho0 = np.asarray(tau, float) / a0  # with c0 = 0
            if np.abs(rho0).max() >= 1:
                continue
            return FactorSpec(np.full(d, a0), np.zeros(d),
                              v0 or FactorLaw.exponential(), rho,
                              gates="common", cross_corr=rho0)
        except NotPSD:
            continue
    raise InvalidModel("could not synthesize a valid factor parameterization")


# ---------------------------------------------------------------------------
# generation


def _rng_for(seed, stream):
    return Generator(Philox(key=[np.uint64(seed & (2**64 - 1)),
                                 np.uint64(stream & (2**64 - 1))]))


def _draw_block(spec: FactorSpec, m, rng_normal, rng_factor):
    # separate streams for the Gaussian layer and the common factor keep
    # row prefixes independent of the requested block length
    d = spec.d
    N = rng_normal.standard_normal((m, d + spec.n_gates))
    u = rng_factor.random(m)
    ZG = N @ spec._chol.T
    Z = ZG[:, :d]
    G = ZG[:, d:]
    V0 = factor_quantile(np.clip(u, 1e-16, 1.0 - 1e-16), spec.v0)
    if spec.common_gate:
        fired = G[:, 0][:, None] > spec.c[None, :]
    else:
        fired = G > spec.c[None, :]
    return Z + (V0[:, None] / spec.alpha[None, :]) * fired


def sample_factor(spec: FactorSpec, n, seed=0):
    """n i.i.d. rows from the factor model; bit-identical for a fixed seed."""
    if n < 1:
        raise DomainError("n must be at least 1")
    out = np.empty((n, spec.d))
    block = 0
    done = 0
    while done < n:
        m = min(_BLOCK_ROWS, n - done)
        out[done:done + m] = _draw_block(spec, m,
                                         _rng_for(seed, 2 * block),
                                         _rng_for(seed, 2 * block + 1))
        done += m
        block += 1
    return SampleMatrix(out, "raw", {"seed": seed, "kind": "factor", "n": n})


def block_maxima(spec: FactorSpec, n_blocks, block_size, seed=0):
    """Componentwise maxima over blocks of fresh factor draws.

    Each block has its own generator stream, so results do not depend on
    how blocks are scheduled.  Block sizes of a few thousand and up give a
    good approximation to the extreme-value limit; block_size = 1 is the
    raw factor law.
    """
    if n_blocks < 1 or block_size < 1:
        raise DomainError("n_blocks and block_size must be at least 1")
    out = np.empty((n_blocks, spec.d))
    base = np.uint64(1) << np.uint64(33)
    for b in range(n_blocks):
        rng_n = _rng_for(seed, int(base) + 2 * b)
        rng_f = _rng_for(seed, int(base) + 2 * b + 1)
        mx = np.full(spec.d, -np.inf)
        done = 0
        while done < block_size:
            m = min(_BLOCK_ROWS, block_size - done)
            chunk = _draw_block(spec, m, rng_n, rng_f)
            np.maximum(mx, chunk.max(axis=0), out=mx)
            done += m
        out[b] = mx
    return SampleMatrix(out, "raw", {"seed": seed, "kind": "block-maxima",
                                     "block_size": block_size})


# ---------------------------------------------------------------------------
# marginal transforms


def to_uniform(sample: SampleMatrix, mode="empirical", margins=None):
    """Transform raw columns to the uniform scale.

    mode "empirical" uses ranks / (n + 1) (ties broken by average rank with
    a TiesDetected warning); mode "known" applies the given GEV margins
    columnwise.
    """
    X = sample.data
    if mode == "empirical":
        if X.shape[0] < 2:
            raise DomainError("empirical ranks need at least two rows")
        U = np.empty_like(X)
        for j in range(X.shape[1]):
            col = X[:, j]
            if np.all(col == col[0]):
                raise DegenerateData(f"column {j} is constant")
            if len(np.unique(col)) < len(col):
                warnings.warn(f"ties in column {j}", TiesDetected)
            U[:, j] = rankdata(col, method="average") / (X.shape[0] + 1.0)
    elif mode == "known":
        if margins is None or len(margins) != X.shape[1]:
            raise DimMismatch("one GevParams per column required")
        U = np.column_stack([gev_cdf(X[:, j], m) for j, m in enumerate(margins)])
        U = np.clip(U, 1e-15, 1.0 - 1e-15)
    else:
        raise DomainError(f"unknown mode {mode!r}")
    return SampleMatrix(U, "uniform", dict(sample.seed_info))


def to_unit_pareto(sample: SampleMatrix):
    """Uniform to unit-Pareto scale: x = 1 / (1 - u)."""
    if sample.scale != "uniform":
        raise DomainError("to_unit_pareto expects uniform-scale input")
    return SampleMatrix(1.0 / (1.0 - sample.data), "unit-pareto",
                        dict(sample.seed_info))


def to_unit_frechet(sample: SampleMatrix):
    """Uniform to unit-Frechet scale: x = -1 / log(u)."""
    if sample.scale != "uniform":
        raise DomainError("to_unit_frechet expects uniform-scale input")
    return SampleMatrix(-1.0 / np.log(sample.data), "unit-frechet",
                        dict(sample.seed_info))


def factor_marginal_cdf(spec: FactorSpec, j, z):
    """Exact marginal CDF of X_j for an exponential common factor.

    F(z) = Phi(z) - exp(a^2/2 - a z) * Phi_2((a r - c, z - a); -r) where a
    is the component's alpha, c its gate threshold and r = Cor(Z_j, G_j).
    """
    return 1.0 - _factor_marginal_sf(spec, j, z)


def _factor_marginal_sf(spec: FactorSpec, j, z):
    """Exact survival function 1 - F_j(z), computed without cancellation."""
    if spec.v0.tag != "exponential":
        raise DomainError("closed-form margins exist for the exponential factor")
    a = float(spec.alpha[j])
    c = float(spec.c[j])
    d = spec.d
    if spec.cross_corr is None:
        r = 0.0
    elif spec.gates == "common":
        r = float(np.asarray(spec.cross_corr, float).reshape(d)[j])
    else:
        r = float(np.asarray(spec.cross_corr, float).reshape(d, d)[j, j])
    z = np.asarray(z, dtype=float)
    sf = ndtr(-z)
    if np.isposinf(c):
        return sf
    from .kernels import bvn_cdf

    tilt = np.exp(np.minimum(0.5 * a * a - a * z, 700.0))
    if np.isneginf(c):
        gate = ndtr(z - a)
    else:
        gate = bvn_cdf(a * r - c, z - a, -r)
    return np.clip(sf + tilt * gate, 0.0, 1.0)


def uniform_from_known_margins(sample: SampleMatrix, spec: FactorSpec,
                               block_size=1):
    """Uniform scale via the exact factor margins (raised to block_size for
    componentwise block maxima over blocks of that size)."""
    X = sample.data
    U = np.empty_like(X)
    for j in range(X.shape[1]):
        sf = _factor_marginal_sf(spec, j, X[:, j])
        if block_size > 1:
            U[:, j] = np.exp(block_size * np.log1p(-sf))
        else:
            U[:, j] = 1.0 - sf
    U = np.clip(U, 1e-15, 1.0 - 1e-15)
    return SampleMatrix(U, "uniform", dict(sample.seed_info))


def pot_extract(sample: SampleMatrix, quantile, min_exceed=10,
                thresholds="empirical"):
    """Exceedance ratios Y = X / u for rows with some component above its
    marginal threshold u_j (the empirical ``quantile`` of column j, or the
    exact unit-Pareto quantile 1/(1-q) when margins are known).

    Returns a SampleMatrix with scale "exceedance"; seed_info carries the
    thresholds and the retained count m.
    """
    if sample.scale != "unit-pareto":
        raise DomainError("pot_extract expects unit-Pareto input")
    if not 0.5 < quantile < 1.0:
        raise DomainError("quantile must lie in (0.5, 1)")
    X = sample.data
    if thresholds == "empirical":
        u = np.quantile(X, quantile, axis=0)  # linear (type-7) interpolation
    elif thresholds == "exact":
        u = np.full(X.shape[1], 1.0 / (1.0 - quantile))
    else:
        raise DomainError("thresholds must be 'empirical' or 'exact'")
    Y = X / u[None, :]
    keep = np.max(Y, axis=1) > 1.0
    m = int(keep.sum())
    if m < min_exceed:
        raise TooFewExceedances(f"only {m} rows exceed the {quantile} thresholds")
    info = dict(sample.seed_info)
    info.update({"thresholds": u.tolist(), "m": m, "quantile": quantile})
    return SampleMatrix(Y[keep], "exceedance", info)
