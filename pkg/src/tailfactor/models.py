"""Limiting dependence models of the additive factor construction.

Each model is a tagged parameter set for which this module evaluates the
stable tail dependence function (stdf) and everything derived from it:
extreme-value copula and distribution, multivariate generalized Pareto
(mGPD) distribution/density on the standardized unit-Pareto scale, point
masses on boundary faces, and summary coefficients.

Families
--------
HuslerReiss        symmetric baseline; ``lam`` uses the convention in which
                   the bivariate stdf is x1*Phi(lam + log(x1/x2)/(2 lam)) + ...
MarshallOlkin      heavy (regularly varying) common factor gated per
                   component; max-linear stdf, singular mGPD.
SkewHuslerReiss    bivariate limit with exponential factor and a fully
                   dependent Gaussian layer (gates correlated with levels).
EsnHuslerReiss     one latent gate variable, one threshold, gate correlated
                   with the levels; extended skew-normal stdf, no boundary
                   mass.
SharedGate         one latent gate variable, component-specific thresholds,
                   gate independent of levels; boundary mass on one face.
EquiGate           equicorrelated gate variables, thresholds per component;
                   boundary mass on both faces.

Factor-scale lambda is used internally: lam_f[i,j] =
sqrt(a_i^2 - 2 rho_ij a_i a_j + a_j^2) = 2 * (HuslerReiss lam).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations

import numpy as np
from scipy.integrate import quad
from scipy.special import ndtr

from .errors import (
    DimError,
    DimMismatch,
    DomainError,
    InvalidModel,
    NonConvergence,
    NonDifferentiable,
    SimplexError,
    UnsupportedModel,
)
from .kernels import (
    CorrelationMatrix,
    _validate_corr,
    bvn_cdf,
    esn_logpdf,
    mvn_cdf,
    mvn_orthant,
    std_normal_pdf,
)

__all__ = [
    "HuslerReiss",
    "MarshallOlkin",
    "SkewHuslerReiss",
    "EsnHuslerReiss",
    "SharedGate",
    "EquiGate",
    "margin",
    "stdf",
    "stdf_partial",
    "ev_copula_cdf",
    "ev_copula_pdf2",
    "mev_cdf",
    "mev_pdf2",
    "mgpd_cdf",
    "mgpd_pdf",
    "boundary_mass",
    "singular_components",
    "extremal_coefficient",
    "chi_u",
    "pickands",
]

_SUBSET_DIM_CAP = 10  # 2^d subset sums
_ESN_DIM_CAP = 11  # needs Phi_d, capped at 12


# ---------------------------------------------------------------------------
# shared Husler-Reiss machinery (factor-scale lambda)


def _hr_sigma_bar(lam_f, j):
    """Partial correlation matrix of the pivot-j normal block."""
    idx = [i for i in range(lam_f.shape[0]) if i != j]
    lj = lam_f[idx, j]
    out = (lj[:, None] ** 2 + lj[None, :] ** 2 - lam_f[np.ix_(idx, idx)] ** 2) / (
        2.0 * lj[:, None] * lj[None, :]
    )
    np.fill_diagonal(out, 1.0)
    return out


def _hr_pivot_args(lam_f, x, j):
    idx = [i for i in range(len(x)) if i != j]
    lj = lam_f[idx, j]
    return 0.5 * lj + np.log(x[j] / x[idx]) / lj


def _hr_stdf(lam_f, x, seed=0, target_abs_err=1e-6):
    """Husler-Reiss stdf for strictly positive x (factor-scale lambda)."""
    d = len(x)
    if d == 1:
        return float(x[0])
    if d == 2:
        lf = lam_f[0, 1]
        a = 0.5 * lf + math.log(x[0] / x[1]) / lf
        b = 0.5 * lf + math.log(x[1] / x[0]) / lf
        return float(x[0] * ndtr(a) + x[1] * ndtr(b))
    total = 0.0
    for j in range(d):
        args = _hr_pivot_args(lam_f, x, j)
        sig = _hr_sigma_bar(lam_f, j)
        total += x[j] * mvn_cdf(args, sig, target_abs_err=target_abs_err, seed=seed).value
    return float(total)


def _hr_stdf_partial_exact(lam_f, x, k):
    """d/dx_k of the HR stdf; exact for d <= 3."""
    d = len(x)
    if d == 1:
        return 1.0
    args = _hr_pivot_args(lam_f, x, k)
    if d == 2:
        return float(ndtr(args[0]))
    if d == 3:
        sig = _hr_sigma_bar(lam_f, k)
        return float(bvn_cdf(args[0], args[1], sig[0, 1]))
    raise DimError("exact HR partial limited to d <= 3")


def _hr_stdf_mixed2_exact(lam_f, x, m, n):
    """d2/dx_m dx_n of the HR stdf; exact for d in {2, 3}."""
    d = len(x)
    if d == 2:
        lf = lam_f[m, n]
        a = 0.5 * lf + math.log(x[n] / x[m]) / lf
        return -std_normal_pdf(a) / (lf * x[m])
    if d == 3:
        # differentiate the pivot-n bivariate CDF in its m-argument
        idx = [i for i in range(3) if i != n]
        pos = idx.index(m)
        other = idx[1 - pos]
        args = _hr_pivot_args(lam_f, x, n)
        sig = _hr_sigma_bar(lam_f, n)
        rho = sig[0, 1]
        u_m = args[pos]
        u_o = args[1 - pos]
        cond = (u_o - rho * u_m) / math.sqrt(1.0 - rho * rho)
        return -std_normal_pdf(u_m) * float(ndtr(cond)) / (lam_f[m, n] * x[m])
    raise DimError("exact HR mixed partial limited to d <= 3")


def _lambda_factor(alpha, rho):
    a = np.asarray(alpha, float)
    lam2 = a[:, None] ** 2 - 2.0 * rho * a[:, None] * a[None, :] + a[None, :] ** 2
    lam2 = np.maximum(lam2, 0.0)
    out = np.sqrt(lam2)
    np.fill_diagonal(out, 0.0)
    return out


def _check_lambda(lam_f):
    off = lam_f[~np.eye(lam_f.shape[0], dtype=bool)]
    if np.any(off <= 0):
        raise InvalidModel("derived pairwise lambda must be strictly positive")


# ---------------------------------------------------------------------------
# model classes


@dataclass(frozen=True, eq=False)
class HuslerReiss:
    """Husler-Reiss model with symmetric d x d dependence matrix ``lam``.

    Validity of an arbitrary lam matrix (conditional negative definiteness
    of its square) is the caller's responsibility; only symmetry and
    positivity are checked here.
    """

    lam: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.lam, dtype=float)
        if m.ndim == 0:
            m = np.array([[0.0, float(m)], [float(m), 0.0]])
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidModel("lam must be a square matrix (or a scalar for d=2)")
        if not np.allclose(m, m.T, atol=1e-12):
            raise InvalidModel("lam must be symmetric")
        off = m[~np.eye(m.shape[0], dtype=bool)]
        if np.any(off <= 0):
            raise InvalidModel("off-diagonal lam entries must be positive")
        object.__setattr__(self, "lam", m)

    @property
    def dim(self):
        return self.lam.shape[0]

    @cached_property
    def lam_f(self):
        return 2.0 * self.lam


@dataclass(frozen=True, eq=False)
class MarshallOlkin:
    """Max-linear limit of a heavy-factor model, gated per component.

    Parameterized by the gate thresholds ``c`` and the gate correlation
    matrix; zeta_i = Phi(-c_i) is the firing probability of gate i.
    """

    c: np.ndarray
    orthant_corr: np.ndarray
    seed: int = 0

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        R = _validate_corr(self.orthant_corr)
        if R.shape[0] != len(c):
            raise DimMismatch("c and orthant_corr disagree on dimension")
        zeta = ndtr(-c)
        if np.any(zeta <= 0):
            raise InvalidModel("all gates must fire with positive probability")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "orthant_corr", R)

    @property
    def dim(self):
        return len(self.c)

    @cached_property
    def zeta(self):
        return ndtr(-self.c)

    @cached_property
    def subset_probs(self):
        """P(gates in A fire, gates outside A stay quiet), per subset mask."""
        d = self.dim
        if d > _SUBSET_DIM_CAP:
            raise DimError(
                f"subset expansion limited to d <= {_SUBSET_DIM_CAP}")
        out = {}
        for mask in range(1, 1 << d):
            members = np.array([(mask >> i) & 1 for i in range(d)], dtype=bool)
            res = mvn_orthant(self.c, members, self.orthant_corr,
                              target_abs_err=1e-7, seed=self.seed)
            out[mask] = res.value
        return out


@dataclass(frozen=True, eq=False)
class SkewHuslerReiss:
    """Bivariate limit with exponential factor and dependent Gaussian layer.

    ``rho`` holds the six correlations among (Z1, Z2, G1, G2) where G are
    the latent gate variables, ordered
    (z1z2, z1g1, z1g2, z2g1, z2g2, g1g2).
    """

    alpha: np.ndarray
    c: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float)
        c = np.asarray(self.c, dtype=float)
        r = np.asarray(self.rho, dtype=float)
        if a.shape != (2,) or c.shape != (2,):
            raise DimError("this family is bivariate")
        if np.any(a <= 0):
            raise InvalidModel("alpha must be positive")
        if r.shape != (6,):
            raise InvalidModel("rho must hold the six pairwise correlations")
        z1z2, z1g1, z1g2, z2g1, z2g2, g1g2 = r
        J = np.array([
            [1.0, z1z2, z1g1, z1g2],
            [z1z2, 1.0, z2g1, z2g2],
            [z1g1, z2g1, 1.0, g1g2],
            [z1g2, z2g2, g1g2, 1.0],
        ])
        _validate_corr(J)  # raises NotPSD
        lam = _lambda_factor(a, z1z2)
        _check_lambda(lam)
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "rho", r)

    @property
    def dim(self):
        return 2

    @cached_property
    def lam_f(self):
        return float(_lambda_factor(self.alpha, self.rho[0])[0, 1])

    @cached_property
    def norms(self):
        # Phi(a_l * Cor(Z_l, G_l) - c_l); the marginal gate-conditional scaling
        a = self.alpha
        return np.array([
            ndtr(a[0] * self.rho[1] - self.c[0]),
            ndtr(a[1] * self.rho[4] - self.c[1]),
        ])

    def _sigma_cond(self, i):
        """3x3 matrix of the pivot-i trivariate CDF term."""
        a = self.alpha
        lam = self.lam_f
        z1z2, z1g1, z1g2, z2g1, z2g2, g1g2 = self.rho
        if i == 0:
            # correlations of gate variables with (Z_1, Z_2) combinations
            r12 = (a[1] * z2g2 - a[0] * z1g2) / lam
            r13 = (a[1] * z2g1 - a[0] * z1g1) / lam
        else:
            r12 = (a[0] * z1g1 - a[1] * z2g1) / lam
            r13 = (a[0] * z1g2 - a[1] * z2g2) / lam
        return np.array([
            [1.0, r12, r13],
            [r12, 1.0, g1g2],
            [r13, g1g2, 1.0],
        ])


@dataclass(frozen=True, eq=False)
class EsnHuslerReiss:
    """Single gate variable, single threshold, gate correlated with levels.

    Constructed either from the factor parameters (alpha, c0, rho, rho0) or
    directly from (lam_f, tau) via :meth:`from_lambda_tau`; tau_j =
    alpha_j * rho0_j - c0.  The stdf is a sum of extended skew-normal CDF
    terms; the mGPD places no mass on boundary faces.
    """

    alpha: np.ndarray | None
    c0: float | None
    rho: np.ndarray | None
    rho0: np.ndarray | None
    _lam_f: np.ndarray = field(default=None, repr=False)
    _tau: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self._lam_f is not None:
            lam = np.asarray(self._lam_f, dtype=float)
            tau = np.asarray(self._tau, dtype=float)
            if lam.shape[0] != lam.shape[1] or len(tau) != lam.shape[0]:
                raise DimMismatch("lam_f and tau disagree on dimension")
            if not np.allclose(lam, lam.T, atol=1e-12):
                raise InvalidModel("lam_f must be symmetric")
            _check_lambda(lam)
            object.__setattr__(self, "_lam_f", lam)
            object.__setattr__(self, "_tau", tau)
        else:
            a = np.asarray(self.alpha, dtype=float)
            r = _validate_corr(self.rho)
            r0 = np.asarray(self.rho0, dtype=float)
            d = len(a)
            if r.shape[0] != d or r0.shape != (d,):
                raise DimMismatch("alpha, rho, rho0 disagree on dimension")
            if np.any(a <= 0):
                raise InvalidModel("alpha must be positive")
            # joint law of (levels, gate) must be a valid correlation
            J = np.empty((d + 1, d + 1))
            J[:d, :d] = r
            J[:d, d] = r0
            J[d, :d] = r0
            J[d, d] = 1.0
            _validate_corr(J)
            lam = _lambda_factor(a, r)
            _check_lambda(lam)
            object.__setattr__(self, "alpha", a)
            object.__setattr__(self, "rho0", r0)
            object.__setattr__(self, "_lam_f", lam)
            object.__setattr__(self, "_tau", a * r0 - float(self.c0))
        if self.dim > _ESN_DIM_CAP:
            raise DimError(f"this family is limited to d <= {_ESN_DIM_CAP}")

    @classmethod
    def from_lambda_tau(cls, lam_f, tau):
        """Direct (lam_f, tau) parameterization; validity is caller-checked."""
        return cls(alpha=None, c0=None, rho=None, rho0=None,
                   _lam_f=np.asarray(lam_f, float), _tau=np.asarray(tau, float))

    @property
    def dim(self):
        return self._lam_f.shape[0]

    @property
    def lam_f(self):
        return self._lam_f

    @property
    def tau(self):
        return self._tau

    @cached_property
    def norms(self):
        return ndtr(self._tau)

    def _delta_aug(self, j):
        """Gate-column correlations of the pivot-j augmented matrix."""
        idx = [i for i in range(self.dim) if i != j]
        return (self._tau[j] - self._tau[idx]) / self._lam_f[idx, j]

    def _sigma_aug(self, j):
        d = self.dim
        sig = _hr_sigma_bar(self._lam_f, j)
        de = self._delta_aug(j)
        out = np.empty((d, d))
        out[: d - 1, : d - 1] = sig
        out[: d - 1, d - 1] = de
        out[d - 1, : d - 1] = de
        out[d - 1, d - 1] = 1.0
        return out

    @cached_property
    def stdf_at_ones(self):
        return _stdf_positive(self, np.ones(self.dim), seed=0, target_abs_err=1e-7)


@dataclass(frozen=True, eq=False)
class SharedGate:
    """One gate variable shared by all components, thresholds per component.

    Gate independent of the levels; exponential common factor.  Equal
    thresholds reduce this family to HuslerReiss with lam = lam_f / 2.
    """

    alpha: np.ndarray
    c: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        r = _validate_corr(self.rho)
        if len(a) != len(c) or r.shape[0] != len(a):
            raise DimMismatch("alpha, c, rho disagree on dimension")
        if np.any(a <= 0):
            raise InvalidModel("alpha must be positive")
        lam = _lambda_factor(a, r)
        _check_lambda(lam)
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "rho", r)

    @property
    def dim(self):
        return len(self.c)

    @cached_property
    def zeta(self):
        return ndtr(-self.c)

    @cached_property
    def lam_f(self):
        return _lambda_factor(self.alpha, self.rho)

    @cached_property
    def upper_sets(self):
        """(weight, index tuple) pairs: the only subsets with positive gate mass."""
        order = np.argsort(-self.zeta, kind="stable")
        zs = self.zeta[order]
        out = []
        for k in range(1, self.dim + 1):
            w = zs[k - 1] - (zs[k] if k < self.dim else 0.0)
            if w > 0:
                out.append((float(w), tuple(sorted(order[:k]))))
        return out


@dataclass(frozen=True, eq=False)
class EquiGate:
    """Equicorrelated gate variables with correlation rho_star in [0, 1].

    rho_star = 1 recovers :class:`SharedGate`; rho_star = 0 gives
    independent gates.
    """

    alpha: np.ndarray
    c: np.ndarray
    rho: np.ndarray
    rho_star: float

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        r = _validate_corr(self.rho)
        if len(a) != len(c) or r.shape[0] != len(a):
            raise DimMismatch("alpha, c, rho disagree on dimension")
        if np.any(a <= 0):
            raise InvalidModel("alpha must be positive")
        if not (0.0 <= self.rho_star <= 1.0):
            raise InvalidModel("rho_star must lie in [0, 1]")
        lam = _lambda_factor(a, r)
        _check_lambda(lam)
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "rho", r)

    @property
    def dim(self):
        return len(self.c)

    @cached_property
    def zeta(self):
        return ndtr(-self.c)

    @cached_property
    def lam_f(self):
        return _lambda_factor(self.alpha, self.rho)

    @cached_property
    def pair_orthant(self):
        """Phi_2((-c_i, -c_j); rho_star) for every pair."""
        d = self.dim
        out = np.zeros((d, d))
        for i in range(d):
            for j in range(i + 1, d):
                out[i, j] = out[j, i] = float(
                    bvn_cdf(-self.c[i], -self.c[j], self.rho_star)
                )
        return out

    @cached_property
    def subset_probs(self):
        d = self.dim
        if d > _SUBSET_DIM_CAP:
            raise DimError(
                f"subset expansion limited to d <= {_SUBSET_DIM_CAP}")
        out = {}
        for mask in range(1, 1 << d):
            members = np.array([(mask >> i) & 1 for i in range(d)], dtype=bool)
            out[mask] = equicorr_orthant(self.c, members, self.rho_star)
        return out


def equicorr_orthant(c, fire_mask, rho_star):
    """P(G_i > c_i for i in the fire set, G_j < c_j otherwise) under
    equicorrelation rho_star, by one-dimensional quadrature over the
    common component."""
    c = np.asarray(c, dtype=float)
    fire = np.asarray(fire_mask, dtype=bool)
    zeta = ndtr(-c)
    if rho_star == 0.0:
        return float(np.prod(np.where(fire, zeta, 1.0 - zeta)))
    if rho_star == 1.0:
        lo = np.max(c[fire]) if fire.any() else -np.inf
        hi = np.min(c[~fire]) if (~fire).any() else np.inf
        return float(max(0.0, ndtr(hi) - ndtr(lo))) if hi > lo else 0.0
    s = math.sqrt(rho_star)
    t = math.sqrt(1.0 - rho_star)

    def f(w):
        z = (c - s * w) / t
        p = ndtr(z)
        return math.exp(-0.5 * w * w) / math.sqrt(2 * math.pi) * float(
            np.prod(np.where(fire, 1.0 - p, p))
        )

    pts = sorted(float(np.clip(ci / s, -8.8, 8.8)) for ci in c)
    val, _ = quad(f, -9.0, 9.0, points=pts, epsabs=1e-12, epsrel=1e-10, limit=400)
    return float(min(1.0, max(0.0, val)))


# ---------------------------------------------------------------------------
# margins and generic helpers

TailModel = (HuslerReiss, MarshallOlkin, SkewHuslerReiss, EsnHuslerReiss,
             SharedGate, EquiGate)


def margin(model, indices):
    """Restrict a model to a coordinate subset (families are margin-closed)."""
    idx = list(indices)
    if len(set(idx)) != len(idx) or not all(0 <= i < model.dim for i in idx):
        raise DimMismatch("invalid margin indices")
    if isinstance(model, HuslerReiss):
        return HuslerReiss(model.lam[np.ix_(idx, idx)])
    if isinstance(model, MarshallOlkin):
        return MarshallOlkin(model.c[idx], model.orthant_corr[np.ix_(idx, idx)],
                             seed=model.seed)
    if isinstance(model, SkewHuslerReiss):
        if sorted(idx) == [0, 1]:
            return model
        raise DimError("bivariate family has no proper margins")
    if isinstance(model, EsnHuslerReiss):
        return EsnHuslerReiss.from_lambda_tau(model.lam_f[np.ix_(idx, idx)],
                                              model.tau[idx])
    if isinstance(model, SharedGate):
        return SharedGate(model.alpha[idx], model.c[idx], model.rho[np.ix_(idx, idx)])
    if isinstance(model, EquiGate):
        return EquiGate(model.alpha[idx], model.c[idx], model.rho[np.ix_(idx, idx)],
                        model.rho_star)
    raise UnsupportedModel(f"unknown model type {type(model).__name__}")


def _check_x(model, x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if len(x) != model.dim:
        raise DimMismatch(f"x has length {len(x)}, model dimension {model.dim}")
    if np.any(x < 0) or np.any(np.isnan(x)):
        raise DomainError("stdf argument must be nonnegative")
    if not np.any(x > 0):
        raise DomainError("stdf argument must not be identically zero")
    return x


# ---------------------------------------------------------------------------
# stable tail dependence function


def stdf(model, x, seed=0, target_abs_err=1e-6):
    """Stable tail dependence function l(x) for x >= 0, x != 0.

    Homogeneous of order one with max(x) <= l(x) <= sum(x); l(e_j) = 1.
    Coordinates at zero are handled analytically by restriction to the
    positive sub-vector.
    """
    x = _check_x(model, x)
    pos = x > 0
    if not pos.all():
        sub = margin(model, np.where(pos)[0]) if pos.sum() > 1 else None
        if pos.sum() == 1:
            return float(x[pos][0])
        return stdf(sub, x[pos], seed=seed, target_abs_err=target_abs_err)
    return _stdf_positive(model, x, seed, target_abs_err)


def _stdf_positive(model, x, seed, target_abs_err):
    if isinstance(model, HuslerReiss):
        return _hr_stdf(model.lam_f, x, seed=seed, target_abs_err=target_abs_err)

    if isinstance(model, MarshallOlkin):
        zx = x / model.zeta
        total = 0.0
        for mask, p in model.subset_probs.items():
            if p <= 0:
                continue
            m = max(zx[i] for i in range(model.dim) if (mask >> i) & 1)
            total += m * p
        return float(total)

    if isinstance(model, SkewHuslerReiss):
        return _skewhr_stdf(model, x, seed, target_abs_err)

    if isinstance(model, EsnHuslerReiss):
        xt = x / model.norms
        lam = model.lam_f
        total = 0.0
        for j in range(model.dim):
            idx = [i for i in range(model.dim) if i != j]
            args = 0.5 * lam[idx, j] + np.log(xt[j] / xt[idx]) / lam[idx, j]
            upper = np.append(args, model.tau[j])
            total += xt[j] * mvn_cdf(upper, model._sigma_aug(j),
                                     target_abs_err=target_abs_err, seed=seed).value
        return float(total)

    if isinstance(model, SharedGate):
        xt = x / model.zeta
        total = 0.0
        for w, idx in model.upper_sets:
            sub = list(idx)
            total += w * _hr_stdf(model.lam_f[np.ix_(sub, sub)], xt[sub],
                                  seed=seed, target_abs_err=target_abs_err)
        return float(total)

    if isinstance(model, EquiGate):
        xt = x / model.zeta
        total = 0.0
        for mask, p in model.subset_probs.items():
            if p <= 0:
                continue
            sub = [i for i in range(model.dim) if (mask >> i) & 1]
            total += p * _hr_stdf(model.lam_f[np.ix_(sub, sub)], xt[sub],
                                  seed=seed, target_abs_err=target_abs_err)
        return float(total)

    raise UnsupportedModel(f"unknown model type {type(model).__name__}")


def _skewhr_stdf(model, x, seed, target_abs_err):
    a = model.alpha
    c = model.c
    lam = model.lam_f
    z1z2, z1g1, z1g2, z2g1, z2g2, g1g2 = model.rho
    xt = x / model.norms
    out = 0.0
    for i, j in ((0, 1), (1, 0)):
        if i == 0:
            b2 = a[0] * z1g2 - c[1]  # gate of the other component
            b3 = a[0] * z1g1 - c[0]  # own gate
        else:
            b2 = a[1] * z2g1 - c[0]
            b3 = a[1] * z2g2 - c[1]
        b1 = -0.5 * lam - math.log(xt[i] / xt[j]) / lam
        p = mvn_cdf(np.array([b1, b2, b3]), model._sigma_cond(i),
                    target_abs_err=target_abs_err, seed=seed).value
        out += x[i] * (1.0 - p / model.norms[i])
    return float(out)


# ---------------------------------------------------------------------------
# first-order partial derivatives


def _fd_partial(model, x, k, seed):
    h = 1e-5 * x[k]
    xp = x.copy()
    xm = x.copy()
    xp[k] += h
    xm[k] -= h
    return (_stdf_positive(model, xp, seed, 1e-7)
            - _stdf_positive(model, xm, seed, 1e-7)) / (2.0 * h)


def stdf_partial(model, x, k, seed=0):
    """d l / d x_k at strictly positive x.

    Analytic for the bivariate HuslerReiss, SharedGate and EquiGate closed
    forms and for MarshallOlkin (raising NonDifferentiable on a kink);
    central finite differences with step 1e-5 x_k otherwise.
    """
    x = _check_x(model, x)
    if np.any(x <= 0):
        raise DomainError("stdf_partial requires strictly positive x")
    if not 0 <= k < model.dim:
        raise DimMismatch("coordinate index out of range")

    if isinstance(model, HuslerReiss) and model.dim == 2:
        lf = model.lam_f[0, 1]
        j = 1 - k
        return float(ndtr(0.5 * lf + math.log(x[k] / x[j]) / lf))

    if isinstance(model, MarshallOlkin):
        zx = x / model.zeta
        total = 0.0
        for mask, p in model.subset_probs.items():
            if p <= 0 or not (mask >> k) & 1:
                continue
            members = [i for i in range(model.dim) if (mask >> i) & 1]
            vals = zx[members]
            top = vals.max()
            winners = [m for m, v in zip(members, vals)
                       if v >= top * (1.0 - 1e-12)]
            if len(winners) > 1 and k in winners:
                raise NonDifferentiable(
                    f"tie in the max-linear term for subset mask {mask:b}")
            if winners[0] == k:
                total += p / model.zeta[k]
        return float(total)

    if isinstance(model, SharedGate) and model.dim == 2:
        j = 1 - k
        lf = model.lam_f[0, 1]
        zeta = model.zeta
        xt = x / zeta
        arg = -0.5 * lf - math.log(xt[k] / xt[j]) / lf
        return float(1.0 - ndtr(arg) * min(zeta[j] / zeta[k], 1.0))

    if isinstance(model, EquiGate) and model.dim == 2:
        j = 1 - k
        lf = model.lam_f[0, 1]
        zeta = model.zeta
        xt = x / zeta
        q = model.pair_orthant[0, 1]
        arg = -0.5 * lf - math.log(xt[k] / xt[j]) / lf
        return float(1.0 - ndtr(arg) * q / zeta[k])

    return float(_fd_partial(model, x, k, seed))


def _stdf_mixed2(model, x, seed=0):
    """d2 l / dx_0 dx_1 for a bivariate model (analytic where available)."""
    if isinstance(model, HuslerReiss):
        return _hr_stdf_mixed2_exact(model.lam_f, x, 0, 1)
    if isinstance(model, (SharedGate, EquiGate)):
        lf = model.lam_f[0, 1]
        zeta = model.zeta
        xt = x / zeta
        if isinstance(model, SharedGate):
            q = min(zeta[0], zeta[1])
        else:
            q = model.pair_orthant[0, 1]
        arg = -0.5 * lf - math.log(xt[1] / xt[0]) / lf
        return float(-q * std_normal_pdf(arg) / (zeta[1] * lf * x[0]))
    if isinstance(model, MarshallOlkin):
        return 0.0
    # nested central differences of the exact stdf (SkewHuslerReiss, Esn)
    h0 = 1e-4 * x[0]
    h1 = 1e-4 * x[1]

    def l(a, b):
        return _stdf_positive(model, np.array([a, b]), seed, 1e-7)

    return (l(x[0] + h0, x[1] + h1) - l(x[0] + h0, x[1] - h1)
            - l(x[0] - h0, x[1] + h1) + l(x[0] - h0, x[1] - h1)) / (4.0 * h0 * h1)


# ---------------------------------------------------------------------------
# EV copula / EV distribution


def ev_copula_cdf(model, u, seed=0):
    """Extreme-value copula C(u) = exp(-l(-log u)) on (0, 1]^d."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if len(u) != model.dim:
        raise DimMismatch("u has wrong length")
    if np.any(u <= 0) or np.any(u > 1):
        raise DomainError("copula argument must lie in (0, 1]^d")
    x = -np.log(u)
    if not np.any(x > 0):
        return 1.0
    return float(math.exp(-stdf(model, x, seed=seed)))


def ev_copula_pdf2(model, u1, u2, seed=0):
    """Bivariate EV copula density at (u1, u2) in (0, 1)^2.

    The model must already be restricted to the pair (use :func:`margin`).
    Mixed second derivatives are analytic for the closed-form families and
    nested central differences otherwise.
    """
    if model.dim != 2:
        raise DimError("pdf2 needs a bivariate (restricted) model")
    if not (0 < u1 < 1 and 0 < u2 < 1):
        raise DomainError("copula density argument must lie in (0, 1)^2")
    x = np.array([-math.log(u1), -math.log(u2)])
    l0 = _stdf_positive(model, x, seed, 1e-7)
    l1 = stdf_partial(model, x, 0, seed=seed)
    l2 = stdf_partial(model, x, 1, seed=seed)
    l12 = _stdf_mixed2(model, x, seed=seed)
    return float(math.exp(-l0) / (u1 * u2) * (l1 * l2 - l12))


def mev_cdf(model, x, margins, seed=0):
    """Multivariate EV distribution: the EV copula with GEV margins."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    from .kernels import gev_cdf  # local import to avoid cycle at module load

    u = np.array([gev_cdf(xi, m) for xi, m in zip(x, margins)])
    if np.any(u == 0):
        return 0.0
    return ev_copula_cdf(model, np.minimum(u, 1.0), seed=seed)


def mev_pdf2(model, x1, x2, margins, seed=0):
    """Bivariate EV density: copula density times marginal densities."""
    from .kernels import gev_cdf, gev_pdf

    u1 = gev_cdf(x1, margins[0])
    u2 = gev_cdf(x2, margins[1])
    if not (0 < u1 < 1 and 0 < u2 < 1):
        raise DomainError("point outside the interior of the margins")
    return (ev_copula_pdf2(model, u1, u2, seed=seed)
            * gev_pdf(x1, margins[0]) * gev_pdf(x2, margins[1]))


# ---------------------------------------------------------------------------
# multivariate generalized Pareto (standardized unit-Pareto scale)


def mgpd_cdf(model, x, seed=0):
    """mGPD distribution function H(x) = {l((x ^ 1)^-1) - l(x^-1)} / l(1).

    Zero whenever x <= 1 componentwise; tends to one as x -> infinity.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if len(x) != model.dim:
        raise DimMismatch("x has wrong length")
    if np.any(x < 0):
        raise DomainError("mGPD argument must be nonnegative")
    x = np.maximum(x, 1e-12)
    ones = np.ones(model.dim)
    l_ones = stdf(model, ones, seed=seed)
    a = stdf(model, 1.0 / np.minimum(x, 1.0), seed=seed)
    b = stdf(model, 1.0 / x, seed=seed)
    return float(min(1.0, max(0.0, (a - b) / l_ones)))


def mgpd_pdf(model, x, pivot=0, seed=0):
    """mGPD density on the interior {x > 0, max(x) > 1}.

    Closed forms: HuslerReiss (any d), EsnHuslerReiss (d <= 11), SharedGate
    and EquiGate (d = 2).  MarshallOlkin has no density and SkewHuslerReiss
    has no implemented one; both raise UnsupportedModel.  The HR and ESN
    forms are pivot-invariant; ``pivot`` selects the pivot coordinate.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if len(x) != model.dim:
        raise DimMismatch("x has wrong length")
    if np.any(x <= 0):
        raise DomainError("density argument must be strictly positive")
    if np.max(x) <= 1.0:
        return 0.0

    if isinstance(model, HuslerReiss):
        return float(np.exp(_hr_mgpd_logpdf_rows(model.lam_f, x[None, :], pivot,
                                                 _stdf_positive(model, np.ones(model.dim), seed, 1e-7)))[0])

    if isinstance(model, EsnHuslerReiss):
        return float(np.exp(_esn_mgpd_logpdf_rows(model, x[None, :], pivot,
                                                  model.stdf_at_ones))[0])

    if isinstance(model, (SharedGate, EquiGate)):
        if model.dim != 2:
            raise UnsupportedModel("gated closed-form density is bivariate")
        lf = model.lam_f[0, 1]
        zeta = model.zeta
        if isinstance(model, SharedGate):
            q = min(zeta[0], zeta[1])
        else:
            q = model.pair_orthant[0, 1]
        l_ones = _stdf_positive(model, np.ones(2), seed, 1e-7)
        i, j = (0, 1) if pivot == 0 else (1, 0)
        # the stdf ratio x_i/zeta_i turns into x_i * zeta_i on the Pareto scale
        arg = -0.5 * lf - math.log((x[i] * zeta[i]) / (x[j] * zeta[j])) / lf
        return float(q * std_normal_pdf(arg)
                     / (zeta[j] * lf * x[i] * x[j] ** 2 * l_ones))

    raise UnsupportedModel(
        f"{type(model).__name__} has no (implemented) mGPD density")


def _hr_mgpd_logpdf_rows(lam_f, X, pivot, l_ones):
    """log mGPD density of HuslerReiss for rows X (m, d), vectorized."""
    d = X.shape[1]
    idx = [i for i in range(d) if i != pivot]
    lk = lam_f[idx, pivot]
    U = 0.5 * lk[None, :] + np.log(X[:, idx] / X[:, [pivot]]) / lk[None, :]
    sig = _hr_sigma_bar(lam_f, pivot)
    L = np.linalg.cholesky(sig + 1e-14 * np.eye(d - 1))
    sol = np.linalg.solve(L, U.T)
    maha = np.sum(sol * sol, axis=0)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    lognorm = -0.5 * ((d - 1) * math.log(2 * math.pi) + logdet)
    jac = (2.0 * np.log(X[:, pivot]) + np.sum(np.log(X[:, idx]), axis=1)
           + np.sum(np.log(lk)))
    return lognorm - 0.5 * maha - math.log(l_ones) - jac


def _esn_mgpd_logpdf_rows(model, X, pivot, l_ones):
    """log mGPD density of EsnHuslerReiss for rows X (m, d), vectorized."""
    d = X.shape[1]
    idx = [i for i in range(d) if i != pivot]
    lk = model.lam_f[idx, pivot]
    norms = model.norms
    U = (0.5 * lk[None, :]
         + np.log((X[:, idx] * norms[None, idx]) / (X[:, [pivot]] * norms[pivot]))
         / lk[None, :])
    sig = _hr_sigma_bar(model.lam_f, pivot)
    delta = model._delta_aug(pivot)
    logdens = esn_logpdf(U, sig, delta, float(model.tau[pivot])) if d > 1 else 0.0
    jac = (2.0 * np.log(X[:, pivot]) + np.sum(np.log(X[:, idx]), axis=1)
           + np.sum(np.log(lk)))
    return logdens - math.log(l_ones) - jac


# ---------------------------------------------------------------------------
# boundary masses and singular components


def boundary_mass(model, j, seed=0):
    """Point mass the mGPD places on the face {y_j = 0}.

    Zero for HuslerReiss and EsnHuslerReiss; closed subset formulas for the
    gated families and MarshallOlkin (any d), all consistent with the
    numerical limit of the face-mass representation.
    """
    if not 0 <= j < model.dim:
        raise DimError("face index out of range")
    if isinstance(model, (HuslerReiss, EsnHuslerReiss)):
        return 0.0
    l_ones = stdf(model, np.ones(model.dim), seed=seed)
    others = [i for i in range(model.dim) if i != j]

    if isinstance(model, MarshallOlkin):
        zx = 1.0 / model.zeta
        total = 0.0
        for mask, p in model.subset_probs.items():
            if (mask >> j) & 1 or p <= 0:
                continue
            members = [i for i in range(model.dim) if (mask >> i) & 1]
            total += p * max(zx[m] for m in members)
        return float(total / l_ones)

    if isinstance(model, SharedGate):
        zx = 1.0 / model.zeta
        total = 0.0
        for w, idx in model.upper_sets:
            if j in idx:
                continue
            sub = list(idx)
            total += w * _hr_stdf(model.lam_f[np.ix_(sub, sub)], zx[sub], seed=seed)
        return float(total / l_ones)

    if isinstance(model, EquiGate):
        zx = 1.0 / model.zeta
        total = 0.0
        for mask, p in model.subset_probs.items():
            if (mask >> j) & 1 or p <= 0:
                continue
            sub = [i for i in range(model.dim) if (mask >> i) & 1]
            total += p * _hr_stdf(model.lam_f[np.ix_(sub, sub)], zx[sub], seed=seed)
        return float(total / l_ones)

    if isinstance(model, SkewHuslerReiss):
        # exact limit of the stdf partial as the vanishing coordinate -> 0
        a = model.alpha
        c = model.c
        z1z2, z1g1, z1g2, z2g1, z2g2, g1g2 = model.rho
        i = others[0]
        if i == 0:
            num = bvn_cdf(a[0] * z1g2 - c[1], a[0] * z1g1 - c[0], g1g2)
        else:
            num = bvn_cdf(a[1] * z2g1 - c[0], a[1] * z2g2 - c[1], g1g2)
        xi_lim = 1.0 - float(num) / model.norms[i]
        return float(max(0.0, xi_lim) / l_ones)

    raise UnsupportedModel(f"unknown model type {type(model).__name__}")


def boundary_mass_numeric(model, j, v=1e-8, seed=0):
    """Face mass via the numerical limit (l(v, ..., 1_j, ..., v) - 1)/(v l(1)).

    Richardson-checked at 100 v; disagreement above 1e-4 raises
    NonConvergence.
    """
    d = model.dim
    l_ones = stdf(model, np.ones(d), seed=seed)

    def est(vv):
        x = np.full(d, vv)
        x[j] = 1.0
        base = np.zeros(d)
        base[j] = 1.0
        return (stdf(model, x, seed=seed, target_abs_err=1e-7)
                - stdf(model, base, seed=seed, target_abs_err=1e-7)) / vv

    a = est(v)
    b = est(v * 100.0)
    if abs(a - b) > 1e-4:
        raise NonConvergence(f"face-mass limit not converged: {a:.6g} vs {b:.6g}")
    return float(max(0.0, a / l_ones))


def singular_components(model):
    """Line and face masses of the bivariate MarshallOlkin mGPD.

    Returns a dict with the line slope dy2/dy1, the line mass and both face
    masses; the three masses add to one (the distribution has no absolutely
    continuous part).
    """
    if not isinstance(model, MarshallOlkin):
        raise UnsupportedModel("singular components exist only for MarshallOlkin")
    if model.dim != 2:
        raise DimError("singular components implemented for d = 2")
    zeta = model.zeta
    p12 = model.subset_probs[0b11]
    alpha = p12 / zeta[0]
    beta = p12 / zeta[1]
    l_ones = 2.0 - min(alpha, beta)
    return {
        "line_slope": beta / alpha,
        "line_mass": max(alpha, beta) / l_ones,
        "face_masses": ((1.0 - beta) / l_ones, (1.0 - alpha) / l_ones),
        "alpha": float(alpha),
        "beta": float(beta),
    }


# ---------------------------------------------------------------------------
# summary coefficients


def extremal_coefficient(model, seed=0):
    """theta = l(1, ..., 1), between 1 (dependence) and d (independence)."""
    return stdf(model, np.ones(model.dim), seed=seed)


def chi_u(model, seed=0):
    """Upper tail dependence coefficient d - l(1, ..., 1)."""
    return model.dim - extremal_coefficient(model, seed=seed)


def pickands(model, w, seed=0):
    """Pickands dependence function A(w) = l(w) on the unit simplex.

    For bivariate models a scalar t is accepted and read as w = (t, 1-t).
    """
    w = np.atleast_1d(np.asarray(w, dtype=float))
    if len(w) == 1 and model.dim == 2:
        w = np.array([w[0], 1.0 - w[0]])
    if len(w) != model.dim:
        raise SimplexError("w has wrong length")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise SimplexError("w must lie on the unit simplex")
    if np.any(w == 0):
        pos = w > 0
        if pos.sum() == 1:
            return 1.0
        return stdf(margin(model, np.where(pos)[0]), w[pos], seed=seed)
    return stdf(model, w, seed=seed)
