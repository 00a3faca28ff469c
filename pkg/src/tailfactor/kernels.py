"""Gaussian, extended skew-normal and univariate extreme-value kernels.

Everything downstream (tail dependence functions, densities, likelihoods)
is assembled from the routines in this module.  All multivariate normal
probabilities above dimension three are randomized quasi-Monte Carlo
estimates (separation-of-variables with a Richtmyer lattice); dimensions
one to three use exact kernels.  Every stochastic routine is a pure
function of its inputs and a seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox
from scipy.integrate import quad
from scipy.linalg import solve_triangular
from scipy.special import log_ndtr, ndtr, ndtri

from .errors import (
    DegenerateNormalizer,
    DimMismatch,
    DomainError,
    InvalidModel,
    NotPSD,
    OutOfSupport,
)

__all__ = [
    "CorrelationMatrix",
    "CdfResult",
    "GevParams",
    "FactorLaw",
    "std_normal_cdf",
    "std_normal_pdf",
    "std_normal_quantile",
    "bvn_cdf",
    "mvn_cdf",
    "mvn_orthant",
    "esn_cdf",
    "esn_logpdf",
    "gev_cdf",
    "gev_pdf",
    "gev_quantile",
    "factor_quantile",
]

_PSD_TOL = 1e-10
_MAX_CDF_DIM = 12
_SQRT_2PI = math.sqrt(2.0 * math.pi)

# ---------------------------------------------------------------------------
# univariate normal


def std_normal_cdf(x):
    """Standard normal CDF; accepts +-inf and arrays."""
    return ndtr(x)


def std_normal_pdf(x):
    """Standard normal density."""
    x = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * x * x) / _SQRT_2PI
    if out.ndim == 0:
        return float(out)
    return out


def std_normal_quantile(p):
    """Inverse of the standard normal CDF."""
    return ndtri(p)


# ---------------------------------------------------------------------------
# correlation matrices


def _validate_corr(mat, psd_tol=_PSD_TOL):
    a = np.asarray(mat, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NotPSD(f"correlation matrix must be square, got shape {a.shape}")
    d = a.shape[0]
    if not np.allclose(np.diag(a), 1.0, atol=1e-12):
        raise NotPSD("correlation matrix must have unit diagonal")
    if not np.allclose(a, a.T, atol=1e-12):
        raise NotPSD("correlation matrix must be symmetric")
    if np.any(np.abs(a) > 1.0 + 1e-12):
        raise NotPSD("correlation entries must lie in [-1, 1]")
    if d > 1:
        w = np.linalg.eigvalsh(0.5 * (a + a.T))
        if w[0] < -psd_tol:
            raise NotPSD(f"smallest eigenvalue {w[0]:.3e} below tolerance -{psd_tol:.0e}")
    return 0.5 * (a + a.T)


@dataclass(frozen=True)
class CorrelationMatrix:
    """Validated correlation matrix (unit diagonal, symmetric, PSD).

    CDF evaluation is limited to dimension 12.
    """

    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "entries", _validate_corr(self.entries))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def identity(cls, d):
        return cls(np.eye(d))

    @classmethod
    def equicorrelated(cls, d, rho):
        m = np.full((d, d), float(rho))
        np.fill_diagonal(m, 1.0)
        return cls(m)


def _as_corr_array(corr):
    if isinstance(corr, CorrelationMatrix):
        return corr.entries
    return _validate_corr(corr)


def _clip_degenerate(R):
    """Pull |rho| = 1 off-diagonals to sign(rho)*(1 - 1e-12) before Cholesky."""
    R = R.copy()
    off = ~np.eye(R.shape[0], dtype=bool)
    R[off] = np.clip(R[off], -1.0 + 1e-12, 1.0 - 1e-12)
    return R


@dataclass(frozen=True)
class CdfResult:
    """A probability estimate with an error bound and the point count used."""

    value: float
    abs_error: float
    n_points: int

    def __float__(self):
        return self.value


# ---------------------------------------------------------------------------
# bivariate normal (Drezner-Wesolowsky / Genz hybrid quadrature)

_GL6_W = np.array([0.1713244923791705, 0.3607615730481384, 0.4679139345726904])
_GL6_X = np.array([0.9324695142031522, 0.6612093864662647, 0.2386191860831970])
_GL12_W = np.array([
    0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
    0.2031674267230659, 0.2334925365383547, 0.2491470458134029,
])
_GL12_X = np.array([
    0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
    0.5873179542866171, 0.3678314989981802, 0.1252334085114692,
])
_GL20_W = np.array([
    0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
    0.08327674157670475, 0.1019301198172404, 0.1181945319615184,
    0.1316886384491766, 0.1420961093183821, 0.1491729864726037,
    0.1527533871307259,
])
_GL20_X = np.array([
    0.9931285991850949, 0.9639719272779138, 0.9122344282513259,
    0.8391169718222188, 0.7463319064601508, 0.6360536807265150,
    0.5108670019508271, 0.3737060887154196, 0.2277858511416451,
    0.07652652113349733,
])


def _bvn_upper_smooth(h, k, r, w, x):
    # P(X > h, Y > k) for moderate |r|, Gauss-Legendre on the arcsin transform
    hk = h * k
    hs = 0.5 * (h * h + k * k)
    asr = 0.5 * np.arcsin(r)
    total = np.zeros_like(np.broadcast_arrays(h, k, r)[0], dtype=float)
    for wi, xi in zip(w, x):
        for sgn in (-1.0, 1.0):
            sn = np.sin(asr * (1.0 + sgn * xi))
            total += wi * np.exp((sn * hk - hs) / (1.0 - sn * sn))
    return total * asr / (2.0 * math.pi) + ndtr(-h) * ndtr(-k)


def _bvn_upper_tail(h, k, r, w, x):
    # P(X > h, Y > k) for |r| >= 0.925, Drezner-Wesolowsky asymptotic + GL
    h = np.array(h, dtype=float, copy=True)
    k = np.array(k, dtype=float, copy=True)
    neg = r < 0
    k = np.where(neg, -k, k)
    hk = h * k
    bvn = np.zeros_like(h)
    ok = np.abs(r) < 1.0
    a2 = np.where(ok, 1.0 - r * r, 1e-30)
    a = np.sqrt(a2)
    bs = (h - k) ** 2
    c = (4.0 - hk) / 8.0
    d = (12.0 - hk) / 16.0
    asr = -0.5 * (bs / a2 + hk)
    m = ok & (asr > -100.0)
    bvn = np.where(
        m,
        a * np.exp(asr)
        * (1.0 - c * (bs - a2) * (1.0 - d * bs / 5.0) / 3.0 + c * d * a2 * a2 / 5.0),
        bvn,
    )
    m = ok & (hk > -100.0)
    b = np.sqrt(bs)
    sp = _SQRT_2PI * ndtr(-b / np.where(a > 0, a, 1.0))
    bvn = np.where(
        m, bvn - np.exp(-0.5 * hk) * sp * b * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0), bvn
    )
    ah = 0.5 * a
    for wi, xi in zip(w, x):
        for sgn in (-1.0, 1.0):
            xs = (ah * (1.0 + sgn * xi)) ** 2
            rs = np.sqrt(np.maximum(1.0 - xs, 0.0))
            asr1 = -0.5 * (bs / np.where(xs > 0, xs, 1.0) + hk)
            m1 = ok & (asr1 > -100.0)
            sp1 = 1.0 + c * xs * (1.0 + d * xs)
            ep = np.exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / np.where(rs > 0, rs, 1.0)
            bvn = np.where(m1, bvn + ah * wi * np.exp(asr1) * (ep - sp1), bvn)
    bvn = -bvn / (2.0 * math.pi)
    pos = bvn + ndtr(-np.maximum(h, k))
    negv = -bvn + np.maximum(0.0, ndtr(-h) - ndtr(-k))
    out = np.where(neg, negv, pos)
    # exact comonotone / antithetic limits at |r| = 1
    out = np.where(ok, out, np.where(neg, np.maximum(0.0, ndtr(-h) - ndtr(-k)),
                                     ndtr(-np.maximum(h, k))))
    return out


def _bvn_upper(h, k, r):
    """P(X > h, Y > k) for standard bivariate normal, vectorized."""
    h, k, r = np.broadcast_arrays(
        np.asarray(h, float), np.asarray(k, float), np.asarray(r, float)
    )
    out = np.empty(h.shape, dtype=float)
    hinf = np.isposinf(h) | np.isposinf(k)
    lo_h = np.isneginf(h)
    lo_k = np.isneginf(k)
    ar = np.abs(r)
    reg0 = ar < 0.3
    reg1 = (ar >= 0.3) & (ar < 0.75)
    reg2 = (ar >= 0.75) & (ar < 0.925)
    reg3 = ar >= 0.925
    general = ~(hinf | lo_h | lo_k)
    for reg, w, x in (
        (reg0, _GL6_W, _GL6_X),
        (reg1, _GL12_W, _GL12_X),
        (reg2, _GL20_W, _GL20_X),
    ):
        m = general & reg
        if np.any(m):
            out[m] = _bvn_upper_smooth(h[m], k[m], r[m], w, x)
    m = general & reg3
    if np.any(m):
        out[m] = _bvn_upper_tail(h[m], k[m], r[m], _GL20_W, _GL20_X)
    out[hinf] = 0.0
    m = lo_h & lo_k
    out[m] = 1.0
    m = lo_h & ~lo_k & ~hinf
    out[m] = ndtr(-k[m])
    m = lo_k & ~lo_h & ~hinf
    out[m] = ndtr(-h[m])
    return np.clip(out, 0.0, 1.0)


def bvn_cdf(h, k, rho):
    """Bivariate standard normal CDF P(X <= h, Y <= k) with correlation rho.

    Exact quadrature (absolute error at the 1e-15 level); vectorized over
    any broadcastable combination of arguments.
    """
    rho_arr = np.asarray(rho, dtype=float)
    if np.any(np.abs(rho_arr) > 1.0 + 1e-14):
        raise DomainError("|rho| must not exceed 1")
    rho_arr = np.clip(rho_arr, -1.0, 1.0)
    out = _bvn_upper(-np.asarray(h, float), -np.asarray(k, float), rho_arr)
    if out.ndim == 0:
        return float(out)
    return out


# ---------------------------------------------------------------------------
# trivariate normal via conditioning quadrature


def _tvn_cdf_quad(b, R):
    """P(X <= b) in dimension 3 by integrating a conditioned bivariate CDF."""
    # condition on the coordinate whose correlations to the others are smallest
    scores = [max(abs(R[i, j]) for j in range(3) if j != i) for i in range(3)]
    i0 = int(np.argmin(scores))
    if scores[i0] > 0.999:
        return None  # caller falls back to the lattice rule
    rest = [j for j in range(3) if j != i0]
    r01, r02 = R[i0, rest[0]], R[i0, rest[1]]
    s1 = math.sqrt(1.0 - r01 * r01)
    s2 = math.sqrt(1.0 - r02 * r02)
    rc = (R[rest[0], rest[1]] - r01 * r02) / (s1 * s2)
    rc = min(1.0, max(-1.0, rc))
    b0, b1, b2 = b[i0], b[rest[0]], b[rest[1]]

    def f(z):
        return math.exp(-0.5 * z * z) / _SQRT_2PI * float(
            bvn_cdf((b1 - r01 * z) / s1, (b2 - r02 * z) / s2, rc)
        )

    hi = min(b0, 8.5)
    if hi <= -8.5:
        return 0.0, 1e-16, 0
    val, err = quad(f, -8.5, hi, epsabs=1e-12, epsrel=1e-11, limit=200)
    return min(1.0, max(0.0, val)), max(err, 1e-13), 200


# ---------------------------------------------------------------------------
# Genz separation-of-variables with Richtmyer lattice

_LATTICE_PRIMES = np.array([2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31], dtype=float)


def _reorder_cholesky(b, R):
    """Greedy variable reordering by expected truncation + Cholesky factor."""
    d = len(b)
    C = R.copy()
    b = b.copy()
    L = np.zeros((d, d))
    y = np.zeros(d)
    for i in range(d):
        best_j, best_e = i, np.inf
        for j in range(i, d):
            s2 = C[j, j] - L[j, :i] @ L[j, :i]
            s = math.sqrt(max(s2, 0.0))
            num = b[j] - L[j, :i] @ y[:i]
            t = num / s if s > 1e-12 else math.copysign(np.inf, num)
            e = ndtr(t)
            if e < best_e:
                best_e, best_j = e, j
        if best_j != i:
            for arr in (C,):
                arr[[i, best_j], :] = arr[[best_j, i], :]
                arr[:, [i, best_j]] = arr[:, [best_j, i]]
            L[[i, best_j], :] = L[[best_j, i], :]
            b[[i, best_j]] = b[[best_j, i]]
        s2 = C[i, i] - L[i, :i] @ L[i, :i]
        s = math.sqrt(max(s2, 1e-24))
        L[i, i] = s
        for j in range(i + 1, d):
            L[j, i] = (C[j, i] - L[i, :i] @ L[j, :i]) / s
        t = (b[i] - L[i, :i] @ y[:i]) / s
        e = max(ndtr(t), 1e-300)
        y[i] = -math.exp(-0.5 * min(t * t, 1400.0)) / _SQRT_2PI / e if np.isfinite(t) else 0.0
    return b, L


def _sov_integrand(b, L, w):
    """Chained conditional product for a batch of lattice points w (n, d-1)."""
    n = w.shape[0]
    d = len(b)
    tiny = 1e-15
    e = np.full(n, ndtr(b[0] / L[0, 0]))
    prod = e.copy()
    ys = np.empty((n, d - 1))
    for i in range(1, d):
        z = np.clip(w[:, i - 1] * e, tiny, 1.0 - tiny)
        ys[:, i - 1] = ndtri(z)
        e = ndtr((b[i] - ys[:, :i] @ L[i, :i]) / L[i, i])
        prod = prod * e
    return prod


def _genz_lattice(b, R, target_abs_err, seed, max_points):
    d = len(b)
    R = _clip_degenerate(R)
    bb, L = _reorder_cholesky(np.asarray(b, float), R)
    rng = Generator(Philox(key=[np.uint64(seed & (2**64 - 1)), np.uint64(0x6D766E)]))
    q = np.mod(np.sqrt(_LATTICE_PRIMES[: d - 1]), 1.0)
    n_shifts = 12
    n = 1 << 9 if target_abs_err >= 1e-4 else 1 << 11
    total_used = 0
    while True:
        shifts = rng.random((n_shifts, d - 1))
        j = np.arange(1, n + 1, dtype=float)[:, None, None]
        w = np.mod(j * q[None, None, :] + shifts[None, :, :], 1.0)
        w = np.abs(2.0 * w - 1.0)  # baker transform, periodizes the integrand
        vals = _sov_integrand(bb, L, w.reshape(n * n_shifts, d - 1))
        means = vals.reshape(n, n_shifts).mean(axis=0)
        total_used += n_shifts * n
        value = float(means.mean())
        err = 3.0 * float(means.std(ddof=1)) / math.sqrt(n_shifts)
        if err <= target_abs_err or n >= max_points:
            return CdfResult(min(1.0, max(0.0, value)), err, total_used)
        n *= 2


def mvn_cdf(upper, corr, target_abs_err=1e-6, seed=0, max_points=1 << 17):
    """Multivariate standard normal CDF P(X <= upper).

    Parameters
    ----------
    upper : array_like
        Upper integration limits; +-inf entries allowed.
    corr : CorrelationMatrix or array_like
        Correlation matrix, dimension at most 12.
    target_abs_err : float
        Requested absolute error (>= 1e-8); the QMC loop refines until the
        3-sigma error estimate drops below it or `max_points` is reached.
    seed : int
        Seed for the randomized lattice shifts.  Fixed seed gives a
        deterministic result.

    Returns
    -------
    CdfResult
        value, 3-sigma absolute error estimate and number of points used.
        Dimensions 1-3 are computed by exact kernels (error ~1e-13).
    """
    b = np.asarray(upper, dtype=float)
    if b.ndim != 1:
        raise DimMismatch("upper must be a vector")
    if np.any(np.isnan(b)):
        raise DomainError("NaN bound")
    if target_abs_err < 1e-8:
        raise DomainError("target_abs_err must be >= 1e-8")
    R = _as_corr_array(corr)
    d = len(b)
    if R.shape[0] != d:
        raise DimMismatch(f"bounds have length {d}, matrix dimension {R.shape[0]}")
    if d > _MAX_CDF_DIM:
        raise DimMismatch(f"CDF evaluation limited to dimension {_MAX_CDF_DIM}")
    if np.any(np.isneginf(b)):
        return CdfResult(0.0, 0.0, 0)
    finite = ~np.isposinf(b)
    if not np.any(finite):
        return CdfResult(1.0, 0.0, 0)
    if finite.sum() < d:
        idx = np.where(finite)[0]
        b = b[idx]
        R = R[np.ix_(idx, idx)]
        d = len(b)
    if d == 1:
        return CdfResult(float(ndtr(b[0])), 1e-16, 1)
    if d == 2:
        return CdfResult(float(bvn_cdf(b[0], b[1], R[0, 1])), 1e-15, 1)
    if d == 3:
        res = _tvn_cdf_quad(b, _clip_degenerate(R))
        if res is not None:
            return CdfResult(*res)
    return _genz_lattice(b, R, target_abs_err, seed, max_points)


def mvn_orthant(bounds, lower_mask, corr, target_abs_err=1e-7, seed=0):
    """P(X_i > b_i for i in the lower set, X_j < b_j for the rest).

    Computed by negating the lower-bounded coordinates (sign-flipping the
    corresponding rows/columns of the correlation matrix) and evaluating
    the plain CDF.
    """
    b = np.asarray(bounds, dtype=float)
    mask = np.asarray(lower_mask, dtype=bool)
    if b.shape != mask.shape:
        raise DimMismatch("bounds and lower_mask must have equal length")
    R = _as_corr_array(corr)
    sign = np.where(mask, -1.0, 1.0)
    Rf = R * np.outer(sign, sign)
    bf = np.where(mask, -b, b)
    return mvn_cdf(bf, Rf, target_abs_err=target_abs_err, seed=seed)


# ---------------------------------------------------------------------------
# extended skew-normal (selection representation)


def _esn_augmented(corr, delta):
    R = _as_corr_array(corr)
    delta = np.asarray(delta, dtype=float)
    d = R.shape[0]
    if delta.shape != (d,):
        raise DimMismatch("delta must have one entry per coordinate")
    aug = np.empty((d + 1, d + 1))
    aug[:d, :d] = R
    aug[:d, d] = delta
    aug[d, :d] = delta
    aug[d, d] = 1.0
    return _validate_corr(aug)


def esn_cdf(u, corr, delta, tau, seed=0, target_abs_err=1e-7):
    """CDF of the centered extended skew-normal distribution.

    Selection form: the law of U | W < tau where (U, W) is standard normal
    with Corr(U_i, W) = delta_i, so the CDF is
    Phi_{d+1}((u, tau); [[corr, delta], [delta', 1]]) / Phi(tau).
    In the usual skewness/extension parameterization this corresponds to
    skewness -corr^{-1} delta / sqrt(1 - delta' corr^{-1} delta) and
    extension tau / sqrt(1 - delta' corr^{-1} delta).
    """
    aug = _esn_augmented(corr, delta)
    nt = float(ndtr(tau))
    if nt < 1e-300:
        raise DegenerateNormalizer("Phi(tau) underflows")
    u = np.asarray(u, dtype=float)
    res = mvn_cdf(np.append(u, tau), aug, target_abs_err=target_abs_err, seed=seed)
    return CdfResult(min(1.0, res.value / nt), res.abs_error / nt, res.n_points)


def esn_logpdf(u, corr, delta, tau):
    """Log-density of the centered extended skew-normal, vectorized over rows.

    u may be a vector (one point) or an (m, d) matrix of points.
    """
    R = _as_corr_array(corr)
    delta = np.asarray(delta, dtype=float)
    d = R.shape[0]
    a = np.linalg.solve(R, delta)
    s2 = 1.0 - float(delta @ a)
    if s2 <= 0.0:
        raise NotPSD("delta incompatible with corr (conditional variance <= 0)")
    s = math.sqrt(s2)
    U = np.atleast_2d(np.asarray(u, dtype=float))
    if U.shape[1] != d:
        raise DimMismatch("points must have one column per coordinate")
    chol = np.linalg.cholesky(_clip_degenerate(R) + 1e-14 * np.eye(d))
    sol = solve_triangular(chol, U.T, lower=True).T
    maha = np.sum(sol * sol, axis=1)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    lognorm = -0.5 * (d * math.log(2.0 * math.pi) + logdet)
    out = lognorm - 0.5 * maha + log_ndtr((tau - U @ a) / s) - log_ndtr(tau)
    if np.ndim(u) == 1:
        return float(out[0])
    return out


# ---------------------------------------------------------------------------
# generalized extreme value margins

_GUMBEL_SHAPE_EPS = 1e-8


@dataclass(frozen=True)
class GevParams:
    """GEV location/scale/shape; sigma must be positive."""

    mu: float = 0.0
    sigma: float = 1.0
    xi: float = 0.0

    def __post_init__(self):
        if not (self.sigma > 0):
            raise InvalidModel("GEV scale must be positive")


def gev_cdf(x, params: GevParams):
    """GEV CDF; the Gumbel branch is taken when |xi| < 1e-8."""
    x = np.asarray(x, dtype=float)
    t = (x - params.mu) / params.sigma
    if abs(params.xi) < _GUMBEL_SHAPE_EPS:
        out = np.exp(-np.exp(-t))
    else:
        z = 1.0 + params.xi * t
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = np.where(z > 0, np.exp(-np.maximum(z, 1e-300) ** (-1.0 / params.xi)),
                           0.0 if params.xi > 0 else 1.0)
    if out.ndim == 0:
        return float(out)
    return out


def gev_pdf(x, params: GevParams):
    """GEV density; raises OutOfSupport outside the support when xi != 0."""
    x = np.asarray(x, dtype=float)
    t = (x - params.mu) / params.sigma
    if abs(params.xi) < _GUMBEL_SHAPE_EPS:
        out = np.exp(-t - np.exp(-t)) / params.sigma
    else:
        z = 1.0 + params.xi * t
        if np.any(z <= 0):
            raise OutOfSupport("x outside GEV support")
        w = z ** (-1.0 / params.xi)
        out = np.exp(-w) * w / (z * params.sigma)
    if out.ndim == 0:
        return float(out)
    return out


def gev_logpdf_safe(x, params: GevParams):
    """Like log(gev_pdf) but returns -inf outside the support (for MLE)."""
    x = np.asarray(x, dtype=float)
    t = (x - params.mu) / params.sigma
    if abs(params.xi) < _GUMBEL_SHAPE_EPS:
        out = -t - np.exp(-t) - math.log(params.sigma)
    else:
        z = 1.0 + params.xi * t
        out = np.full_like(t, -np.inf)
        ok = z > 0
        logz = np.log(z[ok])
        out[ok] = -(1.0 / params.xi + 1.0) * logz - np.exp(-logz / params.xi) \
            - math.log(params.sigma)
    if out.ndim == 0:
        return float(out)
    return out


def gev_quantile(p, params: GevParams):
    """GEV quantile; p must lie strictly inside (0, 1)."""
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0) | (p >= 1)):
        raise OutOfSupport("quantile level must lie in (0, 1)")
    ln = -np.log(p)
    if abs(params.xi) < _GUMBEL_SHAPE_EPS:
        out = params.mu - params.sigma * np.log(ln)
    else:
        out = params.mu + params.sigma * (ln ** (-params.xi) - 1.0) / params.xi
    if out.ndim == 0:
        return float(out)
    return out


# ---------------------------------------------------------------------------
# laws for the common heavy factor


@dataclass(frozen=True)
class FactorLaw:
    """Law of the common factor: unit exponential, Pareto or Weibull.

    Pareto has cdf 1 - x^(-beta) on x > 1 (beta > 0); Weibull has cdf
    1 - exp(-x^beta) with beta strictly inside (0, 1).
    """

    tag: str
    beta: float | None = None

    def __post_init__(self):
        if self.tag not in ("exponential", "pareto", "weibull"):
            raise InvalidModel(f"unknown factor law {self.tag!r}")
        if self.tag == "exponential":
            if self.beta is not None:
                raise InvalidModel("exponential factor law takes no shape parameter")
        elif self.tag == "pareto":
            if self.beta is None or not (self.beta > 0):
                raise InvalidModel("Pareto factor law needs beta > 0")
        else:
            if self.beta is None or not (0.0 < self.beta < 1.0):
                raise InvalidModel("Weibull factor law needs beta strictly in (0, 1)")

    @classmethod
    def exponential(cls):
        return cls("exponential")

    @classmethod
    def pareto(cls, beta):
        return cls("pareto", float(beta))

    @classmethod
    def weibull(cls, beta):
        return cls("weibull", float(beta))


def factor_quantile(p, law: FactorLaw):
    """Exact inverse CDF of a factor law, for p in (0, 1)."""
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0) | (p >= 1)):
        raise DomainError("factor quantile level must lie in (0, 1)")
    if law.tag == "exponential":
        out = -np.log1p(-p)
    elif law.tag == "pareto":
        out = (1.0 - p) ** (-1.0 / law.beta)
    else:
        out = (-np.log1p(-p)) ** (1.0 / law.beta)
    if out.ndim == 0:
        return float(out)
    return out
