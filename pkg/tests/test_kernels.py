import numpy as np
import pytest
from numpy.testing import assert_allclose

from tailfactor import kernels as K
from tailfactor.errors import (
    DegenerateNormalizer,
    DimMismatch,
    DomainError,
    InvalidModel,
    NotPSD,
    OutOfSupport,
)


def rand_corr(d, rng):
    a = rng.normal(size=(d, d + 2))
    c = a @ a.T
    s = np.sqrt(np.diag(c))
    return c / np.outer(s, s)


# ---------------------------------------------------------------------------
# univariate normal


def test_std_normal_basics():
    assert K.std_normal_cdf(0.0) == 0.5
    assert K.std_normal_cdf(np.inf) == 1.0
    assert K.std_normal_cdf(-np.inf) == 0.0
    # 30-digit erf evaluation: Phi(1) = 0.841344746068542948585232545632
    assert_allclose(K.std_normal_cdf(1.0), 0.8413447460685429, rtol=1e-15)


def test_std_normal_symmetry():
    x = np.linspace(-8, 8, 101)
    assert_allclose(K.std_normal_cdf(-x), 1.0 - K.std_normal_cdf(x), atol=1e-15)


# ---------------------------------------------------------------------------
# bivariate normal


def test_bvn_orthant_identity():
    for rho in (-0.95, -0.5, 0.0, 0.3, 0.8, 0.99):
        assert_allclose(K.bvn_cdf(0.0, 0.0, rho),
                        0.25 + np.arcsin(rho) / (2 * np.pi), atol=1e-14)


def test_bvn_independence():
    h, k = 0.7, -1.3
    assert_allclose(K.bvn_cdf(h, k, 0.0),
                    K.std_normal_cdf(h) * K.std_normal_cdf(k), atol=1e-15)


def test_bvn_quadrature_oracle():
    # dblquad of the bivariate density, epsabs 1e-14: 0.013780716045358679
    assert_allclose(K.bvn_cdf(-1.2, -2.0, 0.6), 0.013780716045358679,
                    atol=1e-10)


def test_bvn_reflection_identity():
    rng = np.random.default_rng(5)
    for _ in range(200):
        h, k = rng.normal(size=2) * 2
        rho = rng.uniform(-0.999, 0.999)
        lhs = K.bvn_cdf(h, k, rho) + K.bvn_cdf(h, -k, -rho)
        assert_allclose(lhs, K.std_normal_cdf(h), atol=1e-12)


def test_bvn_symmetry_in_arguments():
    assert K.bvn_cdf(0.4, -1.1, 0.35) == K.bvn_cdf(-1.1, 0.4, 0.35)


def test_bvn_degenerate_rho():
    assert_allclose(K.bvn_cdf(1.0, 0.5, 1.0), K.std_normal_cdf(0.5), atol=1e-15)
    expected = K.std_normal_cdf(1.0) + K.std_normal_cdf(0.5) - 1.0
    assert_allclose(K.bvn_cdf(1.0, 0.5, -1.0), expected, atol=1e-15)


def test_bvn_vectorized_matches_scalar():
    rng = np.random.default_rng(11)
    h = rng.normal(size=50) * 2
    k = rng.normal(size=50) * 2
    r = rng.uniform(-1, 1, 50)
    vec = K.bvn_cdf(h, k, r)
    sca = [K.bvn_cdf(float(a), float(b), float(c)) for a, b, c in zip(h, k, r)]
    assert_allclose(vec, sca, rtol=0, atol=0)


def test_bvn_rejects_bad_rho():
    with pytest.raises(DomainError):
        K.bvn_cdf(0.0, 0.0, 1.5)


# ---------------------------------------------------------------------------
# multivariate normal CDF


def test_mvn_total_mass():
    assert K.mvn_cdf([np.inf] * 5, np.eye(5)).value == 1.0


def test_mvn_independent_orthant_d3():
    res = K.mvn_cdf([0.0, 0.0, 0.0], np.eye(3))
    assert_allclose(res.value, 0.125, atol=1e-10)


def test_mvn_equicorrelated_orthant_d4():
    # exact value 1/(d+1) at rho = 1/2; cross-checked by the 1-D
    # conditional quadrature oracle (0.20000000000000004)
    corr = K.CorrelationMatrix.equicorrelated(4, 0.5)
    res = K.mvn_cdf([0.0] * 4, corr, target_abs_err=1e-6, seed=3)
    assert abs(res.value - 0.2) <= max(1e-6, res.abs_error)


def test_mvn_deterministic_for_fixed_seed():
    rng = np.random.default_rng(2)
    R = rand_corr(5, rng)
    b = rng.normal(size=5)
    a = K.mvn_cdf(b, R, seed=17)
    c = K.mvn_cdf(b, R, seed=17)
    assert a.value == c.value and a.abs_error == c.abs_error


def test_mvn_neg_inf_short_circuit():
    assert K.mvn_cdf([0.5, -np.inf], np.eye(2)).value == 0.0


def test_mvn_marginalizes_infinite_bounds():
    res = K.mvn_cdf([0.3, np.inf, -0.2, np.inf], np.eye(4))
    expected = K.std_normal_cdf(0.3) * K.std_normal_cdf(-0.2)
    assert_allclose(res.value, expected, atol=1e-10)


def test_mvn_permutation_invariance():
    rng = np.random.default_rng(7)
    for _ in range(100):
        d = rng.integers(3, 7)
        R = rand_corr(d, rng)
        b = rng.normal(size=d) * 1.5
        r1 = K.mvn_cdf(b, R, target_abs_err=1e-5, seed=1)
        perm = rng.permutation(d)
        r2 = K.mvn_cdf(b[perm], R[np.ix_(perm, perm)],
                       target_abs_err=1e-5, seed=1)
        tol = max(1e-6, r1.abs_error + r2.abs_error)
        assert abs(r1.value - r2.value) <= tol


def test_mvn_block_diagonal_factorizes():
    rng = np.random.default_rng(9)
    for _ in range(10):
        R = np.eye(6)
        R[:3, :3] = rand_corr(3, rng)
        R[3:, 3:] = rand_corr(3, rng)
        b = rng.normal(size=6)
        whole = K.mvn_cdf(b, R, target_abs_err=1e-6, seed=4)
        p1 = K.mvn_cdf(b[:3], R[:3, :3])
        p2 = K.mvn_cdf(b[3:], R[3:, 3:])
        tol = whole.abs_error + p1.abs_error + p2.abs_error + 1e-9
        assert abs(whole.value - p1.value * p2.value) <= tol


def test_mvn_rejects_not_psd():
    bad = np.array([[1.0, 0.9, -0.9], [0.9, 1.0, 0.9], [-0.9, 0.9, 1.0]])
    with pytest.raises(NotPSD):
        K.mvn_cdf([0.0, 0.0, 0.0], bad)


def test_mvn_dimension_cap():
    with pytest.raises(DimMismatch):
        K.mvn_cdf([0.0] * 13, np.eye(13))


def test_mvn_target_floor():
    with pytest.raises(DomainError):
        K.mvn_cdf([0.0, 0.0], np.eye(2), target_abs_err=1e-9)


# ---------------------------------------------------------------------------
# orthant probabilities


def test_orthant_all_upper_at_inf():
    res = K.mvn_orthant([np.inf, np.inf], [False, False], np.eye(2))
    assert res.value == 1.0


def test_orthant_inclusion_exclusion_identity():
    c1, c2, rho = 0.4, -0.3, 0.55
    R = np.array([[1.0, rho], [rho, 1.0]])
    res = K.mvn_orthant([c1, c2], [True, False], R)
    expected = K.std_normal_cdf(c2) - K.bvn_cdf(c1, c2, rho)
    assert_allclose(res.value, expected, atol=1e-13)


def test_orthant_d3_monte_carlo_oracle():
    # 1e7 joint normal draws, seed 20240809: P(Z1>0.8, Z2>1.2, Z3<1.0)
    # = 0.0272326 with binomial se 5.15e-5
    R = K.CorrelationMatrix.equicorrelated(3, 0.5)
    res = K.mvn_orthant([0.8, 1.2, 1.0], [True, True, False], R)
    assert abs(res.value - 0.0272326) <= 3 * 5.15e-5


def test_orthant_partition_mismatch():
    with pytest.raises(DimMismatch):
        K.mvn_orthant([0.0, 0.0], [True], np.eye(2))


# ---------------------------------------------------------------------------
# extended skew-normal


def test_esn_reduces_to_normal_at_zero_delta():
    corr = np.array([[1.0, 0.3], [0.3, 1.0]])
    res = K.esn_cdf([0.5, 1.0], corr, [0.0, 0.0], 0.7)
    assert_allclose(res.value, K.bvn_cdf(0.5, 1.0, 0.3), atol=1e-12)


def test_esn_total_mass():
    rng = np.random.default_rng(21)
    for _ in range(50):
        d = rng.integers(2, 5)
        corr = rand_corr(d, rng)
        # shrink delta to keep the augmented matrix valid
        delta = rng.uniform(-0.4, 0.4, d) * 0.5
        tau = rng.normal()
        try:
            res = K.esn_cdf([np.inf] * d, corr, delta, tau)
        except NotPSD:
            continue
        assert abs(res.value - 1.0) <= max(res.abs_error, 1e-12)


def test_esn_selection_mc_oracle():
    # 1e7-draw selection-representation MC, seed 987654321:
    # 0.6857887001628811 with se 1.77e-4
    corr = np.array([[1.0, 0.3], [0.3, 1.0]])
    res = K.esn_cdf([0.5, 1.0], corr, [0.4, 0.2], 0.5)
    assert abs(res.value - 0.6857887001628811) <= 3 * 1.77e-4


def test_esn_degenerate_normalizer():
    corr = np.eye(2)
    with pytest.raises(DegenerateNormalizer):
        K.esn_cdf([0.0, 0.0], corr, [0.1, 0.1], -40.0)


def test_esn_logpdf_matches_cdf_differences():
    corr = np.array([[1.0, 0.3], [0.3, 1.0]])
    delta = np.array([0.4, 0.2])
    tau = 0.5
    u = np.array([0.5, 1.0])
    h = 1e-4

    def cdf(a, b):
        return K.esn_cdf([a, b], corr, delta, tau).value

    fd = (cdf(u[0] + h, u[1] + h) - cdf(u[0] + h, u[1] - h)
          - cdf(u[0] - h, u[1] + h) + cdf(u[0] - h, u[1] - h)) / (4 * h * h)
    assert_allclose(np.exp(K.esn_logpdf(u, corr, delta, tau)), fd, rtol=1e-4)


# ---------------------------------------------------------------------------
# GEV margins


def test_gev_gumbel_value():
    assert_allclose(K.gev_cdf(0.0, K.GevParams()), np.exp(-1.0), rtol=1e-15)


def test_gev_unit_frechet_identity():
    p = K.GevParams(1.0, 1.0, 1.0)
    for x in (0.5, 1.0, 3.0, 10.0):
        assert_allclose(K.gev_cdf(x, p), np.exp(-1.0 / x), rtol=1e-14)


def test_gev_quantile_round_trip():
    p = K.GevParams(1.0, 2.0, 0.2)
    assert_allclose(K.gev_quantile(K.gev_cdf(2.7, p), p), 2.7, atol=1e-12)


def test_gev_cdf_monotone():
    rng = np.random.default_rng(3)
    for _ in range(20):
        p = K.GevParams(rng.normal(), rng.uniform(0.5, 3),
                        rng.uniform(-0.4, 0.6))
        lo = p.mu - p.sigma / p.xi if p.xi > 0 else -30.0
        hi = p.mu - p.sigma / p.xi if p.xi < 0 else 30.0
        x = np.linspace(lo + 1e-6, hi - 1e-6, 1000)
        cdf = K.gev_cdf(x, p)
        assert np.all(np.diff(cdf) >= -1e-15)


def test_gev_gumbel_branch_switch():
    # shapes below 1e-8 use the Gumbel form exactly
    a = K.gev_cdf(1.3, K.GevParams(0, 1, 5e-9))
    b = K.gev_cdf(1.3, K.GevParams(0, 1, 0.0))
    assert a == b


def test_gev_pdf_out_of_support():
    with pytest.raises(OutOfSupport):
        K.gev_pdf(-10.0, K.GevParams(0.0, 1.0, 0.5))
    with pytest.raises(OutOfSupport):
        K.gev_quantile(1.5, K.GevParams())


def test_gev_invalid_scale():
    with pytest.raises(InvalidModel):
        K.GevParams(0.0, -1.0, 0.0)


# ---------------------------------------------------------------------------
# factor laws


def test_factor_quantiles():
    assert_allclose(K.factor_quantile(1 - np.exp(-1.0),
                                      K.FactorLaw.exponential()), 1.0,
                    rtol=1e-12)
    assert_allclose(K.factor_quantile(0.75, K.FactorLaw.pareto(2.0)), 2.0,
                    rtol=1e-14)
    assert_allclose(K.factor_quantile(1 - np.exp(-1.0),
                                      K.FactorLaw.weibull(0.5)), 1.0,
                    rtol=1e-12)


def test_factor_law_validation():
    with pytest.raises(InvalidModel):
        K.FactorLaw.pareto(-1.0)
    with pytest.raises(InvalidModel):
        K.FactorLaw.weibull(1.5)
    with pytest.raises(InvalidModel):
        K.FactorLaw("lognormal")
    with pytest.raises(DomainError):
        K.factor_quantile(1.0, K.FactorLaw.exponential())


# ---------------------------------------------------------------------------
# correlation matrices


def test_correlation_matrix_validation():
    with pytest.raises(NotPSD):
        K.CorrelationMatrix(np.array([[1.0, 0.5], [0.5, 0.9]]))
    with pytest.raises(NotPSD):
        K.CorrelationMatrix(np.array([[1.0, 1.2], [1.2, 1.0]]))
    m = K.CorrelationMatrix.equicorrelated(3, -0.4)
    assert m.dim == 3
