import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from tailfactor import inference as I
from tailfactor import kernels as K
from tailfactor import models as M
from tailfactor import simulate as S
from tailfactor.errors import (
    DomainError,
    InvalidFamily,
    MarginFitFailure,
    NegativeDeviance,
    NonConvergence,
    RowOnBoundary,
    ZeroMassFace,
)

RHO2 = np.array([[1.0, 0.6], [0.6, 1.0]])


def uniform_sample(n, d, seed=0):
    rng = np.random.default_rng(seed)
    return S.SampleMatrix(rng.uniform(0.02, 0.98, (n, d)), "uniform")


# ---------------------------------------------------------------------------
# spatial parameterization


def test_powered_exponential_value():
    sp = I.SpatialParam(np.array([[0.0, 0.0], [1.5, 0.0]]), p1=1.5, p2=1.0)
    model = I.build_model("hr", sp)
    lam_f = model.lam_f[0, 1]
    # rho = exp(-dst/p1) = e^-1 at dst = 1.5
    assert_allclose(lam_f, math.sqrt(2 * (1 - math.exp(-1.0))), rtol=1e-12)


def test_trend_threshold_value():
    c = I.trend_thresholds(np.array([[1.0, 1.0]]), (0.5, 1.5, -0.5))
    assert_allclose(c, [1.5], rtol=1e-15)


def test_coincident_coordinates_perturbed():
    sp = I.SpatialParam(np.array([[0.2, 0.2], [0.2, 0.2]]), p1=1.0, p2=1.0,
                        beta=(0.5, 0.0, 0.0))
    model = I.build_model("shared-gate", sp)
    assert model.lam_f[0, 1] > 0  # rho pulled just below one


def test_spatial_validation():
    with pytest.raises(DomainError):
        I.SpatialParam(np.zeros((3, 2)), p1=-1.0, p2=1.0)
    with pytest.raises(DomainError):
        I.SpatialParam(np.zeros((3, 2)), p1=1.0, p2=2.5)
    with pytest.raises(InvalidFamily):
        I.build_model("esn-hr", I.SpatialParam(np.zeros((2, 2)), p1=1, p2=1))


# ---------------------------------------------------------------------------
# pairwise block-maxima objective


def test_pairwise_independence_limit():
    model = M.HuslerReiss(np.array([[0.0, 100.0], [100.0, 0.0]]))
    data = uniform_sample(1, 2, seed=1)
    assert abs(I.pairwise_loglik_bm(data, model)) <= 1e-4


def test_pairwise_doubling_additivity():
    model = M.SharedGate([1.0, 1.0, 1.0], [0.5, 0.8, 1.1],
                         np.array([[1, .5, .3], [.5, 1, .4], [.3, .4, 1]]))
    data = uniform_sample(30, 3, seed=2)
    single = I.pairwise_loglik_bm(data, model)
    doubled = I.pairwise_loglik_bm(
        S.SampleMatrix(np.vstack([data.data, data.data]), "uniform"), model)
    assert_allclose(doubled, 2 * single, atol=1e-10)


def test_pairwise_equals_sum_of_pair_objectives():
    model = M.SharedGate([1.0, 1.0, 1.0], [0.5, 0.8, 1.1],
                         np.array([[1, .5, .3], [.5, 1, .4], [.3, .4, 1]]))
    data = uniform_sample(25, 3, seed=3)
    total = I.pairwise_loglik_bm(data, model)
    parts = 0.0
    for (i, j) in ((0, 1), (0, 2), (1, 2)):
        sub = M.margin(model, (i, j))
        parts += I.pairwise_loglik_bm(
            S.SampleMatrix(data.data[:, [i, j]], "uniform"), sub)
    assert_allclose(total, parts, atol=1e-12)


def test_pairwise_row_order_invariance():
    model = M.EquiGate([1.0, 1.0], [0.8, 1.2], RHO2, 0.5)
    data = uniform_sample(500, 2, seed=4)
    base = I.pairwise_loglik_bm(data, model)
    perm = np.random.default_rng(0).permutation(500)
    shuffled = S.SampleMatrix(data.data[perm], "uniform")
    assert_allclose(I.pairwise_loglik_bm(shuffled, model), base, atol=1e-10)


def test_pairwise_equi_gate_near_one_matches_shared():
    data = uniform_sample(100, 2, seed=5)
    eq = M.EquiGate([1.0, 1.0], [0.8, 1.2], RHO2, 1.0 - 1e-9)
    sg = M.SharedGate([1.0, 1.0], [0.8, 1.2], RHO2)
    assert_allclose(I.pairwise_loglik_bm(data, eq),
                    I.pairwise_loglik_bm(data, sg), atol=1e-4)


# ---------------------------------------------------------------------------
# triplewise objective


def tri_model(rho_star=0.8):
    rho = np.array([[1, .5, .3], [.5, 1, .4], [.3, .4, 1]])
    return M.EquiGate([0.8, 0.8, 0.8], [0.5, 0.8, 1.1], rho, rho_star)


def test_triplewise_permutation_invariance():
    model = tri_model()
    data = uniform_sample(10, 3, seed=6)
    a = I.triplewise_loglik_bm(data, model, triples=np.array([[0, 1, 2]]))
    b = I.triplewise_loglik_bm(data, model, triples=np.array([[2, 0, 1]]))
    assert_allclose(a, b, atol=1e-10)


def test_triplewise_matches_numerical_mixed_difference():
    model = tri_model()
    data = uniform_sample(10, 3, seed=7)
    val = I.triplewise_loglik_bm(data, model, triples=np.array([[0, 1, 2]]))

    def fd_density(u, h=2e-4):
        tot = 0.0
        for sx in (1, -1):
            for sy in (1, -1):
                for sz in (1, -1):
                    v = [u[0] + sx * h, u[1] + sy * h, u[2] + sz * h]
                    tot += sx * sy * sz * M.ev_copula_cdf(model, v)
        return tot / (8 * h ** 3)

    oracle = sum(math.log(fd_density(u)) for u in data.data)
    assert_allclose(val, oracle, rtol=1e-3)


def test_triplewise_factorization_limit():
    # third site decoupled from the first two (independent levels and
    # gates, large alpha): the triple term reduces to the pair term since
    # the third uniform margin contributes zero log-density
    rho = np.array([[1.0, 0.5, 1e-9], [0.5, 1.0, 1e-9], [1e-9, 1e-9, 1.0]])
    model = M.EquiGate([1.0, 1.0, 40.0], [0.5, 0.8, 0.8], rho, 1e-12)
    pair = M.margin(model, (0, 1))
    data = uniform_sample(20, 3, seed=8)
    tri = I.triplewise_loglik_bm(data, model, triples=np.array([[0, 1, 2]]))
    pair_ll = I.pairwise_loglik_bm(
        S.SampleMatrix(data.data[:, :2], "uniform"), pair)
    assert abs(tri - pair_ll) <= 1e-3 * max(1.0, abs(pair_ll))


def test_triplewise_prefers_truth_on_exact_limit_data():
    # exact trivariate EV draws by sequential conditional inversion; the
    # composite objective at the data-generating parameters beats a
    # same-pairwise-structure alternative
    from scipy.optimize import brentq

    model = tri_model(rho_star=0.8)
    alt = tri_model(rho_star=0.35)
    pair01 = M.margin(model, (0, 1))
    rng = np.random.default_rng(9)

    def draw():
        u1 = rng.uniform(0.02, 0.98)
        v2, v3 = rng.uniform(size=2)
        x1 = -math.log(u1)

        def f2(u2):
            x = np.array([x1, -math.log(u2)])
            return (math.exp(-M.stdf(pair01, x))
                    * M.stdf_partial(pair01, x, 0) / u1 - v2)

        u2 = brentq(f2, 1e-9, 1 - 1e-9, xtol=1e-10)
        x2 = -math.log(u2)
        c12 = math.exp(I._pair_terms(
            pair01.lam_f[0, 1], pair01.zeta[0], pair01.zeta[1],
            min(pair01.zeta) if False else
            I._pair_params(pair01, np.array([0]), np.array([1]))[3],
            np.array([x1]), np.array([x2]))[0])

        def f3(u3):
            x = np.array([x1, x2, -math.log(u3)])
            l = M.stdf(model, x)
            h = 1e-6

            def lp(i):
                xp, xm = x.copy(), x.copy()
                xp[i] += h * x[i]
                xm[i] -= h * x[i]
                return (M.stdf(model, xp) - M.stdf(model, xm)) / (2 * h * x[i])

            hh = 1e-4
            xa, xb, xc, xd = x.copy(), x.copy(), x.copy(), x.copy()
            xa[:2] += hh
            xb[0] += hh
            xb[1] -= hh
            xc[0] -= hh
            xc[1] += hh
            xd[:2] -= hh
            l12 = (M.stdf(model, xa) - M.stdf(model, xb)
                   - M.stdf(model, xc) + M.stdf(model, xd)) / (4 * hh * hh)
            num = math.exp(-l) * (lp(0) * lp(1) - l12) / (u1 * u2)
            return num / c12 - v3

        u3 = brentq(f3, 1e-9, 1 - 1e-9, xtol=1e-8)
        return u1, u2, u3

    data = S.SampleMatrix(np.array([draw() for _ in range(60)]), "uniform")
    ll_true = I.triplewise_loglik_bm(data, model)
    ll_alt = I.triplewise_loglik_bm(data, alt)
    assert ll_true > ll_alt


# ---------------------------------------------------------------------------
# mGPD objectives


def test_mgpd_full_single_row_closed_form():
    hr = M.HuslerReiss(1.0)
    row = S.SampleMatrix(np.array([[2.0, 1.0]]), "exceedance")
    ll = I.mgpd_loglik_full(row, hr)
    assert_allclose(ll, math.log(M.mgpd_pdf(hr, [2.0, 1.0], pivot=0)),
                    atol=1e-12)
    assert_allclose(ll, math.log(M.mgpd_pdf(hr, [2.0, 1.0], pivot=1)),
                    atol=1e-12)


def test_mgpd_full_concat_additivity():
    hr = M.HuslerReiss(1.0)
    rng = np.random.default_rng(10)
    rows = rng.uniform(0.2, 3.0, (30, 2))
    rows[rows.max(axis=1) <= 1.0, 0] += 1.0
    sm = S.SampleMatrix(rows, "exceedance")
    sm2 = S.SampleMatrix(np.vstack([rows, rows]), "exceedance")
    assert_allclose(I.mgpd_loglik_full(sm2, hr),
                    2 * I.mgpd_loglik_full(sm, hr), atol=1e-10)


def test_mgpd_full_esn_reduces_to_hr():
    esn = M.EsnHuslerReiss(np.array([1.2, 1.2]), -30.0,
                           np.array([[1.0, 0.3], [0.3, 1.0]]),
                           np.array([0.5, 0.4]))
    hr = M.HuslerReiss(esn.lam_f / 2.0)
    rng = np.random.default_rng(11)
    rows = rng.uniform(0.2, 3.0, (40, 2))
    rows[rows.max(axis=1) <= 1.0, 0] += 1.0
    sm = S.SampleMatrix(rows, "exceedance")
    assert_allclose(I.mgpd_loglik_full(sm, esn), I.mgpd_loglik_full(sm, hr),
                    atol=1e-4)


def test_mgpd_full_row_on_boundary():
    hr = M.HuslerReiss(1.0)
    sm = S.SampleMatrix(np.array([[2.0, 1e-14]]), "exceedance")
    with pytest.raises(RowOnBoundary):
        I.mgpd_loglik_full(sm, hr)


def test_eps_partition_counts():
    rows = np.array([[0.01, 2], [2, 0.01], [1.5, 1.5], [0.2, 3], [3, 0.2]])
    model = M.EquiGate([1.0, 1.0], [0.8, 1.2], RHO2, 0.5)
    _, part = I.mgpd_loglik_eps(S.SampleMatrix(rows, "exceedance"), model,
                                0.05)
    assert (part.m1, part.m2, part.m12) == (1, 1, 3)
    assert part.m == 5


def test_eps_zero_face_error_and_interior_mode():
    rows = np.array([[0.01, 2.0], [1.5, 1.5]])
    model = M.SharedGate([1.0, 1.0], [0.8, 1.2], RHO2)  # zeta1 > zeta2
    sm = S.SampleMatrix(rows, "exceedance")
    with pytest.raises(ZeroMassFace):
        I.mgpd_loglik_eps(sm, model, 0.05)
    ll, part = I.mgpd_loglik_eps(sm, model, 0.05, zero_face="interior")
    assert part.m1 == 0 and part.m12 == 2
    assert np.isfinite(ll)


def test_eps_zero_degenerates_to_full():
    model = M.EquiGate([1.0, 1.0], [0.8, 1.2], RHO2, 0.5)
    rows = np.array([[1.5, 1.5], [0.2, 3.0], [3.0, 0.4]])
    sm = S.SampleMatrix(rows, "exceedance")
    ll, part = I.mgpd_loglik_eps(sm, model, 0.0)
    direct = sum(math.log(M.mgpd_pdf(model, r)) for r in rows)
    assert_allclose(ll, direct, atol=1e-12)
    assert part.m1 == part.m2 == 0


def test_eps_counts_partition_everything():
    model = M.EquiGate([1.0, 1.0], [0.8, 1.2], RHO2, 0.5)
    rng = np.random.default_rng(13)
    rows = rng.uniform(0.01, 3.0, (200, 2))
    rows[rows.max(axis=1) <= 1.0, 1] += 1.5
    _, part = I.mgpd_loglik_eps(S.SampleMatrix(rows, "exceedance"), model,
                                0.07)
    assert part.m1 + part.m2 + part.m12 == 200


# ---------------------------------------------------------------------------
# optimizer driver and fit


def test_minimize_box_quadratic():
    theta, fval, n_eval, ok = I.minimize_box(
        lambda t: (t["x"] - 3.0) ** 2, ["x"], {"x": 0.0},
        {"x": (None, None)}, f_tol=1e-12, x_tol=1e-9)
    assert ok and abs(theta["x"] - 3.0) <= 1e-6


def test_minimize_box_respects_bounds():
    theta, *_ = I.minimize_box(
        lambda t: (t["x"] + 5.0) ** 2, ["x"], {"x": 1.0}, {"x": (0.5, 4.0)},
        f_tol=1e-12, x_tol=1e-10)
    assert 0.5 <= theta["x"] <= 4.0
    assert abs(theta["x"] - 0.5) <= 1e-6


def test_fit_recovers_reduced_gate_parameters():
    # moderate-size threshold sample from the bivariate gated model
    rho = 1 - 0.805 ** 2 / 2
    spec = S.FactorSpec([1.0, 1.0], [0.0, 0.608], K.FactorLaw.exponential(),
                        np.array([[1.0, rho], [rho, 1.0]]), gates="common")
    raw = S.sample_factor(spec, 150_000, seed=101)
    y = S.pot_extract(S.to_unit_pareto(S.uniform_from_known_margins(raw, spec)),
                      0.999, thresholds="exact")
    cfg = I.FitConfig(objective="mgpd-eps", epsilon=0.05,
                      init={"lambda": 1.0, "zeta_star": 1.5},
                      zero_face="interior", restarts=2, seed=0)
    rep = I.fit(y, "shared-gate", cfg)
    assert rep.converged
    assert abs(rep.theta["lambda"] - 0.805) <= 0.25
    assert abs(rep.theta["zeta_star"] - 1.8411) <= 0.5
    assert rep.counts["m"] == rep.counts["m1"] + rep.counts["m2"] \
        + rep.counts["m12"]


def test_fit_profile_matches_grid_search():
    rho = 1 - 0.805 ** 2 / 2
    spec = S.FactorSpec([1.0, 1.0], [0.0, 0.608], K.FactorLaw.exponential(),
                        np.array([[1.0, rho], [rho, 1.0]]), gates="common")
    raw = S.sample_factor(spec, 60_000, seed=7)
    y = S.pot_extract(S.to_unit_pareto(S.uniform_from_known_margins(raw, spec)),
                      0.999, thresholds="exact")
    cfg = I.FitConfig(objective="mgpd-eps", epsilon=0.05,
                      init={"lambda": 1.0}, fixed={"zeta_star": 1.8411},
                      zero_face="interior", restarts=1, x_tol=1e-7,
                      f_tol=1e-10, seed=0)
    rep = I.fit(y, "shared-gate", cfg)
    grid = np.linspace(0.4, 1.6, 601)
    vals = []
    for lam in grid:
        model = I.model_from_theta("shared-gate",
                                   {"lambda": lam, "zeta_star": 1.8411}, d=2)
        vals.append(I.mgpd_loglik_eps(y, model, 0.05,
                                      zero_face="interior")[0])
    best = grid[int(np.argmax(vals))]
    assert abs(rep.theta["lambda"] - best) <= max(1e-6, grid[1] - grid[0])


def test_fit_reports_fixed_parameters():
    data = uniform_sample(30, 2, seed=14)
    cfg = I.FitConfig(objective="pairwise-bm", init={"p2": 1.0},
                      fixed={"p1": 1.5, "alpha0": 0.5}, restarts=1,
                      max_iter=50)
    coords = np.array([[0.0, 0.0], [0.6, 0.4]])
    rep = I.fit(data, "hr", cfg, coords=coords)
    assert rep.fixed == {"p1": 1.5, "alpha0": 0.5}
    assert set(rep.theta) == {"p2"}


# ---------------------------------------------------------------------------
# two-step workflow


def test_two_step_known_margins_identity():
    model = M.SharedGate([1.0, 1.0], [0.8, 1.2], RHO2)
    spec = S.spec_for_model(model)
    bm = S.block_maxima(spec, 150, 2000, seed=15)
    margins = [I.fit_gev_mle(bm.data[:, j]) for j in (0, 1)]
    cfg = I.FitConfig(objective="pairwise-bm",
                      init={"p1": 1.0, "p2": 1.0, "alpha0": 1.0},
                      restarts=1, max_iter=120, seed=3)
    coords = np.array([[0.0, 0.0], [0.5, 0.5]])
    rep1, _ = I.two_step_fit(bm, "hr", cfg, coords=coords, margins=margins)
    u = np.column_stack([
        np.clip(K.gev_cdf(bm.data[:, j], margins[j]), 1e-12, 1 - 1e-12)
        for j in (0, 1)])
    rep2 = I.fit(S.SampleMatrix(u, "uniform"), "hr", cfg, coords=coords)
    assert_allclose(rep1.loglik, rep2.loglik, atol=1e-8)


def test_gev_mle_consistency():
    rng = np.random.default_rng(16)
    x = rng.gumbel(0.0, 1.0, 10_000)
    p = I.fit_gev_mle(x)
    assert abs(p.mu) <= 0.05
    assert abs(p.sigma - 1.0) <= 0.05
    assert abs(p.xi) <= 0.05


def test_gev_mle_constant_column():
    with pytest.raises(MarginFitFailure):
        I.fit_gev_mle(np.ones(100))


# ---------------------------------------------------------------------------
# bootstrap and test statistics


def test_bootstrap_same_seed_zero_sd():
    rho = 1 - 0.805 ** 2 / 2
    spec = S.FactorSpec([1.0, 1.0], [0.0, 0.608], K.FactorLaw.exponential(),
                        np.array([[1.0, rho], [rho, 1.0]]), gates="common")
    raw = S.sample_factor(spec, 60_000, seed=17)
    y = S.pot_extract(S.to_unit_pareto(S.uniform_from_known_margins(raw, spec)),
                      0.999, thresholds="exact")
    cfg = I.FitConfig(objective="mgpd-eps", epsilon=0.05,
                      init={"lambda": 1.0, "zeta_star": 1.5},
                      zero_face="interior", restarts=1, seed=0)
    rep = I.fit(y, "shared-gate", cfg)
    sds, failed = I.parametric_bootstrap(
        rep, "shared-gate", {"B": 2, "n": 30_000, "quantile": 0.995,
                             "same_seed": True}, seed=5, config=cfg)
    assert failed == 0
    assert all(v == 0.0 for v in sds.values())


def test_bootstrap_requires_convergence():
    bad = I.FitReport(theta={"lambda": 1.0}, fixed={}, loglik=-1.0,
                      converged=False, n_eval=1, objective="mgpd-eps",
                      family="shared-gate")
    with pytest.raises(NonConvergence):
        I.parametric_bootstrap(bad, "shared-gate", {"B": 2, "n": 100,
                                                    "quantile": 0.99})


def test_lr_test_values():
    assert I.lr_test(-10.0, -10.0, 4) == 1.0
    # chi-square upper tail: sf(9.4877, 4) = 0.050000599541234675
    assert_allclose(I.lr_test(0.0, -9.4877 / 2.0, 4), 0.050000599541234675,
                    rtol=1e-8)
    with pytest.raises(NegativeDeviance):
        I.lr_test(-5.0, -4.0, 2)


def test_information_criteria_values():
    aic, bic = I.information_criteria(-851.0, 10, 149)
    assert_allclose(aic, 1722.0, rtol=0)
    assert_allclose(bic, 10 * math.log(149) + 1702.0, rtol=1e-12)


def test_bootstrap_hr_sd_range():
    # threshold workflow: simulate HR-limit data, fit the single dependence
    # parameter, then B=50 simulate-refit cycles
    hr = M.HuslerReiss(1.0)
    spec = S.spec_for_model(hr)
    raw = S.sample_factor(spec, 100_000, seed=19)
    y = S.pot_extract(S.to_unit_pareto(S.to_uniform(raw)), 0.999)
    cfg = I.FitConfig(objective="mgpd-full", init={"lambda": 1.0},
                      restarts=1, seed=0)
    rep = I.fit(y, "hr", cfg)
    assert rep.converged
    sds, failed = I.parametric_bootstrap(
        rep, "hr", {"B": 50, "n": 100_000, "quantile": 0.999}, seed=3,
        config=cfg)
    assert failed <= 5
    assert 0.0 < sds["lambda"] < 0.2


def test_bootstrap_sd_shrinks_with_n():
    hr = M.HuslerReiss(1.0)
    spec = S.spec_for_model(hr)
    raw = S.sample_factor(spec, 60_000, seed=23)
    y = S.pot_extract(S.to_unit_pareto(S.to_uniform(raw)), 0.995)
    cfg = I.FitConfig(objective="mgpd-full", init={"lambda": 1.0},
                      restarts=1, seed=0)
    rep = I.fit(y, "hr", cfg)
    sd_small, _ = I.parametric_bootstrap(
        rep, "hr", {"B": 60, "n": 30_000, "quantile": 0.995}, seed=5,
        config=cfg)
    sd_big, _ = I.parametric_bootstrap(
        rep, "hr", {"B": 60, "n": 60_000, "quantile": 0.995}, seed=6,
        config=cfg)
    ratio = sd_big["lambda"] / sd_small["lambda"]
    assert 0.6 <= ratio <= 0.8
