import numpy as np
import pytest
from numpy.testing import assert_allclose

from tailfactor import diagnostics as D
from tailfactor import models as M
from tailfactor import simulate as S
from tailfactor.errors import DegenerateData, EmptyPairSet, GridError

RHO2 = np.array([[1.0, 0.6], [0.6, 1.0]])


def test_comonotone_limit():
    rng = np.random.default_rng(3)
    u = rng.uniform(1e-4, 1 - 1e-4, 10_000)
    curve = D.pickands_cfg(u, u)
    mid = curve.values[np.isclose(curve.grid, 0.5)][0]
    assert abs(mid - 0.5) <= 0.01


def test_independence_limit():
    rng = np.random.default_rng(4)
    curve = D.pickands_cfg(rng.uniform(size=10_000), rng.uniform(size=10_000))
    mid = curve.values[np.isclose(curve.grid, 0.5)][0]
    assert abs(mid - 1.0) <= 0.03


def test_endpoints_are_one():
    rng = np.random.default_rng(5)
    curve = D.pickands_cfg(rng.uniform(size=500), rng.uniform(size=500))
    assert curve.values[0] == 1.0
    assert curve.values[-1] == 1.0


def test_pickands_bounds_after_clamping():
    rng = np.random.default_rng(6)
    curve = D.pickands_cfg(rng.uniform(size=200), rng.uniform(size=200))
    lower = np.maximum(curve.grid, 1 - curve.grid)
    assert np.all(curve.values >= lower - 1e-15)
    assert np.all(curve.values <= 1.0 + 1e-15)


def test_cfg_close_to_model_curve():
    model = M.HuslerReiss(1.0)
    bm = S.block_maxima(S.spec_for_model(model), 2000, 2000, seed=4)
    emp = D.pickands_cfg(S.to_uniform(bm).data)
    mod = D.model_pickands(model)
    assert np.max(np.abs(emp.values - mod.values)) <= 0.05


def test_cfg_orientation_matches_model_convention():
    # an asymmetric model: the matching orientation must beat the flip
    model = M.SharedGate([1.0, 1.0], [0.8, 1.2], RHO2)
    flipped = M.SharedGate([1.0, 1.0], [1.2, 0.8], RHO2)
    bm = S.block_maxima(S.spec_for_model(model), 2000, 2000, seed=9)
    emp = D.pickands_cfg(S.to_uniform(bm).data)
    d_ok = np.max(np.abs(emp.values - D.model_pickands(model).values))
    d_flip = np.max(np.abs(emp.values - D.model_pickands(flipped).values))
    assert d_ok < d_flip


def test_cfg_validation():
    rng = np.random.default_rng(7)
    with pytest.raises(DegenerateData):
        D.pickands_cfg(np.full(100, 0.5), rng.uniform(size=100))
    with pytest.raises(DegenerateData):
        D.pickands_cfg(rng.uniform(size=10), rng.uniform(size=10))


# ---------------------------------------------------------------------------
# RMSE curves and aggregation


def test_rmse_zero_for_matching_curves():
    # nonparametric curve compared against itself through a stub model
    grid = D.default_grid()
    vals = np.zeros_like(grid)
    integral, mid = D.rmse_aggregate(grid, vals)
    assert integral == 0.0 and mid == 0.0


def test_rmse_single_pair_absolute_error():
    rng = np.random.default_rng(8)
    model = M.HuslerReiss(1.0)
    u = S.to_uniform(S.block_maxima(S.spec_for_model(model), 300, 1000,
                                    seed=3))
    grid = D.default_grid()
    r = D.rmse_curve(model, u, [(0, 1)], grid=grid)
    emp = D.pickands_cfg(u.data, grid=grid)
    mod = D.model_pickands(model, grid=grid)
    assert_allclose(r, np.abs(emp.values - mod.values), atol=1e-12)


def test_rmse_constant_offset():
    grid = D.default_grid()
    # four pairs, each differing by exactly 0.01: RMSE is 0.01 pointwise
    diffs = np.full((4, len(grid)), 0.01)
    rmse = np.sqrt(np.mean(diffs ** 2, axis=0))
    assert_allclose(rmse, 0.01, rtol=1e-12)


def test_rmse_aggregate_constant():
    grid = D.default_grid()
    integral, mid = D.rmse_aggregate(grid, np.full_like(grid, 0.02))
    assert_allclose(integral, 0.02, rtol=1e-12)
    assert_allclose(mid, 0.02, rtol=1e-15)


def test_rmse_aggregate_triangle():
    grid = D.default_grid()
    tri = 0.02 * (1 - np.abs(2 * grid - 1))
    integral, mid = D.rmse_aggregate(grid, tri)
    assert_allclose(integral, 0.01, rtol=1e-10)
    assert_allclose(mid, 0.02, rtol=1e-15)


def test_rmse_aggregate_grid_errors():
    with pytest.raises(GridError):
        D.rmse_aggregate(np.linspace(0, 1, 11), np.zeros(11))
    with pytest.raises(GridError):
        D.rmse_aggregate(np.linspace(0.2, 0.8, 61), np.zeros(61))
    with pytest.raises(GridError):
        D.rmse_aggregate(np.linspace(0, 1, 52), np.zeros(52))


def test_rmse_empty_pair_set():
    model = M.HuslerReiss(1.0)
    with pytest.raises(EmptyPairSet):
        D.rmse_curve(model, np.random.default_rng(0).uniform(size=(50, 2)),
                     [])


def test_rmse_invariant_to_pair_relabeling():
    rho = np.array([[1, .5, .3], [.5, 1, .4], [.3, .4, 1]])
    model = M.SharedGate([1.0, 1.0, 1.0], [0.5, 0.8, 1.1], rho)
    u = S.to_uniform(S.block_maxima(S.spec_for_model(model), 300, 1000,
                                    seed=5))
    pairs = [(0, 1), (0, 2), (1, 2)]
    a = D.rmse_curve(model, u, pairs)
    b = D.rmse_curve(model, u, list(reversed(pairs)))
    assert_allclose(a, b, atol=1e-14)


# ---------------------------------------------------------------------------
# pair sets


def test_pair_sets_all():
    coords = np.random.default_rng(1).uniform(size=(5, 2))
    assert len(D.pair_sets_by_distance(coords, "all")) == 10


def test_pair_sets_empty_below_zero():
    coords = np.random.default_rng(2).uniform(size=(4, 2))
    assert D.pair_sets_by_distance(coords, "lt", 0.0) == []


def test_pair_sets_collinear():
    coords = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    assert D.pair_sets_by_distance(coords, "gt", 1.5) == [(0, 2)]
