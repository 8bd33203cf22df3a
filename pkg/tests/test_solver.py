import math

import numpy as np
import pytest
from scipy.stats import norm

from storagesml.model import StructuralParams, preset_params
from storagesml.solver import (GridConfig, PriceFunctionTable, build_grid, build_weight_matrix,
                               dump_table, eval_price_function, load_table,
                               solve_price_function, threshold_price, threshold_stock)


def _table_from(fn, params, config=GridConfig(mz=9, mx1=12, mx2=6)):
    grid = build_grid(params, config)
    X, Z = np.meshgrid(grid.x_nodes, grid.z_nodes, indexing="ij")
    return PriceFunctionTable(np.ascontiguousarray(fn(X, Z)), grid, params, 0, 0.0)


def test_grid_rho_zero():
    g = build_grid(StructuralParams(0.0, 1.5, -0.4, 0.02, 0.004))
    assert g.z_nodes[0] == -6.0 and g.z_nodes[-1] == 6.0


def test_grid_defaults_and_layout(monthly):
    g = build_grid(monthly)
    zmax = 6 / math.sqrt(1 - 0.97 ** 2)
    assert g.z_nodes[0] == pytest.approx(-zmax, rel=1e-14)
    assert g.z_nodes[0] == pytest.approx(-24.68, abs=5e-3)
    assert g.mz == 64 and g.mx1 == 128 and g.mx2 == 128
    x = g.x_nodes
    assert np.all(np.diff(x) > 0)
    assert x[0] == pytest.approx(min((20 - 1.5) / -0.4, -zmax))
    assert x[127] == pytest.approx(max(1.5 / 0.4, zmax))
    assert x[-1] == pytest.approx(1.5 * zmax / 0.02)
    step = (x[-1] - x[127]) / 128
    assert x[128] == pytest.approx(x[127] + step)
    assert np.allclose(np.diff(g.z_nodes), g.z_nodes[1] - g.z_nodes[0])


def test_grid_continuous_in_params(monthly):
    g0 = build_grid(monthly).x_nodes
    g1 = build_grid(monthly.replace(delta=0.02 + 1e-9)).x_nodes
    assert np.max(np.abs(g1 - g0)) < 1e-4


def test_grid_rejects_zero_delta():
    with pytest.raises(ValueError):
        build_grid(StructuralParams(0.5, 1.5, -0.4, 0.0, 0.004))


def test_weight_matrix():
    W = build_weight_matrix(np.linspace(-6, 6, 64), 0.0)
    assert np.allclose(W, W[0])
    W = build_weight_matrix(np.linspace(-24, 24, 64), 0.97)
    assert np.allclose(W.sum(axis=1), 1.0, atol=1e-12, rtol=0)
    assert np.all(W >= 0)
    W = build_weight_matrix(np.array([-1.0, 0.0, 1.0]), 0.5)
    d = norm.pdf([-1.0, 0.0, 1.0], loc=0.5)
    assert np.allclose(W[2], d / d.sum(), rtol=1e-14)


def test_weight_matrix_underflow():
    with pytest.raises(ValueError):
        build_weight_matrix(np.array([-100.0, 100.0]), 0.0)


def test_delta_one_gives_static_price():
    p = StructuralParams(0.5, 1.5, -0.4, 1.0, 0.004)
    pf = solve_price_function(p, iterations=1)
    P = p.a + p.b * pf.grid.x_nodes
    assert np.array_equal(pf.values, np.repeat(np.maximum(P, 0)[:, None], pf.grid.mz, axis=1))


def test_table_invariants(monthly_table, monthly):
    f = monthly_table.values
    P = monthly.a + monthly.b * monthly_table.grid.x_nodes
    assert np.all(f >= np.maximum(P, 0)[:, None] - 1e-12)
    assert np.all(np.diff(f, axis=0) <= 1e-10)
    assert monthly_table.iterations == 400
    assert not f.flags.writeable


def test_final_sup_change(monthly_table):
    # the monthly design converges well inside the reported order of magnitude
    assert 0.0 < monthly_table.final_sup_change <= 1e-3


def test_final_sup_change_weekly():
    pf = solve_price_function(preset_params("weekly"))
    assert 1e-4 < pf.final_sup_change < 1e-2


def test_solver_deterministic(monthly, monthly_table):
    again = solve_price_function(monthly)
    assert np.array_equal(again.values, monthly_table.values)


@pytest.fixture(scope="module")
def dense_monthly(monthly):
    return solve_price_function(monthly, GridConfig().scaled(2), iterations=800)


def _rel_to_dense(table, dense):
    g = table.grid
    X, Z = np.meshgrid(g.x_nodes[:g.mx1], g.z_nodes, indexing="ij")
    ref = dense(X, Z)
    return np.abs(table.values[:g.mx1] - ref) / np.maximum(np.abs(ref), 1e-3)


# The default grid's own discretization error against a doubled grid peaks
# near 15% (coarse x step near the kink, extreme z); see the decision ledger.
@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="default grid discretization exceeds 1e-2 vs doubled grid")
def test_dense_grid_oracle(monthly_table, dense_monthly):
    assert _rel_to_dense(monthly_table, dense_monthly).max() < 1e-2


@pytest.mark.slow
def test_refinement_reduces_error(monthly, monthly_table, dense_monthly):
    base = _rel_to_dense(monthly_table, dense_monthly)
    finer = solve_price_function(monthly, GridConfig(mz=64, mx1=128, mx2=256), iterations=400)
    ref_rel = _rel_to_dense(finer, dense_monthly)
    assert np.quantile(ref_rel, 0.99) < np.quantile(base, 0.99)
    assert np.quantile(base, 0.5) < 1e-2


def test_eval_nodes_and_affine(monthly):
    pf = _table_from(lambda x, z: 2 * x + 3 * z, monthly)
    g = pf.grid
    i, j = 5, 4
    assert pf(g.x_nodes[i], g.z_nodes[j]) == pf.values[i, j]
    rng = np.random.default_rng(0)
    x = rng.uniform(g.x_nodes[0], g.x_nodes[-1], 200)
    z = rng.uniform(g.z_nodes[0], g.z_nodes[-1], 200)
    assert np.allclose(pf(x, z), 2 * x + 3 * z, rtol=1e-12, atol=1e-9)


def test_eval_midpoint_and_clamp(monthly_table):
    g = monthly_table.grid
    f = monthly_table.values
    xm = 0.5 * (g.x_nodes[10] + g.x_nodes[11])
    zm = 0.5 * (g.z_nodes[20] + g.z_nodes[21])
    corners = f[10:12, 20:22].mean()
    assert monthly_table(xm, zm) == pytest.approx(corners, rel=1e-13)
    assert monthly_table(g.x_nodes[0] - 50, g.z_nodes[-1] + 50) == f[0, -1]
    assert monthly_table(1e9, -1e9) == f[-1, 0]
    out = eval_price_function(monthly_table, np.zeros((2, 3)), np.zeros(3))
    assert out.shape == (2, 3)


def test_threshold_delta_one():
    p = StructuralParams(0.0, 1.5, -0.25, 1.0, 0.004)  # -a/b = 6 = Z_M, a grid node
    pf = solve_price_function(p, iterations=1)
    xs = threshold_stock(pf, np.array([-3.0, 0.0, 2.0]))
    assert np.allclose(xs, 6.0, atol=1e-6)
    assert np.allclose(threshold_price(pf, 0.0), 0.0, atol=1e-6)


def test_threshold_monotone(monthly_table):
    z = np.linspace(monthly_table.grid.z_nodes[0], monthly_table.grid.z_nodes[-1], 400)
    xs = threshold_stock(monthly_table, z)
    finite = np.isfinite(xs)
    assert finite.any()
    assert np.all(np.diff(xs[finite]) >= -1e-9)


def test_threshold_sentinel(monthly):
    pf = _table_from(lambda x, z: 100.0 + 0 * x, monthly)
    assert threshold_stock(pf, 0.0) == -np.inf
    assert threshold_price(pf, 0.0) == np.inf


def test_dump_roundtrip(tmp_path, monthly_table):
    path = tmp_path / "pf.txt"
    dump_table(monthly_table, path)
    back = load_table(path)
    assert np.array_equal(back.values, monthly_table.values)
    assert np.array_equal(back.grid.x_nodes, monthly_table.grid.x_nodes)
    assert back.params == monthly_table.params
    assert back.final_sup_change == monthly_table.final_sup_change
    assert back(3.3, -1.2) == monthly_table(3.3, -1.2)
