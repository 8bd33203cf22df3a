import math

import numpy as np
import pytest

from storagesml.cml import CmlConfig, cml_loglik, kernel_weights
from storagesml.model import PriceSeries, StructuralParams
from storagesml.moments import predictive_moments

SMALL = CmlConfig(n_i=5000, n_t=8)


def test_kernel_weights_by_hand():
    ps = np.array([0.9, 1.0, 1.3])
    zs = np.array([-1.0, 0.5, 2.0])
    zg = np.array([-1.0, 0.0, 1.0])
    hp, hz = 0.2, 0.8
    W = kernel_weights([1.1], ps, zs, zg, hp, hz)
    raw = np.zeros(3)
    for j in range(3):
        for i in range(3):
            raw[j] += math.exp(-0.5 * ((1.1 - ps[i]) / hp) ** 2 - 0.5 * ((zg[j] - zs[i]) / hz) ** 2)
    assert np.allclose(W[0], raw / raw.sum(), rtol=1e-13)
    # the weighted moments follow from the same weights
    mu_j = np.array([1.0, 2.0, 4.0])
    assert W[0] @ mu_j == pytest.approx(raw @ mu_j / raw.sum(), rel=1e-13)


def test_kernel_weights_far_price_no_underflow():
    W = kernel_weights([50.0], np.array([0.9, 1.0]), np.array([0.0, 1.0]),
                       np.linspace(-2, 2, 8), 0.05, 0.5)
    assert np.all(np.isfinite(W)) and W.sum() == pytest.approx(1.0)


def test_deterministic_and_finite(monthly, monthly_series, monthly_table):
    s, _ = monthly_series
    a = cml_loglik(monthly, s, SMALL, seed=1, table=monthly_table)
    b = cml_loglik(monthly, s, SMALL, seed=1, table=monthly_table)
    assert a.ok and math.isfinite(a.loglik) and a.loglik == b.loglik
    assert a.step_loglik.shape == (len(s) - 1,)


def test_mean_is_convex_combination(monthly, monthly_series, monthly_table):
    s, _ = monthly_series
    out = cml_loglik(monthly, s, SMALL, seed=2, table=monthly_table)
    zg = np.linspace(-30, 30, 400)
    for t in (0, 50, 120):
        m = predictive_moments(monthly_table, s.values[t], zg)
        assert m.mu.min() - 1e-9 <= out.mu[t] <= m.mu.max() + 1e-9


def test_iid_shock_matches_conditional_mean():
    prm = StructuralParams(0.0, 1.5, -0.4, 0.05, 0.004)
    from storagesml.solver import solve_price_function
    from storagesml.simulate import simulate_dgp
    pf = solve_price_function(prm)
    s, z = simulate_dgp(prm, pf, 60, seed=3)
    out = cml_loglik(prm, s, SMALL, seed=4, table=pf)
    # with rho = 0 next period's law does not depend on the current shock
    m = predictive_moments(pf, s.values[:-1], z[:-1])
    assert np.allclose(out.mu, m.mu, rtol=2e-2)


def test_degenerate_flag():
    prm = StructuralParams(0.0, 10.0, -0.1, 1.0, 0.004)
    out = cml_loglik(prm, PriceSeries([1.0, 2.0, 1.5]), SMALL)
    assert not out.ok and out.loglik == -np.inf


def test_config_validation():
    with pytest.raises(ValueError):
        CmlConfig(n_g=4)
