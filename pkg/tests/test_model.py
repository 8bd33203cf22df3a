import math

import numpy as np
import pytest

from storagesml.model import (PriceSeries, ShockDistribution, StructuralParams, demand,
                              inverse_demand, period_rate, preset_params)
from storagesml.simulate import autocorr, price_stats, simulate_dgp, simulate_shocks


def test_inverse_demand_examples():
    p = preset_params("monthly")
    assert inverse_demand(p.a, p) == 0.0
    assert inverse_demand(1.5, p) == 0.0
    assert inverse_demand(1.1, p) == pytest.approx(1.0, abs=1e-15)
    for q in (-3.0, 0.25, 7.0):
        assert demand(inverse_demand(demand(q, p), p), p) == pytest.approx(demand(q, p), abs=1e-14)


def test_period_rate():
    assert period_rate(0.05, 1) == pytest.approx(0.05, abs=1e-15)
    assert period_rate(0.05, 12) == pytest.approx(1.05 ** (1 / 12) - 1, rel=1e-14)
    assert period_rate(0.05, 12) == pytest.approx(0.004074, abs=1e-6)
    assert period_rate(0.0, 52) == 0.0
    with pytest.raises(ValueError):
        period_rate(-1.0, 12)
    with pytest.raises(ValueError):
        period_rate(0.05, 0)


def test_beta_recomputed():
    p = StructuralParams(0.5, 1.0, -0.5, 0.1, 0.01)
    assert p.beta == (1 - 0.1) / (1 + 0.01)
    q = p.replace(delta=0.3)
    assert q.beta == pytest.approx(0.7 / 1.01)
    assert 0.0 < q.beta < 1.0


@pytest.mark.parametrize("kw", [dict(rho=1.0), dict(rho=-1.2), dict(b=0.0), dict(b=0.3),
                                dict(delta=-0.1), dict(delta=1.5), dict(r=0.0),
                                dict(a=float("nan"))])
def test_params_invalid(kw):
    base = dict(rho=0.5, a=1.0, b=-0.5, delta=0.1, r=0.01)
    base.update(kw)
    with pytest.raises(ValueError):
        StructuralParams(**base)


def test_price_series_normalization():
    s = PriceSeries([2.0, 4.0]).normalized()
    assert np.allclose(s.values, [2 / 3, 4 / 3])
    assert s.normalization_factor == 3.0
    assert np.allclose(s.raw(), [2.0, 4.0])
    x = PriceSeries(np.random.default_rng(0).uniform(1, 9, 500)).normalized()
    assert abs(x.values.mean() - 1.0) < 1e-12
    with pytest.raises(ValueError):
        PriceSeries([1.0])
    with pytest.raises(ValueError):
        PriceSeries([1.0, np.inf])


def test_shock_distribution():
    g = np.random.default_rng(1)
    t = ShockDistribution.parse("t4")
    assert t.kind == "student-t" and t.dof == 4
    d = t.draw(g, 400_000)
    # unit variance after scaling; the sample variance of t4 converges slowly
    assert abs(d.var() - 1.0) < 0.1
    assert ShockDistribution.parse("gaussian").kind == "gaussian"
    with pytest.raises(ValueError):
        ShockDistribution("student-t", 2.0)
    with pytest.raises(ValueError):
        ShockDistribution.parse("cauchy")


def test_shock_path_variance():
    g = np.random.default_rng(3)
    z = simulate_shocks(0.0, 100_000, g)
    assert abs(z.var() - 1.0) < 3 * math.sqrt(2.0 / 100_000) * 1.0 + 1e-12
    rho = 0.9
    z = simulate_shocks(rho, 200_000, np.random.default_rng(4))
    v = 1 / (1 - rho ** 2)
    # effective sample size of the squared AR(1) is n (1 - rho^2) / (1 + rho^2)
    n_eff = 200_000 * (1 - rho ** 2) / (1 + rho ** 2)
    assert abs(z.var() - v) < 3 * v * math.sqrt(2.0 / n_eff)


def test_simulate_dgp_deterministic(monthly, monthly_table):
    a, za = simulate_dgp(monthly, monthly_table, 300, seed=5)
    b, zb = simulate_dgp(monthly, monthly_table, 300, seed=5)
    c, _ = simulate_dgp(monthly, monthly_table, 300, seed=6)
    assert np.array_equal(a.values, b.values) and np.array_equal(za, zb)
    assert not np.array_equal(a.values, c.values)
    with pytest.raises(ValueError):
        simulate_dgp(monthly, monthly_table, 1)


def test_simulate_dgp_student_t(monthly, monthly_table):
    s, _ = simulate_dgp(monthly, monthly_table, 2000, seed=2, shocks=ShockDistribution.parse("t4"))
    assert np.all(np.isfinite(s.values))


def test_price_stats_constant_series():
    st = price_stats(np.full(20, 2.0))
    assert st.sd == 0.0
    assert math.isnan(st.ac1) and math.isnan(st.ac2) and math.isnan(st.skewness)
    assert math.isnan(st.stockout_freq)


def test_price_stats_gaussian():
    x = np.random.default_rng(8).standard_normal(1_000_000)
    st = price_stats(x)
    se_sk, se_ku = math.sqrt(6 / x.size), math.sqrt(24 / x.size)
    assert abs(st.skewness) < 4 * se_sk
    assert abs(st.excess_kurtosis) < 4 * se_ku
    assert st.kurtosis == pytest.approx(st.excess_kurtosis + 3.0)


def test_price_stats_ar1_ac1():
    rho, n = 0.6, 100_000
    z = simulate_shocks(rho, n, np.random.default_rng(9))
    st = price_stats(z)
    assert abs(st.ac1 - rho) < 3 * math.sqrt((1 - rho ** 2) / n)


def test_autocorr_short():
    assert math.isnan(autocorr([1.0, 2.0], 2))
