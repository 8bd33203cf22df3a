"""Price-path simulation and summary statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np
from scipy import stats
from scipy.signal import lfilter

from . import kernels
from . import rng as rngmod
from .model import PriceSeries, ShockDistribution, StructuralParams
from .moments import gauss_hermite_nodes
from .solver import PriceFunctionTable, kink_tolerance, threshold_price

BURN_IN = 1000


def simulate_shocks(rho: float, T: int, rng: np.random.Generator) -> np.ndarray:
    """AR(1) path ``z[t] = rho z[t-1] + eps[t]`` started from its stationary law."""
    eps = rng.standard_normal(T)
    eps[0] /= math.sqrt(1.0 - rho * rho)
    return lfilter([1.0], [1.0, -rho], eps)


def simulate_structural_path(params: StructuralParams, pf: PriceFunctionTable, T: int,
                             seed: int = 0, burn_in: int = BURN_IN):
    """Stock/price recursion of the model itself.

    Returns ``(p, z, x, storage)`` for ``T`` periods after ``burn_in``
    discarded periods started from zero storage.
    """
    g = rngmod.stream(seed, rngmod.SIMULATION)
    z = simulate_shocks(params.rho, burn_in + T, g)
    out = kernels.simulate_structural(*pf.kargs, params.a, params.b, params.delta, 0.0, z)
    s = slice(burn_in, None)
    return out[0, s].copy(), z[s].copy(), out[1, s].copy(), out[2, s].copy()


def simulate_dgp(params: StructuralParams, pf: PriceFunctionTable, T: int, seed: int = 0,
                 shocks: ShockDistribution = ShockDistribution(), quad_order: int = 16,
                 periods_per_year: int = 12, burn_in: int = BURN_IN):
    """Simulate the Gaussian transition model for prices.

    The latent shock follows its AR(1) law exactly and prices follow
    ``p[t+1] = mu(p[t], z[t]) + sigma(p[t], z[t]) * eta[t+1]``.  The chain
    is started from zero storage and run ``burn_in`` periods before the
    first returned price.

    Parameters
    ----------
    params : StructuralParams
    pf : PriceFunctionTable
        Table solved at ``params``.
    T : int
        Number of prices, at least 2.
    seed : int
        Root seed; the draws come from the simulation stream.
    shocks : ShockDistribution
        Law of ``eta``.

    Returns
    -------
    series : PriceSeries
    z : ndarray
        Latent shocks aligned with the prices.

    Raises
    ------
    FloatingPointError
        If the simulated path turns non-finite.
    """
    if T < 2:
        raise ValueError("T must be at least 2")
    g = rngmod.stream(seed, rngmod.SIMULATION)
    p, z = simulate_joint(params, pf, T, g, shocks, quad_order, burn_in)
    return PriceSeries(p, periods_per_year), z


def simulate_joint(params: StructuralParams, pf: PriceFunctionTable, T: int,
                   g: np.random.Generator, shocks: ShockDistribution = ShockDistribution(),
                   quad_order: int = 16, burn_in: int = BURN_IN):
    """Price and shock arrays of the transition model drawn from generator ``g``.

    The chain starts at ``f(z, z)``, the price with no carried-in stock, and
    its first ``burn_in`` periods are discarded.
    """
    n = burn_in + T
    z = simulate_shocks(params.rho, n, g)
    eta = np.ascontiguousarray(shocks.draw(g, n))
    gn, gw = gauss_hermite_nodes(quad_order)
    p0 = float(kernels.bilinear(*pf.kargs, z[:1], z[:1])[0])
    p = kernels.simulate_prices(*pf.kargs, params.a, params.b, params.delta, params.rho,
                                p0, z, eta, gn, gw)[burn_in:]
    z = np.ascontiguousarray(z[burn_in:])
    if not np.all(np.isfinite(p)):
        raise FloatingPointError("simulated prices are not finite; degenerate price function")
    return p, z


@dataclass
class StatsRecord:
    """Summary statistics of a price path; ``nan`` marks an undefined value."""

    n: int
    mean: float
    sd: float
    skewness: float
    kurtosis: float
    excess_kurtosis: float
    ac1: float
    ac2: float
    ac1_abs_change: float
    stockout_freq: float = float("nan")

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


def autocorr(x, lag: int) -> float:
    """Sample autocorrelation with the full-sample mean and variance; nan if undefined."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] <= lag:
        return float("nan")
    d = x - x.mean()
    den = d @ d
    if not den > 0.0:
        return float("nan")
    return float(d[lag:] @ d[:-lag] / den)


def price_stats(series, pf: PriceFunctionTable | None = None, z=None) -> StatsRecord:
    """Mean, SD, skewness, raw and excess kurtosis, AC1, AC2 and AC1 of ``|dp|``.

    With a table and the latent shocks, the stock-out frequency
    ``mean(p[t] >= p*(z[t]))`` is added.
    """
    p = np.asarray(series.values if isinstance(series, PriceSeries) else series, dtype=float)
    if p.shape[0] < 3:
        raise ValueError("need at least three prices")
    sd = float(np.std(p))
    nan = float("nan")
    if sd > 0.0:
        sk = float(stats.skew(p))
        ku = float(stats.kurtosis(p, fisher=False))
    else:
        sk = ku = nan
    rec = StatsRecord(p.shape[0], float(np.mean(p)), sd, sk, ku, ku - 3.0,
                      autocorr(p, 1), autocorr(p, 2), autocorr(np.abs(np.diff(p)), 1))
    if pf is not None and z is not None:
        pstar = threshold_price(pf, np.asarray(z, dtype=float))
        rec.stockout_freq = float(np.mean(p >= pstar - kink_tolerance(pstar)))
    return rec
