"""Continuous SIR particle filter for the simulated log-likelihood.

The latent supply shock is tracked by ``N`` particles.  At every step the
particles are weighted by the Gaussian transition density of the next price,
and the next cloud is drawn from the mixture
``sum_k w_k N(rho z_k, 1)`` by FFT-based continuous resampling, so no
separate propagation step is simulated.  With the uniforms fixed by a seed
the estimate is a continuous function of the parameters.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import ndtr, ndtri

from . import rng as rngmod
from .model import PriceSeries, StructuralParams
from .moments import moments_arrays
from .resample import sample_mixture
from .solver import (GridConfig, PriceFunctionTable, kink_tolerance, solve_price_function,
                     threshold_price)

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class FilterConfig:
    n_particles: int = 4096
    n_grid: int = 1024
    grid_width: float = 8.0
    quad_order: int = 16
    solver: GridConfig = field(default_factory=GridConfig)
    iterations: int = 400


@dataclass
class FilterOutput:
    """Result of one filter pass.

    ``step_loglik[t]`` is ``log L`` for predicting ``p[t+1]``.  The
    diagnostic arrays are ``None`` unless the filter ran with
    ``diagnostics=True``; ``stockout_prob`` and ``storage`` have one entry per
    observation, ``u`` one per transition.
    """

    loglik: float
    step_loglik: np.ndarray
    ok: bool = True
    message: str = ""
    u: np.ndarray | None = None
    stockout_prob: np.ndarray | None = None
    storage: np.ndarray | None = None
    table: PriceFunctionTable | None = None

    @property
    def residuals(self) -> np.ndarray:
        return generalized_residuals(self)


@lru_cache(maxsize=4)
def _uniforms(seed: int, T: int, n: int):
    g = rngmod.stream(seed, rngmod.FILTER)
    init = g.random(n)
    steps = g.random((max(T - 1, 1), n))
    init.setflags(write=False)
    steps.setflags(write=False)
    return init, steps


def weighted_median(values, weights=None) -> float:
    """Smallest value whose cumulative normalized weight reaches 1/2."""
    values = np.asarray(values, dtype=float)
    order = np.argsort(values, kind="stable")
    if weights is None:
        cw = np.arange(1, values.size + 1) / values.size
    else:
        w = np.asarray(weights, dtype=float)[order]
        cw = np.cumsum(w) / w.sum()
    k = int(np.searchsorted(cw, 0.5 - 1e-15))
    return float(values[order[min(k, values.size - 1)]])


def _failed(T, t, msg, step_ll=None):
    sl = np.full(T - 1, np.nan) if step_ll is None else step_ll
    return FilterOutput(-np.inf, sl, ok=False, message=f"step {t}: {msg}" if t >= 0 else msg)


def pf_loglik(params: StructuralParams, series: PriceSeries, n_particles: int | None = None,
              seed: int = 0, config: FilterConfig = FilterConfig(), diagnostics: bool = False,
              table: PriceFunctionTable | None = None) -> FilterOutput:
    """Simulated log-likelihood of ``p[2:] | p[1]``.

    Degenerate cases (a parameter value for which the grid cannot be built,
    or a step where every particle weight underflows) return
    ``loglik = -inf`` with ``ok = False`` rather than raising, so an optimizer
    can back away.
    """
    p = np.asarray(series.values if isinstance(series, PriceSeries) else series, dtype=float)
    T = p.shape[0]
    N = int(n_particles or config.n_particles)
    if T < 2:
        raise ValueError("need at least two prices")
    try:
        pf = table if table is not None else solve_price_function(
            params, config.solver, config.iterations)
    except (ValueError, FloatingPointError) as exc:
        return _failed(T, -1, f"price function: {exc}")

    u0, U = _uniforms(int(seed), T, N)
    rho = params.rho
    z = ndtri((np.arange(N) + u0) / N) / math.sqrt(1.0 - rho * rho)
    step_ll = np.full(T - 1, np.nan)
    if diagnostics:
        u_res = np.empty(T - 1)
        stockout = np.empty(T)
        storage = np.empty(T)
    pt = np.empty(N)
    for t in range(T - 1):
        pt.fill(p[t])
        mo = moments_arrays(pf, pt, z, config.quad_order)
        mu, s2 = mo[0], mo[1]
        if diagnostics:
            storage[t] = weighted_median(mo[3])
            pstar = threshold_price(pf, z)
            stockout[t] = np.mean(p[t] >= pstar - kink_tolerance(pstar))
        d = p[t + 1] - mu
        with np.errstate(over="ignore"):  # huge d gives -inf weight, handled below
            logw = -0.5 * (LOG_2PI + np.log(s2) + d * d / s2)
        m = logw.max()
        if not np.isfinite(m):
            return _failed(T, t, "all particle weights underflow", step_ll)
        w = np.exp(logw - m)
        sw = w.sum()
        step_ll[t] = m + math.log(sw / N)
        if diagnostics:
            u_res[t] = np.mean(ndtr(d / np.sqrt(s2)))
        if t < T - 2 or diagnostics:
            try:
                z = sample_mixture(rho * z, w / sw, 1.0, U[t], config.n_grid, config.grid_width)
            except (ValueError, FloatingPointError) as exc:
                return _failed(T, t, f"resampling: {exc}", step_ll)
    out = FilterOutput(float(step_ll.sum()), step_ll, table=pf)
    if diagnostics:
        pt.fill(p[T - 1])
        mo = moments_arrays(pf, pt, z, config.quad_order)
        storage[T - 1] = weighted_median(mo[3])
        pstar = threshold_price(pf, z)
        stockout[T - 1] = np.mean(p[T - 1] >= pstar - kink_tolerance(pstar))
        out.u, out.stockout_prob, out.storage = u_res, stockout, storage
    if not np.isfinite(out.loglik):
        out.ok = False
        out.message = "non-finite log-likelihood"
    return out


def generalized_residuals(output: FilterOutput) -> np.ndarray:
    """Gaussian-quantile transform of the generalized residuals, t = 2..T."""
    if output.u is None:
        raise ValueError("filter was run without diagnostics; no residuals available")
    return ndtri(np.clip(output.u, 1e-12, 1.0 - 1e-12))
