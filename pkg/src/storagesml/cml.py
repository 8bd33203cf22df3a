"""Composite quasi-likelihood built from pairs of consecutive prices.

The shock is integrated out of the one-step predictive moments against a
kernel estimate of ``pi(z | p)`` from a long simulated, thinned sample of
the joint (price, shock) process.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .filter import LOG_2PI
from .model import PriceSeries, ShockDistribution, StructuralParams
from .moments import moments_arrays
from .simulate import simulate_joint
from .solver import GridConfig, PriceFunctionTable, solve_price_function


@dataclass(frozen=True)
class CmlConfig:
    """Sample size ``n_i``, thinning interval ``n_t``, z-grid size ``n_g``.

    Bandwidths are ``bw_factor * n_i**(-1/6) * sd`` for price and shock;
    the z grid covers the sample mean +- ``grid_width`` sample SDs.
    """

    n_i: int = 50_000
    n_t: int = 32
    n_g: int = 128
    bw_factor: float = 2.0
    grid_width: float = 4.0
    quad_order: int = 16
    solver: GridConfig = GridConfig()
    iterations: int = 400
    chunk: int = 64

    def __post_init__(self):
        if self.n_i < 2 or self.n_t < 1:
            raise ValueError("need n_i >= 2 and n_t >= 1")
        if self.n_g < 8:
            raise ValueError("n_g must be at least 8")


@dataclass
class CmlOutput:
    loglik: float
    step_loglik: np.ndarray
    mu: np.ndarray
    sigma2: np.ndarray
    ok: bool = True
    message: str = ""


def kernel_weights(p_obs, p_sample, z_sample, z_grid, h_p: float, h_z: float,
                   chunk: int = 64):
    """Normalized kernel weights of ``z_grid`` given each observed price.

    Row ``t`` is proportional to
    ``sum_i exp(-(p_t - p_i)^2 / (2 h_p^2) - (z_j - z_i)^2 / (2 h_z^2))``.
    The sum factorizes into a matrix product; each price row is rescaled by
    its largest factor before exponentiating so that far-out prices do not
    underflow.  Rows with no mass come back as all ``nan``.
    """
    p_obs = np.asarray(p_obs, dtype=float)
    ps = np.asarray(p_sample, dtype=float)
    zs = np.asarray(z_sample, dtype=float)
    zg = np.asarray(z_grid, dtype=float)
    B = np.exp(-0.5 * ((zs[:, None] - zg[None, :]) / h_z) ** 2)
    out = np.empty((p_obs.shape[0], zg.shape[0]))
    for s in range(0, p_obs.shape[0], chunk):
        d = (p_obs[s:s + chunk, None] - ps[None, :]) / h_p
        e = -0.5 * d * d
        e -= e.max(axis=1, keepdims=True)
        w = np.exp(e) @ B
        tot = w.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            out[s:s + chunk] = np.where(tot > 0.0, w / tot, np.nan)
    return out


def cml_loglik(params: StructuralParams, series: PriceSeries, config: CmlConfig = CmlConfig(),
               seed: int = 0, table: PriceFunctionTable | None = None) -> CmlOutput:
    """Composite quasi log-likelihood of ``p[2:]`` given the preceding prices one at a time.

    The simulation uses the composite-likelihood stream of ``seed``, so the
    same draws are reused at every parameter value.  A degenerate grid or
    an observed price with no kernel mass gives ``-inf`` and ``ok=False``.
    """
    p = np.asarray(series.values if isinstance(series, PriceSeries) else series, dtype=float)
    T = p.shape[0]
    if T < 2:
        raise ValueError("need at least two prices")
    nanarr = np.full(T - 1, np.nan)
    try:
        pf = table if table is not None else solve_price_function(
            params, config.solver, config.iterations)
        g = rngmod.stream(seed, rngmod.CML)
        ps, zs = simulate_joint(params, pf, config.n_i * config.n_t, g, ShockDistribution(),
                                config.quad_order)
    except (ValueError, FloatingPointError) as exc:
        return CmlOutput(-np.inf, nanarr, nanarr, nanarr, False, str(exc))
    ps = ps[::config.n_t]
    zs = zs[::config.n_t]
    sp = float(np.std(ps, ddof=1))
    sz = float(np.std(zs, ddof=1))
    mz = float(np.mean(zs))
    if not (sp > 0.0 and sz > 0.0):
        return CmlOutput(-np.inf, nanarr, nanarr, nanarr, False, "degenerate simulated sample")
    bw = config.bw_factor * config.n_i ** (-1.0 / 6.0)
    zg = np.linspace(mz - config.grid_width * sz, mz + config.grid_width * sz, config.n_g)
    W = kernel_weights(p[:-1], ps, zs, zg, bw * sp, bw * sz, config.chunk)
    if np.isnan(W).any():
        bad = int(np.argmax(np.isnan(W).any(axis=1)))
        return CmlOutput(-np.inf, nanarr, nanarr, nanarr, False,
                         f"no kernel mass at observation {bad + 1}")
    mo = moments_arrays(pf, np.repeat(p[:-1], config.n_g), np.tile(zg, T - 1),
                        config.quad_order)
    mu = np.einsum("tj,tj->t", W, mo[0].reshape(T - 1, config.n_g))
    s2 = np.einsum("tj,tj->t", W, mo[1].reshape(T - 1, config.n_g))
    d = p[1:] - mu
    step = -0.5 * (LOG_2PI + np.log(s2) + d * d / s2)
    ll = float(step.sum())
    ok = math.isfinite(ll)
    return CmlOutput(ll if ok else -np.inf, step, mu, s2, ok, "" if ok else "non-finite value")
