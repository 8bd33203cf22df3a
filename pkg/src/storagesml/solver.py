"""Rational-expectations price function on a two-part (x, z) grid.

The table is found by iterating the storage arbitrage condition
``f = max(P(x), beta * E f(next state))`` a fixed number of times, with the
expectation discretized over the z nodes so every sweep only needs linear
interpolation in x.  Off the grid the table is evaluated by bilinear
interpolation with queries clamped to the grid edges.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from . import kernels
from .model import StructuralParams, inverse_demand


@dataclass(frozen=True)
class GridConfig:
    """Grid sizes and range constants for the solver."""

    mz: int = 64
    mx1: int = 128
    mx2: int = 128
    p_max: float = 20.0
    c: float = 1.5
    z_sd: float = 6.0

    def __post_init__(self):
        if self.mz < 2 or self.mx1 < 2 or self.mx2 < 1:
            raise ValueError("grid needs mz >= 2, mx1 >= 2, mx2 >= 1")

    def scaled(self, factor: int) -> "GridConfig":
        return GridConfig(self.mz * factor, self.mx1 * factor, self.mx2 * factor,
                          self.p_max, self.c, self.z_sd)


@dataclass(frozen=True)
class SolverGrid:
    z_nodes: np.ndarray
    x_nodes: np.ndarray
    mx1: int
    mx2: int
    p_max: float
    c: float

    @property
    def mz(self) -> int:
        return self.z_nodes.shape[0]

    @property
    def shape(self):
        return (self.x_nodes.shape[0], self.z_nodes.shape[0])


def build_grid(params: StructuralParams, config: GridConfig = GridConfig()) -> SolverGrid:
    """Equally spaced z nodes over +-6 unconditional SDs; fine-then-coarse x nodes.

    Raises
    ------
    ValueError
        If ``delta == 0`` (the upper stock range is unbounded) or the ranges
        collapse so the x nodes are not strictly increasing.
    """
    if not params.delta > 0.0:
        raise ValueError("delta must be positive to bound the stock grid")
    zmax = config.z_sd / math.sqrt(1.0 - params.rho ** 2)
    z = np.linspace(-zmax, zmax, config.mz)
    x_lo = min(float(inverse_demand(config.p_max, params)), -zmax)
    x_mid = max(-params.a / params.b, zmax)
    x_hi = config.c * zmax / params.delta
    if not (x_lo < x_mid < x_hi):
        raise ValueError(
            f"degenerate stock grid: X1={x_lo:.6g}, X_Mx1={x_mid:.6g}, X_last={x_hi:.6g}")
    fine = np.linspace(x_lo, x_mid, config.mx1)
    step = (x_hi - x_mid) / config.mx2
    coarse = x_mid + step * np.arange(1, config.mx2 + 1)
    coarse[-1] = x_hi
    x = np.concatenate([fine, coarse])
    for arr in (x, z):
        arr.setflags(write=False)
    return SolverGrid(z, x, config.mx1, config.mx2, config.p_max, config.c)


def build_weight_matrix(z_nodes: np.ndarray, rho: float) -> np.ndarray:
    """Row j: N(Z_k; rho Z_j, 1) normalized over k."""
    z = np.asarray(z_nodes, dtype=float)
    logk = -0.5 * (z[None, :] - rho * z[:, None]) ** 2
    raw_max = logk.max(axis=1)
    # the plain density underflows to zero when a row's best node is > ~38 SDs off
    if np.any(raw_max < -700.0):
        raise ValueError("weight-matrix row normalizer underflows; grid far outside shock support")
    W = np.exp(logk - logsumexp(logk, axis=1)[:, None])
    return W


@dataclass
class PriceFunctionTable:
    """Tabulated price function ``values[i, j] = f(X_i, Z_j)``."""

    values: np.ndarray
    grid: SolverGrid
    params: StructuralParams
    iterations: int
    final_sup_change: float

    def __call__(self, x, z):
        return eval_price_function(self, x, z)

    # flat argument tuple for the kernels
    @property
    def kargs(self):
        return (self.values, self.grid.x_nodes, self.grid.mx1, self.grid.z_nodes)


def solve_price_function(params: StructuralParams, config: GridConfig = GridConfig(),
                         iterations: int = 400) -> PriceFunctionTable:
    """Fixed-count Jacobi iteration from ``max(P(x), 0)``.

    Convergence is not tested: the same number of sweeps at every parameter
    keeps the table, and hence the likelihood, continuous in the parameters.
    """
    grid = build_grid(params, config)
    W = build_weight_matrix(grid.z_nodes, params.rho)
    pdem = params.a + params.b * grid.x_nodes
    f = np.ascontiguousarray(np.repeat(np.maximum(pdem, 0.0)[:, None], grid.mz, axis=1))
    change = 0.0
    if iterations > 0:
        change = kernels.solve_table(f, grid.x_nodes, grid.mx1, grid.z_nodes, W,
                                     params.a, params.b, params.delta, params.beta,
                                     int(iterations))
    if not np.all(np.isfinite(f)):
        raise FloatingPointError("non-finite values in the price-function table")
    f.setflags(write=False)
    return PriceFunctionTable(f, grid, params, int(iterations), float(change))


def _as_query(*arrays):
    shaped = np.broadcast_arrays(*[np.asarray(a, dtype=float) for a in arrays])
    shape = shaped[0].shape
    return shape, [np.ascontiguousarray(a.ravel()) for a in shaped]


def eval_price_function(pf: PriceFunctionTable, x, z):
    """Bilinear interpolation with edge clamping; broadcasts over ``x`` and ``z``."""
    shape, (xq, zq) = _as_query(x, z)
    out = kernels.bilinear(*pf.kargs, xq, zq).reshape(shape)
    return out if shape else float(out)


def threshold_stock(pf: PriceFunctionTable, z):
    """x*(z): the largest stock at which the price equals consumer demand.

    Returns ``-inf`` where storage is active everywhere on the grid.
    """
    shape, (zq,) = _as_query(z)
    p = pf.params
    out = kernels.threshold_stock(*pf.kargs, p.a, p.b, zq).reshape(shape)
    return out if shape else float(out)


def threshold_price(pf: PriceFunctionTable, z):
    """p*(z) = P(x*(z)); prices at or above it mean stocks are run out.

    ``+inf`` where storage is active everywhere on the grid.
    """
    xs = np.asarray(threshold_stock(pf, z))
    with np.errstate(invalid="ignore"):
        out = np.where(np.isneginf(xs), np.inf, pf.params.a + pf.params.b * xs)
    return out if out.shape else float(out)


def kink_tolerance(price):
    return 1e-8 * (1.0 + np.abs(price))


# --- table dump -----------------------------------------------------------

_HEADER = ("mz", "mx1", "mx2", "rho", "a", "b", "delta", "r", "iterations", "final_sup_change")


def dump_table(pf: PriceFunctionTable, path) -> None:
    """Write the table as text.

    Layout: a ``# key=value`` header line per field of ``_HEADER``, then one
    line of comma-separated z nodes, one line of x nodes, then the table in
    row-major order (one x node per line, ``mz`` values each).
    """
    p = pf.params
    vals = (pf.grid.mz, pf.grid.mx1, pf.grid.mx2, p.rho, p.a, p.b, p.delta, p.r,
            pf.iterations, pf.final_sup_change)
    with open(path, "w") as fh:
        for k, v in zip(_HEADER, vals):
            fh.write(f"# {k}={v!r}\n")
        fh.write(",".join(repr(float(v)) for v in pf.grid.z_nodes) + "\n")
        fh.write(",".join(repr(float(v)) for v in pf.grid.x_nodes) + "\n")
        for row in pf.values:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def load_table(path) -> PriceFunctionTable:
    header = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                k, v = line[1:].strip().split("=", 1)
                header[k] = v
            else:
                rows.append([float(v) for v in line.split(",")])
    z = np.array(rows[0])
    x = np.array(rows[1])
    values = np.ascontiguousarray(rows[2:], dtype=float)
    params = StructuralParams(float(header["rho"]), float(header["a"]), float(header["b"]),
                              float(header["delta"]), float(header["r"]))
    mx1, mx2 = int(header["mx1"]), int(header["mx2"])
    grid = SolverGrid(z, x, mx1, mx2, float("nan"), float("nan"))
    values.setflags(write=False)
    return PriceFunctionTable(values, grid, params, int(header["iterations"]),
                              float(header["final_sup_change"]))
