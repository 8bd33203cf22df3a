"""Implied stock and one-step predictive price moments."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels
from .solver import PriceFunctionTable, _as_query


@lru_cache(maxsize=None)
def _gh(order: int):
    u, w = np.polynomial.hermite.hermgauss(order)
    nodes = np.sqrt(2.0) * u
    weights = w / np.sqrt(np.pi)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def gauss_hermite_nodes(order: int = 16):
    """Nodes and weights with ``sum(w * g(n)) ~ E[g(eps)]`` for ``eps ~ N(0, 1)``."""
    order = int(order)
    if not 2 <= order <= 64:
        raise ValueError(f"quadrature order must be in [2, 64], got {order}")
    return _gh(order)


@dataclass
class PredictiveMoments:
    """Moments of next period's price given current price and shock.

    All fields are arrays shaped like the broadcast ``(p, z)`` query.
    """

    mu: np.ndarray
    sigma2: np.ndarray
    implied_stock: np.ndarray
    implied_storage: np.ndarray


def invert_state(pf: PriceFunctionTable, p, z):
    """Stock ``x`` solving ``f(x, z) = p``, clamped to the grid's x range.

    For fixed ``z`` the interpolated table is piecewise linear in ``x``, so the
    crossing is located by binary search over the x nodes and solved exactly
    inside the bracketing segment.
    """
    shape, (pq, zq) = _as_query(p, z)
    out = kernels.invert_state(*pf.kargs, pq, zq).reshape(shape)
    return out if shape else float(out)


def predictive_moments(pf: PriceFunctionTable, p, z, quad_order: int = 16,
                       params=None) -> PredictiveMoments:
    """E and Var of ``p[t+1]`` given ``(p[t], z[t])`` by Gauss-Hermite quadrature.

    Next period's state is ``z' = rho z + eps`` and
    ``x' = (1 - delta) * storage + z'`` with ``storage = x(p, z) - P^{-1}(p)``
    floored at zero.  The variance is floored at ``1e-12 * (1 + mu^2)``.
    ``params`` defaults to those the table was solved at.
    """
    prm = pf.params if params is None else params
    gn, gw = gauss_hermite_nodes(quad_order)
    shape, (pq, zq) = _as_query(p, z)
    out = kernels.predictive_moments(*pf.kargs, prm.a, prm.b, prm.delta, prm.rho,
                                     pq, zq, gn, gw)
    return PredictiveMoments(*(row.reshape(shape) for row in out))


def moments_arrays(pf: PriceFunctionTable, p, z, quad_order: int = 16):
    """Unwrapped (4, n) kernel output for flat ``p``/``z`` arrays; the filter's hot path."""
    prm = pf.params
    gn, gw = gauss_hermite_nodes(quad_order)
    return kernels.predictive_moments(*pf.kargs, prm.a, prm.b, prm.delta, prm.rho, p, z, gn, gw)
