"""Derivative-free maximization in an unconstrained parameter space."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, logit

from .model import StructuralParams

DELTA_FLOOR = 1e-4


def to_unconstrained(theta) -> np.ndarray:
    """(rho, a, b, delta) -> (atanh rho, a, log(-b), logit((delta - eps) / (1 - eps)))."""
    rho, a, b, delta = (float(v) for v in theta)
    return np.array([math.atanh(rho), a, math.log(-b),
                     float(logit((delta - DELTA_FLOOR) / (1.0 - DELTA_FLOOR)))])


def from_unconstrained(phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    return np.array([math.tanh(phi[0]), phi[1], -math.exp(phi[2]),
                     DELTA_FLOOR + (1.0 - DELTA_FLOOR) * float(expit(phi[3]))])


@dataclass
class OptimizeResult:
    """Outcome of :func:`nelder_mead_maximize`.

    ``trace`` holds ``(iteration, best value)`` pairs; ``diameter`` is the
    largest vertex distance from the best vertex in the final simplex.
    """

    x: np.ndarray
    value: float
    n_evals: int
    n_iter: int
    converged: bool
    budget_exhausted: bool
    diameter: float
    message: str
    trace: list = field(default_factory=list)

    @property
    def failed(self) -> bool:
        return (not math.isfinite(self.value)) or (self.budget_exhausted and self.diameter > 1e-2)


def nelder_mead_maximize(objective, x0, step=0.05, xtol: float = 1e-6, ftol: float = 1e-6,
                         max_evals: int = 2000) -> OptimizeResult:
    """Maximize ``objective`` with the standard Nelder-Mead simplex.

    The starting simplex is ``x0`` plus ``step`` along each coordinate.
    The search stops when both the spread of values and the vertex distance
    to the best point fall below the tolerances, or after ``max_evals``
    evaluations.  Non-finite values are treated as ``-inf``.

    Raises
    ------
    ValueError
        If the objective is not finite at ``x0``.
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.shape[0]
    f0 = float(objective(x0))
    if not math.isfinite(f0):
        raise ValueError("objective is not finite at the starting point")
    cache = {x0.tobytes(): f0}

    def neg(x):
        key = x.tobytes()
        if key in cache:
            v = cache[key]
        else:
            v = float(objective(x))
            cache[key] = v
        return -v if math.isfinite(v) else math.inf

    simplex = np.vstack([x0, x0 + step * np.eye(n)])
    trace = [(0, f0)]

    def record(intermediate_result):
        trace.append((len(trace), -float(intermediate_result.fun)))

    res = minimize(neg, x0, method="Nelder-Mead", callback=record,
                   options={"initial_simplex": simplex, "xatol": xtol, "fatol": ftol,
                            "maxfev": max_evals, "maxiter": 100 * max_evals})
    fs = res.final_simplex[0]
    diam = float(np.max(np.abs(fs[1:] - fs[0]))) if n else 0.0
    value = -float(res.fun)
    return OptimizeResult(x=np.asarray(res.x), value=value, n_evals=int(res.nfev),
                          n_iter=int(res.nit), converged=res.status == 0,
                          budget_exhausted=res.status == 1, diameter=diam,
                          message=str(res.message), trace=trace)


def maximize_params(objective, start: StructuralParams, fixed: dict | None = None,
                    **options):
    """Maximize ``objective(params)`` over (rho, a, b, delta) in transformed space.

    ``fixed`` maps parameter names to values held constant.  Returns the
    best :class:`StructuralParams` and the :class:`OptimizeResult`.
    """
    from .model import PARAM_NAMES

    fixed = dict(fixed or {})
    unknown = set(fixed) - set(PARAM_NAMES)
    if unknown:
        raise ValueError(f"unknown fixed parameters: {sorted(unknown)}")
    theta0 = start.replace(**fixed).theta
    phi0 = to_unconstrained(theta0)
    free = [i for i, name in enumerate(PARAM_NAMES) if name not in fixed]

    def build(psub):
        phi = phi0.copy()
        phi[free] = psub
        theta = from_unconstrained(phi)
        for i, name in enumerate(PARAM_NAMES):
            if name in fixed:
                theta[i] = fixed[name]
        return start.with_theta(theta)

    def obj(psub):
        try:
            prm = build(psub)
        except ValueError:
            return -math.inf
        return objective(prm)

    if not free:
        v = float(obj(np.empty(0)))
        if not math.isfinite(v):
            raise ValueError("objective is not finite at the fixed parameters")
        res = OptimizeResult(np.empty(0), v, 1, 0, True, False, 0.0, "all parameters fixed",
                             [(0, v)])
        return build(res.x), res
    res = nelder_mead_maximize(obj, phi0[free], **options)
    return build(res.x), res
