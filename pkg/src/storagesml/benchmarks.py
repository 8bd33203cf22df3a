"""Reduced-form comparison models fitted by exact conditional maximum likelihood.

All three condition on the first price, so their log-likelihoods are
comparable with the storage-model likelihood of ``p[2:] | p[1]``.

* AR(1): ``p[t+1] = a + rho (p[t] - a) + b eps[t+1]``; ``b`` is reported
  negative to match the storage model's sign convention.
* AR(1)-GARCH(1,1): the same mean equation with
  ``s2[t] = alpha0 + alpha1 e[t-1]^2 + beta1 s2[t-1]`` started at the
  unconditional variance.
* Two-regime Markov-switching AR(1), evaluated by the Hamilton filter from
  the ergodic regime distribution.  Regime 1 is the one with the smaller
  intercept.

Each richer model is also evaluated at the point that embeds the AR(1) fit,
and the better of that point and the optimizer's answer is returned, so the
fitted log-likelihoods are never below the AR(1) value.
"""
from __future__ import annotations

import math
from dataclasses import astuple, dataclass, field, fields

import numpy as np
from scipy.signal import lfilter
from scipy.special import expit, logit
from statsmodels.tools.numdiff import approx_hess3

from .model import PriceSeries
from .optimize import nelder_mead_maximize

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class Ar1Params:
    rho: float
    a: float
    b: float


@dataclass(frozen=True)
class GarchParams:
    rho: float
    a: float
    alpha0: float
    alpha1: float
    beta1: float


@dataclass(frozen=True)
class MsAr1Params:
    """Regime-specific (rho, a, b) and ``p11 = P(1 -> 1)``, ``p21 = P(2 -> 1)``."""

    rho1: float
    a1: float
    b1: float
    rho2: float
    a2: float
    b2: float
    p11: float
    p21: float

    def transition(self) -> np.ndarray:
        """Row-stochastic matrix, ``P[i, j] = P(next = j | current = i)``."""
        return np.array([[self.p11, 1.0 - self.p11], [self.p21, 1.0 - self.p21]])

    def ergodic(self) -> np.ndarray:
        den = 1.0 - self.p11 + self.p21
        pi1 = self.p21 / den if den > 0.0 else 0.5
        return np.array([pi1, 1.0 - pi1])

    def swapped(self) -> "MsAr1Params":
        return MsAr1Params(self.rho2, self.a2, self.b2, self.rho1, self.a1, self.b1,
                           1.0 - self.p21, 1.0 - self.p11)


@dataclass
class FitResult:
    """A fitted benchmark: parameters, log-likelihood and observed-information SEs."""

    model: str
    params: object
    loglik: float
    se: dict
    converged: bool = True
    n_evals: int = 0
    filtered: np.ndarray | None = field(default=None, repr=False)

    def param_dict(self) -> dict:
        return {f.name: getattr(self.params, f.name) for f in fields(self.params)}


def _values(series) -> np.ndarray:
    return np.asarray(series.values if isinstance(series, PriceSeries) else series, dtype=float)


def _observed_se(loglik_fn, x, names) -> dict:
    try:
        H = approx_hess3(np.asarray(x, dtype=float), loglik_fn)
        cov = np.linalg.inv(-H)
        d = np.diag(cov)
        se = np.where(d > 0.0, np.sqrt(np.abs(d)), np.nan)
    except (np.linalg.LinAlgError, ValueError, FloatingPointError):
        se = np.full(len(names), np.nan)
    return dict(zip(names, (float(v) for v in se)))


# --- AR(1) ----------------------------------------------------------------

def ar1_loglik(params: Ar1Params, series) -> float:
    p = _values(series)
    if not (abs(params.rho) < 1.0 and params.b != 0.0):
        return -math.inf
    e = p[1:] - params.a - params.rho * (p[:-1] - params.a)
    s2 = params.b * params.b
    return float(-0.5 * (e.shape[0] * (LOG_2PI + math.log(s2)) + e @ e / s2))


def fit_ar1(series) -> FitResult:
    """Closed-form conditional ML (least squares on the lagged price)."""
    p = _values(series)
    if p.shape[0] < 3:
        raise ValueError("AR(1) fit needs at least three prices")
    y, x = p[1:], p[:-1]
    X = np.column_stack([np.ones_like(x), x])
    (c, rho), *_ = np.linalg.lstsq(X, y, rcond=None)
    rho = float(np.clip(rho, -1.0 + 1e-12, 1.0 - 1e-12))
    a = float(c / (1.0 - rho))
    e = y - c - rho * x
    b = -math.sqrt(max(float(e @ e) / e.shape[0], 1e-300))
    prm = Ar1Params(rho, a, float(b))
    se = _observed_se(lambda v: ar1_loglik(Ar1Params(*v), p), astuple(prm), ("rho", "a", "b"))
    return FitResult("ar1", prm, ar1_loglik(prm, p), se)


# --- AR(1)-GARCH(1,1) -------------------------------------------------------

def garch_variances(e: np.ndarray, alpha0: float, alpha1: float, beta1: float) -> np.ndarray:
    """Conditional variances of the residuals ``e``, the first one unconditional."""
    h0 = alpha0 / (1.0 - alpha1 - beta1)
    h = np.empty_like(e)
    h[0] = h0
    if e.shape[0] > 1:
        u = alpha0 + alpha1 * e[:-1] ** 2
        h[1:] = lfilter([1.0], [1.0, -beta1], u, zi=[beta1 * h0])[0]
    return h


def garch_loglik(params: GarchParams, series) -> float:
    p = _values(series)
    q = params
    if not (abs(q.rho) < 1.0 and q.alpha0 > 0.0 and q.alpha1 >= 0.0 and q.beta1 >= 0.0
            and q.alpha1 + q.beta1 < 1.0):
        return -math.inf
    e = p[1:] - q.a - q.rho * (p[:-1] - q.a)
    h = garch_variances(e, q.alpha0, q.alpha1, q.beta1)
    return float(-0.5 * np.sum(LOG_2PI + np.log(h) + e * e / h))


def _garch_unpack(phi) -> GarchParams:
    s = (1.0 - 1e-8) * expit(phi[3])
    alpha1 = s * expit(phi[4])
    return GarchParams(math.tanh(phi[0]), float(phi[1]), math.exp(phi[2]), float(alpha1),
                       float(s - alpha1))


def _garch_pack(q: GarchParams) -> np.ndarray:
    s = (q.alpha1 + q.beta1) / (1.0 - 1e-8)
    return np.array([math.atanh(q.rho), q.a, math.log(q.alpha0), logit(s),
                     logit(q.alpha1 / (q.alpha1 + q.beta1))])


def fit_garch(series, starts=((0.1, 0.8), (0.05, 0.5))) -> FitResult:
    """Conditional ML with the shared Nelder-Mead in a transformed space.

    The search space keeps ``alpha0 > 0``, ``alpha1, beta1 >= 0`` and
    ``alpha1 + beta1 < 1``.  Each start in ``starts`` gives
    ``(alpha1, beta1)`` with ``alpha0`` matched to the AR(1) residual
    variance; the best run is polished by one restart.
    """
    p = _values(series)
    if p.shape[0] < 30:
        raise ValueError("GARCH fit needs at least 30 prices")
    ar = fit_ar1(p)
    s2 = ar.params.b ** 2
    obj = lambda phi: garch_loglik(_garch_unpack(phi), p)
    best = None
    n_evals = 0
    for a1, b1 in starts:
        q0 = GarchParams(ar.params.rho, ar.params.a, s2 * (1.0 - a1 - b1), a1, b1)
        res = nelder_mead_maximize(obj, _garch_pack(q0), step=0.1)
        n_evals += res.n_evals
        if best is None or res.value > best.value:
            best = res
    res = nelder_mead_maximize(obj, best.x, step=0.05)
    n_evals += res.n_evals
    if res.value < best.value:
        res = best
    prm = _garch_unpack(res.x)
    ll = res.value
    nested = GarchParams(ar.params.rho, ar.params.a, s2, 0.0, 0.0)
    if ar.loglik > ll:
        prm, ll = nested, garch_loglik(nested, p)
    se = _observed_se(lambda v: garch_loglik(GarchParams(*v), p), astuple(prm),
                      [f.name for f in fields(GarchParams)])
    return FitResult("garch", prm, ll, se, converged=res.converged, n_evals=n_evals)


# --- Markov-switching AR(1) -------------------------------------------------

def hamilton_filter(params: MsAr1Params, series):
    """Log-likelihood and filtered regime probabilities for ``t = 2..T``.

    Returns ``(loglik, probs)`` with ``probs[t]`` the regime distribution
    after seeing ``p[t+1]``.
    """
    p = _values(series)
    q = params
    x, y = p[:-1], p[1:]
    dens = np.empty((y.shape[0], 2))
    for k, (rho, a, b) in enumerate(((q.rho1, q.a1, q.b1), (q.rho2, q.a2, q.b2))):
        e = y - a - rho * (x - a)
        dens[:, k] = np.exp(-0.5 * (e / b) ** 2) / (abs(b) * math.sqrt(2.0 * math.pi))
    # scalar loop: two regimes make numpy's per-call overhead dominate
    p11, p21 = q.p11, q.p21
    x1, x2 = q.ergodic()
    n = y.shape[0]
    d1, d2 = dens[:, 0].tolist(), dens[:, 1].tolist()
    f1 = [0.0] * n
    ll = 0.0
    for t in range(n):
        j1 = x1 * d1[t]
        lik = j1 + x2 * d2[t]
        if not lik > 0.0:
            return -math.inf, None
        ll += math.log(lik)
        f = j1 / lik
        f1[t] = f
        x1 = f * p11 + (1.0 - f) * p21
        x2 = 1.0 - x1
    probs = np.empty((n, 2))
    probs[:, 0] = f1
    probs[:, 1] = 1.0 - probs[:, 0]
    return ll, probs


def msar1_loglik(params: MsAr1Params, series) -> float:
    q = params
    if not (abs(q.rho1) < 1.0 and abs(q.rho2) < 1.0 and q.b1 != 0.0 and q.b2 != 0.0
            and 0.0 < q.p11 < 1.0 and 0.0 < q.p21 < 1.0):
        return -math.inf
    return hamilton_filter(params, series)[0]


def _ms_unpack(phi) -> MsAr1Params:
    return MsAr1Params(math.tanh(phi[0]), float(phi[1]), -math.exp(phi[2]),
                       math.tanh(phi[3]), float(phi[4]), -math.exp(phi[5]),
                       float(expit(phi[6])), float(expit(phi[7])))


def _ms_pack(q: MsAr1Params) -> np.ndarray:
    return np.array([math.atanh(q.rho1), q.a1, math.log(-q.b1), math.atanh(q.rho2), q.a2,
                     math.log(-q.b2), logit(q.p11), logit(q.p21)])


def _split_start(p: np.ndarray) -> MsAr1Params:
    """Per-regime AR(1) least squares on transitions into prices below / above the median."""
    x, y = p[:-1], p[1:]
    hi = y > np.median(y)
    out = []
    for mask in (~hi, hi):
        X = np.column_stack([np.ones(mask.sum()), x[mask]])
        (c, rho), *_ = np.linalg.lstsq(X, y[mask], rcond=None)
        rho = float(np.clip(rho, -0.95, 0.95))
        e = y[mask] - c - rho * x[mask]
        out.append((rho, float(c / (1.0 - rho)), -max(float(e.std()), 1e-3 * float(np.std(p)))))
    stay = float(np.clip(np.mean(hi[1:] == hi[:-1]), 0.05, 0.95))
    (r1, a1, b1), (r2, a2, b2) = out
    return MsAr1Params(r1, a1, b1, r2, a2, b2, stay, 1.0 - stay)


def fit_ms_ar1(series) -> FitResult:
    """Hamilton-filter ML over several starts, regimes ordered by intercept.

    ``filtered`` on the result holds the filtered regime probabilities.
    """
    p = _values(series)
    if p.shape[0] < 30:
        raise ValueError("Markov-switching fit needs at least 30 prices")
    ar = fit_ar1(p)
    r, b = ar.params.rho, ar.params.b
    lo, hi = np.quantile(p, [0.25, 0.75])
    starts = [
        _split_start(p),
        MsAr1Params(r, float(lo), 0.5 * b, r, float(hi), 1.5 * b, 0.95, 0.05),
        MsAr1Params(r, ar.params.a, 0.5 * b, r, ar.params.a, 2.0 * b, 0.9, 0.1),
    ]
    obj = lambda phi: msar1_loglik(_ms_unpack(phi), p)
    best = None
    n_evals = 0
    for q0 in starts:
        res = nelder_mead_maximize(obj, _ms_pack(q0), step=0.1, max_evals=4000)
        n_evals += res.n_evals
        if best is None or res.value > best.value:
            best = res
    res = nelder_mead_maximize(obj, best.x, step=0.05, max_evals=4000)
    n_evals += res.n_evals
    if res.value < best.value:
        res = best
    prm, ll = _ms_unpack(res.x), res.value
    if ar.loglik > ll:
        prm = MsAr1Params(r, ar.params.a, b, r, ar.params.a, b, 0.5, 0.5)
        ll = msar1_loglik(prm, p)
    if prm.a1 > prm.a2:
        prm = prm.swapped()
    _, probs = hamilton_filter(prm, p)
    se = _observed_se(lambda v: msar1_loglik(MsAr1Params(*v), p), astuple(prm),
                      [f.name for f in fields(MsAr1Params)])
    return FitResult("msar1", prm, ll, se, converged=res.converged, n_evals=n_evals,
                     filtered=probs)


FITTERS = {"ar1": fit_ar1, "garch": fit_garch, "msar1": fit_ms_ar1}
