"""Point estimation, parametric bootstrap and simulation experiments."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .benchmarks import FITTERS, FitResult
from .cml import CmlConfig, cml_loglik
from .diagnostics import DiagnosticsReport, residual_diagnostics
from .filter import FilterConfig, FilterOutput, pf_loglik
from .model import PARAM_NAMES, PriceSeries, ShockDistribution, StructuralParams
from .optimize import OptimizeResult, maximize_params
from .simulate import simulate_dgp
from .solver import solve_price_function

METHODS = ("sml", "cml")


@dataclass
class EstimationReport:
    """Outcome of one estimation.

    ``mc_std`` and ``bootstrap_se`` map parameter names (and ``"loglik"``
    for ``mc_std``) to standard deviations and are filled in by
    :func:`monte_carlo_std` and :func:`parametric_bootstrap`.
    """

    method: str
    params: StructuralParams
    loglik: float
    start: StructuralParams
    seed: int
    optimizer: OptimizeResult | None = None
    fixed: dict = field(default_factory=dict)
    mc_std: dict | None = None
    bootstrap_se: dict | None = None
    diagnostics: DiagnosticsReport | None = None
    filter_output: FilterOutput | None = field(default=None, repr=False)
    series: PriceSeries | None = field(default=None, repr=False)

    @property
    def converged(self) -> bool:
        return self.optimizer is None or self.optimizer.converged

    @property
    def failed(self) -> bool:
        return (not math.isfinite(self.loglik)) or (
            self.optimizer is not None and self.optimizer.failed)


def objective(series: PriceSeries, method: str = "sml", seed: int = 0,
              n_particles: int | None = None, filter_config: FilterConfig = FilterConfig(),
              cml_config: CmlConfig = CmlConfig()):
    """``params -> log-likelihood`` with the random numbers fixed by ``seed``."""
    method = method.lower()
    if method == "sml":
        return lambda prm: pf_loglik(prm, series, n_particles, seed, filter_config).loglik
    if method == "cml":
        return lambda prm: cml_loglik(prm, series, cml_config, seed).loglik
    raise ValueError(f"unknown estimation method {method!r}; use one of {METHODS}")


def estimate(series: PriceSeries, method: str = "sml", start: StructuralParams | None = None,
             n_particles: int | None = None, seed: int = 0,
             filter_config: FilterConfig = FilterConfig(), cml_config: CmlConfig = CmlConfig(),
             fixed: dict | None = None, diagnostics: bool = True, **opt) -> EstimationReport:
    """Maximize the SML or CML objective from ``start``.

    The same random numbers are used at every parameter value.  With
    ``diagnostics`` the particle filter is rerun at the estimate to collect
    generalized residuals, stock-out probabilities and implied storage.
    """
    if start is None:
        raise ValueError("a starting parameter vector is required")
    obj = objective(series, method, seed, n_particles, filter_config, cml_config)
    best, res = maximize_params(obj, start, fixed, **opt)
    rep = EstimationReport(method.lower(), best, res.value, start, seed, res, dict(fixed or {}),
                           series=series)
    if diagnostics and math.isfinite(res.value):
        out = pf_loglik(best, series, n_particles, seed, filter_config, diagnostics=True)
        rep.filter_output = out
        if out.ok and out.u is not None and out.u.shape[0] >= 30:
            rep.diagnostics = residual_diagnostics(out.residuals)
    return rep


def _theta_std(rows) -> dict:
    arr = np.asarray(rows, dtype=float)
    if arr.shape[0] < 2:
        return {name: float("nan") for name in PARAM_NAMES}
    sd = arr.std(axis=0, ddof=1)
    return {name: float(v) for name, v in zip(PARAM_NAMES, sd)}


def monte_carlo_std(series: PriceSeries, start: StructuralParams, repeats: int, seed: int = 0,
                    method: str = "sml", **kw):
    """Spread of the estimates over ``repeats`` estimations with different filter seeds.

    Returns ``(std dict including "loglik", list of reports)``.
    """
    reps = [estimate(series, method, start, seed=rngmod.substream_seed(seed, rngmod.MC_REPEAT, k),
                     diagnostics=False, **kw) for k in range(repeats)]
    ok = [r for r in reps if not r.failed]
    std = _theta_std([r.params.theta for r in ok])
    lls = np.array([r.loglik for r in ok])
    std["loglik"] = float(lls.std(ddof=1)) if lls.shape[0] > 1 else float("nan")
    return std, reps


@dataclass
class BootstrapResult:
    """Replica estimates (one row per kept replica) and their spread."""

    estimates: np.ndarray
    logliks: np.ndarray
    se: dict
    n_failed: int
    replica_ids: list
    series: list = field(default_factory=list, repr=False)


def replica_series(params: StructuralParams, T: int, seed: int, i: int, pf=None,
                   shocks: ShockDistribution = ShockDistribution(), periods_per_year: int = 12,
                   filter_config: FilterConfig = FilterConfig()) -> PriceSeries:
    """Data set ``i`` simulated at ``params`` from the bootstrap stream of ``seed``."""
    if pf is None:
        pf = solve_price_function(params, filter_config.solver, filter_config.iterations)
    s, _ = simulate_dgp(params, pf, T, rngmod.substream_seed(seed, rngmod.BOOTSTRAP, i), shocks,
                        filter_config.quad_order, periods_per_year)
    return s


def parametric_bootstrap(theta_hat: StructuralParams, T: int, replicas: int, method: str = "sml",
                         seed: int = 0, keep_series: bool = False, estimator=None,
                         fixed: dict | None = None, periods_per_year: int = 12,
                         **kw) -> BootstrapResult:
    """Re-estimate on ``replicas`` data sets simulated at ``theta_hat``.

    Each replica is started at ``theta_hat``.  Replicas whose estimation
    fails (non-finite objective, or a used-up budget with a wide simplex)
    are dropped and counted.  ``estimator`` replaces :func:`estimate`, with
    the same call signature.
    """
    est = estimator or estimate
    fc = kw.get("filter_config", FilterConfig())
    pf = solve_price_function(theta_hat, fc.solver, fc.iterations)
    rows, lls, ids, kept = [], [], [], []
    n_failed = 0
    for i in range(replicas):
        s = replica_series(theta_hat, T, seed, i, pf, periods_per_year=periods_per_year,
                           filter_config=fc)
        try:
            rep = est(s, method, theta_hat, seed=seed, fixed=fixed, diagnostics=False, **kw)
        except (ValueError, FloatingPointError):
            n_failed += 1
            continue
        if rep.failed:
            n_failed += 1
            continue
        rows.append(rep.params.theta)
        lls.append(rep.loglik)
        ids.append(i)
        if keep_series:
            kept.append(s)
    est_arr = np.asarray(rows, dtype=float).reshape(-1, len(PARAM_NAMES))
    return BootstrapResult(est_arr, np.asarray(lls), _theta_std(est_arr), n_failed, ids, kept)


@dataclass(frozen=True)
class ExperimentSpec:
    """One simulation experiment: data design and estimator settings."""

    params: StructuralParams
    T: int
    replicas: int
    methods: tuple = ("sml",)
    periods_per_year: int = 12
    shocks: ShockDistribution = ShockDistribution()
    seed: int = 0
    n_particles: int = 4096
    mc_repeats: int = 0
    filter_config: FilterConfig = FilterConfig()
    cml_config: CmlConfig = CmlConfig()
    timing_evals: int = 3

    def __post_init__(self):
        if self.replicas < 1:
            raise ValueError("replicas must be at least 1")
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}")


@dataclass
class MethodSummary:
    method: str
    bias: dict
    sd: dict
    rmse: dict
    n_failed: int
    estimates: np.ndarray
    mc_std: dict | None = None
    eval_seconds: float = float("nan")


def summarize(estimates, truth: StructuralParams):
    """Bias, SD and RMSE per parameter from replica estimates."""
    est = np.asarray(estimates, dtype=float).reshape(-1, len(PARAM_NAMES))
    if est.shape[0] == 0:
        nan = {name: float("nan") for name in PARAM_NAMES}
        return nan, dict(nan), dict(nan)
    err = est - truth.theta
    bias = err.mean(axis=0)
    rmse = np.sqrt((err ** 2).mean(axis=0))
    sd = est.std(axis=0, ddof=1) if est.shape[0] > 1 else np.full(len(PARAM_NAMES), np.nan)
    mk = lambda v: {name: float(x) for name, x in zip(PARAM_NAMES, v)}
    return mk(bias), mk(sd), mk(rmse)


def time_objective(series, params, method, seed, n_evals, **kw) -> float:
    obj = objective(series, method, seed, **kw)
    t0 = time.perf_counter()
    for _ in range(n_evals):
        obj(params)
    return (time.perf_counter() - t0) / max(n_evals, 1)


def run_experiment(spec: ExperimentSpec, estimator=None, progress=None) -> dict:
    """Estimate every method on ``spec.replicas`` simulated data sets.

    Returns ``{method: MethodSummary}``.  All methods see the same data
    sets, each optimization is started at the true parameters, and
    ``mc_std`` comes from re-estimating data set 0 with ``mc_repeats``
    different seeds.
    """
    est = estimator or estimate
    truth = spec.params
    fc = spec.filter_config
    pf = solve_price_function(truth, fc.solver, fc.iterations)
    kw = dict(n_particles=spec.n_particles, filter_config=fc, cml_config=spec.cml_config)
    data = [replica_series(truth, spec.T, spec.seed, i, pf, spec.shocks, spec.periods_per_year, fc)
            for i in range(spec.replicas)]
    out = {}
    for m in spec.methods:
        rows, n_failed = [], 0
        for i, s in enumerate(data):
            try:
                rep = est(s, m, truth, seed=spec.seed, diagnostics=False, **kw)
            except (ValueError, FloatingPointError):
                n_failed += 1
                continue
            if progress is not None:
                progress(m, i, rep)
            if rep.failed:
                n_failed += 1
                continue
            rows.append(rep.params.theta)
        bias, sd, rmse = summarize(rows, truth)
        summ = MethodSummary(m, bias, sd, rmse, n_failed,
                             np.asarray(rows, dtype=float).reshape(-1, len(PARAM_NAMES)))
        if spec.mc_repeats > 1:
            summ.mc_std, _ = monte_carlo_std(data[0], truth, spec.mc_repeats, spec.seed, m, **kw)
        if spec.timing_evals > 0:
            summ.eval_seconds = time_objective(data[0], truth, m, spec.seed, spec.timing_evals,
                                               **kw)
        out[m] = summ
    return out


@dataclass
class LrComparison:
    """Observed LR against a competitor and its place among bootstrap LRs.

    ``rank`` counts simulated LRs below the observed one, ties counting one
    half.
    """

    competitor: str
    observed_lr: float
    storage_loglik: float
    competitor_loglik: float
    simulated_lr: np.ndarray
    rank: float
    n_failed: int


def _competitor_loglik(competitor: str, series, storage_loglik: float) -> float:
    if competitor == "storage":
        return storage_loglik
    return FITTERS[competitor](series).loglik


def lr_bootstrap_compare(storage_fit: EstimationReport, competitor: str, replicas: int,
                         seed: int = 0, competitor_fit: FitResult | None = None,
                         estimator=None, **kw) -> LrComparison:
    """Likelihood-ratio test of the storage model against a reduced-form competitor.

    ``LR = 2 (loglik_storage - loglik_competitor)``.  Both models are
    refitted on data simulated from the storage fit; the observed LR is
    ranked among the simulated ones.  ``competitor`` is one of ``ar1``,
    ``garch``, ``msar1`` or ``storage`` (self-comparison, LR = 0).
    """
    if competitor not in FITTERS and competitor != "storage":
        raise ValueError(f"unknown competitor {competitor!r}")
    series = storage_fit.series
    if series is None:
        raise ValueError("the storage fit does not carry its data")
    ll_s = storage_fit.loglik
    ll_c = (competitor_fit.loglik if competitor_fit is not None
            else _competitor_loglik(competitor, series, ll_s))
    obs = 2.0 * (ll_s - ll_c)
    boot = parametric_bootstrap(storage_fit.params, len(series), replicas, storage_fit.method,
                                seed, keep_series=True, estimator=estimator,
                                fixed=storage_fit.fixed or None,
                                periods_per_year=series.periods_per_year, **kw)
    sims = []
    n_failed = boot.n_failed
    for s, ll in zip(boot.series, boot.logliks):
        try:
            llc = _competitor_loglik(competitor, s, ll)
        except (ValueError, FloatingPointError):
            n_failed += 1
            continue
        if math.isfinite(llc):
            sims.append(2.0 * (ll - llc))
        else:
            n_failed += 1
    sims = np.asarray(sims)
    rank = float(np.sum(sims < obs) + 0.5 * np.sum(sims == obs))
    return LrComparison(competitor, obs, ll_s, ll_c, sims, rank, n_failed)
