"""Specification tests for transformed generalized residuals."""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np
from scipy import stats
from statsmodels.stats.diagnostic import acorr_ljungbox, het_arch

from .simulate import autocorr

NAN = float("nan")


@dataclass
class DiagnosticsReport:
    """Moments of the residuals and p-values of four tests.

    ``degenerate`` is set when the series has no variation; the test
    p-values are then ``nan``.
    """

    n: int
    mean: float
    sd: float
    skewness: float
    excess_kurtosis: float
    ac1: float
    jarque_bera_p: float
    ks_p: float
    ljung_box_p: float
    arch_p: float
    degenerate: bool = False

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


def residual_diagnostics(eta, lb_lag: int = 20, arch_lags: int = 1) -> DiagnosticsReport:
    """Jarque-Bera, Kolmogorov-Smirnov against N(0, 1), Ljung-Box and Engle's ARCH test."""
    e = np.asarray(eta, dtype=float)
    if e.shape[0] < 30:
        raise ValueError("residual diagnostics need at least 30 observations")
    sd = float(np.std(e, ddof=1))
    if not sd > 0.0 or not np.all(np.isfinite(e)):
        return DiagnosticsReport(e.shape[0], float(np.mean(e)), sd, NAN, NAN, NAN,
                                 NAN, NAN, NAN, NAN, degenerate=True)
    jb = stats.jarque_bera(e)
    ks = stats.kstest(e, "norm")
    lb_p = float(acorr_ljungbox(e, lags=[lb_lag])["lb_pvalue"].iloc[0])
    arch = het_arch(e, nlags=arch_lags)
    return DiagnosticsReport(
        n=e.shape[0],
        mean=float(np.mean(e)),
        sd=sd,
        skewness=float(stats.skew(e)),
        excess_kurtosis=float(stats.kurtosis(e)),
        ac1=autocorr(e, 1),
        jarque_bera_p=float(jb.pvalue),
        ks_p=float(ks.pvalue),
        ljung_box_p=lb_p,
        arch_p=float(arch[1]),
    )
