"""Continuous resampling from an equal-variance Gaussian mixture.

The mixture density is evaluated on a regular grid by linearly binning the
weighted component means and convolving with the common Gaussian kernel
through the FFT.  A mid-point CDF on the same grid is then inverted at
stratified uniforms in one merged pass.  Draws are continuous functions of
the component means and weights for fixed uniforms, which is what keeps a
particle-filter likelihood continuous in the model parameters.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from . import kernels


@dataclass(frozen=True)
class MixtureSpec:
    """``pi(z) = sum_j w_j N(z; mu_j, sigma2)``."""

    means: np.ndarray
    weights: np.ndarray
    sigma2: float

    def __post_init__(self):
        m = np.ascontiguousarray(self.means, dtype=float)
        w = np.ascontiguousarray(self.weights, dtype=float)
        if m.shape != w.shape or m.ndim != 1 or m.size == 0:
            raise ValueError("means and weights must be equal-length 1-d arrays")
        if not self.sigma2 > 0.0:
            raise ValueError("component variance must be positive")
        if np.any(w < 0.0) or abs(w.sum() - 1.0) > 1e-10:
            raise ValueError("weights must be non-negative and sum to one")
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.means.shape[0]

    @property
    def mean(self) -> float:
        return float(self.weights @ self.means)

    @property
    def variance(self) -> float:
        d = self.means - self.mean
        return float(self.sigma2 + self.weights @ (d * d))


@dataclass
class ResampleGrid:
    """Regular grid ``lo + step * arange(n)`` with density and CDF.

    ``cdf[k]`` is the CDF at ``edges[k]``; edges sit half a step either side of
    the nodes, so there is one more edge than nodes.
    """

    lo: float
    step: float
    n: int
    pdf: np.ndarray | None = None
    cdf: np.ndarray | None = None
    clamped_mass: float = 0.0

    @property
    def nodes(self) -> np.ndarray:
        return self.lo + self.step * np.arange(self.n)

    @property
    def edges(self) -> np.ndarray:
        return self.lo + self.step * (np.arange(self.n + 1) - 0.5)


def make_grid(spec: MixtureSpec, n_grid: int = 1024, width: float = 8.0) -> ResampleGrid:
    """Grid over the mixture mean +- ``width`` mixture SDs.

    The mean falls exactly on node ``n_grid // 2``.
    """
    sd = np.sqrt(spec.variance)
    step = 2.0 * width * sd / n_grid
    lo = spec.mean - (n_grid // 2) * step
    return ResampleGrid(lo=lo, step=step, n=int(n_grid))


def mixture_pdf_fft(spec: MixtureSpec, grid: ResampleGrid) -> np.ndarray:
    """Binned FFT evaluation of the mixture density at the grid nodes.

    Raises
    ------
    ValueError
        If the component SD is smaller than one grid step.
    """
    sigma = np.sqrt(spec.sigma2)
    if sigma < grid.step:
        raise ValueError(
            f"kernel SD {sigma:.3g} below grid step {grid.step:.3g}; grid too coarse")
    n = grid.n
    counts = kernels.linear_bin(spec.means, spec.weights, grid.lo, grid.step, n)
    pos = (spec.means - grid.lo) / grid.step
    grid.clamped_mass = float(spec.weights[(pos < 0.0) | (pos > n - 1)].sum())
    size = 2 * n
    lag = np.arange(size)
    lag = np.minimum(lag, size - lag) * grid.step / sigma
    kern = np.exp(-0.5 * lag * lag) / (sigma * np.sqrt(2.0 * np.pi))
    kern[n] = 0.0
    pdf = sfft.irfft(sfft.rfft(counts, size) * sfft.rfft(kern), size)[:n]
    # FFT ringing leaves tiny negatives in empty regions
    np.maximum(pdf, 0.0, out=pdf)
    grid.pdf = pdf
    return pdf


def mixture_cdf(grid: ResampleGrid) -> np.ndarray:
    """Mid-point-rule CDF at the grid edges, renormalized to end at exactly 1."""
    if grid.pdf is None:
        raise ValueError("grid has no density; call mixture_pdf_fft first")
    cdf = np.empty(grid.n + 1)
    cdf[0] = 0.0
    np.cumsum(grid.pdf * grid.step, out=cdf[1:])
    total = cdf[-1]
    if not total > 0.0:
        raise FloatingPointError("mixture density vanished on the grid")
    cdf /= total
    cdf[-1] = 1.0
    grid.cdf = cdf
    return cdf


def stratified_uniforms(rng: np.random.Generator, n: int) -> np.ndarray:
    return (np.arange(n) + rng.random(n)) / n


def stratified_inverse_sample(grid: ResampleGrid, n: int | None = None, seed=None,
                              u_tilde=None) -> np.ndarray:
    """Draws at ``u_j = (j + u~_j) / N`` by inverting the grid CDF.

    Pass either ``u_tilde`` (the ``N`` iid U(0, 1) jitters) or ``n`` and
    ``seed``.  The output is sorted ascending.
    """
    if grid.cdf is None:
        raise ValueError("grid has no CDF; call mixture_cdf first")
    if u_tilde is None:
        from .rng import stream
        u_tilde = stream(seed, 0).random(n)
    u_tilde = np.asarray(u_tilde, dtype=float)
    u = (np.arange(u_tilde.shape[0]) + u_tilde) / u_tilde.shape[0]
    return kernels.inverse_cdf(grid.edges, grid.cdf, u)


def sample_mixture(means, weights, sigma2: float, u_tilde, n_grid: int = 1024,
                   width: float = 8.0) -> np.ndarray:
    """One continuous resampling step: grid, density, CDF, stratified inversion."""
    spec = MixtureSpec(means, weights, sigma2)
    grid = make_grid(spec, n_grid, width)
    mixture_pdf_fft(spec, grid)
    mixture_cdf(grid)
    return stratified_inverse_sample(grid, u_tilde=u_tilde)
