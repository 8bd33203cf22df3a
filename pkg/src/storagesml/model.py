"""Structural parameters, demand primitives and data containers."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np


@dataclass(frozen=True)
class StructuralParams:
    """Parameters of the storage model.

    Parameters
    ----------
    rho : float
        AR(1) coefficient of the supply shock, ``|rho| < 1``.
    a, b : float
        Intercept and (negative) slope of the linear inverse demand
        ``P(q) = a + b q``.
    delta : float
        Per-period depreciation of stocks, in ``[0, 1]``.
    r : float
        Per-period real interest rate (fixed, not estimated).
    """

    rho: float
    a: float
    b: float
    delta: float
    r: float

    def __post_init__(self):
        for name in ("rho", "a", "b", "delta", "r"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")
        if not abs(self.rho) < 1.0:
            raise ValueError(f"|rho| must be < 1, got {self.rho}")
        if not self.b < 0.0:
            raise ValueError(f"demand slope b must be negative, got {self.b}")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError(f"delta must lie in [0, 1], got {self.delta}")
        if not self.r > 0.0:
            raise ValueError(f"interest rate r must be positive, got {self.r}")

    @property
    def beta(self) -> float:
        """Discount factor net of depreciation, (1 - delta) / (1 + r)."""
        return (1.0 - self.delta) / (1.0 + self.r)

    @property
    def theta(self) -> np.ndarray:
        """The estimated vector (rho, a, b, delta)."""
        return np.array([self.rho, self.a, self.b, self.delta])

    @classmethod
    def from_theta(cls, theta, r: float) -> "StructuralParams":
        rho, a, b, delta = (float(v) for v in theta)
        return cls(rho=rho, a=a, b=b, delta=delta, r=r)

    @classmethod
    def from_annual(cls, rho, a, b, delta, annual_rate=0.05, periods_per_year=12):
        return cls(rho=rho, a=a, b=b, delta=delta, r=period_rate(annual_rate, periods_per_year))

    def with_theta(self, theta) -> "StructuralParams":
        return StructuralParams.from_theta(theta, self.r)

    def replace(self, **changes) -> "StructuralParams":
        return replace(self, **changes)


PARAM_NAMES = ("rho", "a", "b", "delta")

# Simulation-study designs: (rho, a, b, delta, periods per year)
PRESETS = {
    "monthly": (0.97, 1.5, -0.4, 0.02, 12),
    "weekly": (0.99, 1.65, -0.09, 0.0035, 52),
    "yearly": (0.918, 0.223, -0.038, 0.046, 1),
}


def preset_params(name: str, annual_rate: float = 0.05) -> StructuralParams:
    rho, a, b, delta, m = PRESETS[name]
    return StructuralParams.from_annual(rho, a, b, delta, annual_rate, m)


def period_rate(annual_rate: float, periods_per_year: int) -> float:
    """Per-period rate compounding to ``annual_rate`` over a year."""
    if not annual_rate > -1.0:
        raise ValueError("annual_rate must exceed -1")
    if periods_per_year < 1:
        raise ValueError("periods_per_year must be >= 1")
    return (1.0 + annual_rate) ** (1.0 / periods_per_year) - 1.0


def demand(q, params: StructuralParams):
    """Inverse demand P(q) = a + b q."""
    return params.a + params.b * q


def inverse_demand(p, params: StructuralParams):
    """Quantity consumed at price ``p``: (p - a) / b."""
    return (p - params.a) / params.b


@dataclass(frozen=True)
class ShockDistribution:
    """Law of the price innovation in the simulated transition model.

    ``kind`` is ``"gaussian"`` or ``"student-t"``; Student-t draws are scaled
    to unit variance, which needs ``dof > 2``.
    """

    kind: str = "gaussian"
    dof: float | None = None

    def __post_init__(self):
        if self.kind not in ("gaussian", "student-t"):
            raise ValueError(f"unknown shock distribution {self.kind!r}")
        if self.kind == "student-t" and not (self.dof is not None and self.dof > 2):
            raise ValueError("student-t shocks need dof > 2")

    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.kind == "gaussian":
            return rng.standard_normal(size)
        return rng.standard_t(self.dof, size) * math.sqrt((self.dof - 2.0) / self.dof)

    @classmethod
    def parse(cls, text: str) -> "ShockDistribution":
        text = text.strip().lower()
        if text in ("gaussian", "normal", "standard-gaussian"):
            return cls()
        if text.startswith("t"):
            dof = float(text[1:].lstrip("-_") or 4)
            return cls("student-t", dof)
        if text.startswith("student-t"):
            return cls("student-t", float(text.split(":")[1]) if ":" in text else 4.0)
        raise ValueError(f"unknown shock distribution {text!r}")

    def label(self) -> str:
        return "gaussian" if self.kind == "gaussian" else f"t{self.dof:g}"


@dataclass(frozen=True)
class PriceSeries:
    """An observed or simulated price path.

    ``normalization_factor`` is the raw-data mean that was divided out, so
    ``values * normalization_factor`` recovers raw prices.
    """

    values: np.ndarray
    periods_per_year: int = 12
    normalization_factor: float = 1.0
    dates: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=float)
        if v.ndim != 1 or v.shape[0] < 2:
            raise ValueError("a price series needs at least two observations")
        if not np.all(np.isfinite(v)):
            raise ValueError("price series contains non-finite values")
        if self.dates is not None and len(self.dates) != v.shape[0]:
            raise ValueError("dates and values differ in length")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.shape[0]

    def normalized(self) -> "PriceSeries":
        """Rescale to unit sample mean, folding the factor into the record."""
        m = float(np.mean(self.values))
        if not m > 0.0:
            raise ValueError("cannot normalize a series with non-positive mean")
        return PriceSeries(self.values / m, self.periods_per_year,
                           self.normalization_factor * m, self.dates)

    def raw(self) -> np.ndarray:
        return self.values * self.normalization_factor
