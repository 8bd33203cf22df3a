"""Backend selection for the numerical kernels.

The compiled ``_ckernels`` extension is used when it imports; otherwise, or
when the environment variable ``STORAGESML_PURE`` is set to a non-empty value
other than ``0``, the numpy implementation in ``_pykernels`` is used.
``BACKEND`` names the active choice.
"""
import os

from . import _pykernels as pure

compiled = None
if os.environ.get("STORAGESML_PURE", "0") in ("", "0"):
    try:
        from . import _ckernels as compiled
    except ImportError:  # extension not built
        compiled = None

_impl = compiled if compiled is not None else pure
BACKEND = "cython" if compiled is not None else "numpy"

solve_table = _impl.solve_table
bilinear = _impl.bilinear
invert_state = _impl.invert_state
predictive_moments = _impl.predictive_moments
threshold_stock = _impl.threshold_stock
simulate_prices = _impl.simulate_prices
simulate_structural = _impl.simulate_structural
linear_bin = _impl.linear_bin
inverse_cdf = _impl.inverse_cdf

__all__ = [
    "BACKEND",
    "compiled",
    "pure",
    "solve_table",
    "bilinear",
    "invert_state",
    "predictive_moments",
    "threshold_stock",
    "simulate_prices",
    "simulate_structural",
    "linear_bin",
    "inverse_cdf",
]
