"""Lower bounds and Monte Carlo validation for first-crossing times of jump-Wiener processes."""

from .analytic_core import (
    Degenerate,
    Erlang,
    Exponential,
    ProcessSpec,
    TwoPoint,
    WienerParams,
)
from .bounds import BoundCurve, BoundKind, cdf_lower_bound, pdf_lower_bound

__all__ = [
    "BoundCurve",
    "BoundKind",
    "Degenerate",
    "Erlang",
    "Exponential",
    "ProcessSpec",
    "TwoPoint",
    "WienerParams",
    "cdf_lower_bound",
    "pdf_lower_bound",
]
__version__ = "0.1.0"
