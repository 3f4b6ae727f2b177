"""Least-squares extraction of inverse-power asymptotic coefficients.

Fits data f(k) ~ c_0 + c_1/k + ... + c_p/k^p across a ladder of levels k.
Exactly known terms (such as an (m/k) log k contribution) must be removed
by the caller before fitting; mixing log terms into the basis is
ill-conditioned.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import FitConditioningError

__all__ = ["AsymptoticFit", "fit_inverse_powers", "power_law_slope"]

COND_LIMIT = 1e12


@dataclass
class AsymptoticFit:
    """Fitted coefficients of sum_q c_q k^{-q} with per-level residuals."""

    k_values: np.ndarray
    coeffs: np.ndarray
    residuals: np.ndarray
    cond: float
    target: float | None = None
    meta: dict = field(default_factory=dict)

    def coefficient(self, q: int) -> float:
        return float(self.coeffs[q])

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    @property
    def residual_norm(self) -> float:
        return float(np.sqrt((self.residuals**2).mean()))


def fit_inverse_powers(k_values, values, order: int, cond_limit: float = COND_LIMIT) -> AsymptoticFit:
    """Least-squares fit of values(k) against powers k^{-q}, q = 0..order."""
    k = np.asarray(k_values, dtype=float)
    v = np.asarray(values, dtype=float)
    if len(k) < order + 1:
        raise ValueError("need at least order+1 ladder points")
    design = k[:, None] ** (-np.arange(order + 1)[None, :])
    cond = float(np.linalg.cond(design))
    if cond > cond_limit:
        raise FitConditioningError(f"design condition {cond:.3e} exceeds {cond_limit:.1e}")
    coeffs, *_ = np.linalg.lstsq(design, v, rcond=None)
    return AsymptoticFit(k, coeffs, v - design @ coeffs, cond)


def power_law_slope(x, values):
    """Log-log regression slope of |values| against x; returns (slope, r2)."""
    x = np.asarray(x, dtype=float)
    v = np.abs(np.asarray(values, dtype=float))
    if np.any(v <= 0.0):
        raise ValueError("power-law fit needs nonzero values")
    lx, lv = np.log(x), np.log(v)
    slope, intercept = np.polyfit(lx, lv, 1)
    fitted = slope * lx + intercept
    ss_res = float(((lv - fitted) ** 2).sum())
    ss_tot = float(((lv - lv.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 1.0
    return float(slope), r2
