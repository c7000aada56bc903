"""Ordinary least squares of per-order slippage on order size.

The slippage-per-contract of a batch of orders is regressed on the order
size with an intercept; the broker parameters follow from the fitted
coefficients through the design coefficients (phi1, phi2):

    slippage/Q = a*phi1 + lam*phi2*Q + eps  =>  a = intercept/phi1, lam = slope/phi2

Standard errors are homoskedastic with n-2 degrees of freedom; the residual
noise actually varies mildly with order size, but the reported t-statistics
mirror plain mean/sd ratios, so the simplification is immaterial here.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

__all__ = ["RegressionFit", "ols_fit", "recover_params"]


@dataclass(frozen=True)
class RegressionFit:
    intercept: float
    slope: float
    intercept_se: float
    slope_se: float
    intercept_t: float
    slope_t: float
    n_obs: int
    r_squared: float

    def to_json(self, **kwargs) -> str:
        return json.dumps(asdict(self), **kwargs)


def ols_fit(x, y) -> RegressionFit:
    """Least squares of y on x with an intercept."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-d sequences of equal length")
    n = x.size
    if n < 3:
        raise ValueError("need at least 3 observations")
    sxx = float(np.sum((x - x.mean()) ** 2))
    if sxx == 0.0:
        raise ValueError("collinear design: regressor has zero variance")

    slope = float(np.sum((x - x.mean()) * (y - y.mean())) / sxx)
    intercept = float(y.mean() - slope * x.mean())
    resid = y - intercept - slope * x
    ssr = float(np.sum(resid**2))
    s2 = ssr / (n - 2)
    slope_se = math.sqrt(s2 / sxx)
    intercept_se = math.sqrt(s2 * (1.0 / n + x.mean() ** 2 / sxx))
    syy = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ssr / syy if syy > 0 else 0.0

    return RegressionFit(
        intercept=intercept,
        slope=slope,
        intercept_se=intercept_se,
        slope_se=slope_se,
        intercept_t=intercept / intercept_se if intercept_se > 0 else math.inf,
        slope_t=slope / slope_se if slope_se > 0 else math.inf,
        n_obs=n,
        r_squared=r2,
    )


def recover_params(
    fit: RegressionFit, coeffs: tuple[float, float]
) -> tuple[float, float, float, float]:
    """Map a slippage-vs-size fit back to (a_hat, lambda_hat, a_se, lambda_se).

    ``coeffs`` are the design coefficients (phi1, phi2) on the same scale as
    the regressed slippage (multiply by point_value for dollar responses).
    """
    phi1, phi2 = coeffs
    if phi1 <= 0 or phi2 <= 0:
        raise ValueError("design coefficients must be positive")
    return (
        fit.intercept / phi1,
        fit.slope / phi2,
        fit.intercept_se / phi1,
        fit.slope_se / phi2,
    )
