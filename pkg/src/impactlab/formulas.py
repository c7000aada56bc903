"""Closed-form means, variances and t-statistics of the cost estimators.

Four per-order estimators are analyzed, all for the model of
:mod:`impactlab.model`:

* ``C_T``      slippage against the arrival mid, integral (P_t - m0) q_t dt
* ``dC_T``     slippage against the realized TWAP mid benchmark
* ``I``        total impact M_T - M_0
* ``I_pi``     impact-weighted sum of mid changes, noise-variance preserving

Moment expansions are carried to second order in the small timescales
(tau_m, tau_q << horizon). Inside these expansions the terminal-quantity
variance enters at its leading order q_total^2 sigma_q^2 tau_q^2 / horizon,
consistent with the order of the retained terms; the exact Var[Q_T] is
reported separately (``var_qt``) and is what Monte Carlo reproduces.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .model import ModelParams, SimGrid, stationary_rate_moments, var_total_quantity

__all__ = [
    "CostMomentsReport",
    "ImpactMomentsReport",
    "cost_moments",
    "impact_moments",
    "expected_impact_trajectory",
    "tstat",
    "regression_design_coeffs",
    "var_total_quantity_leading",
    "delta_noise_sd",
]


def var_total_quantity_leading(params: ModelParams) -> float:
    """Leading-order Var[Q_T] = q_total^2 sigma_q^2 tau_q^2 / horizon."""
    return (params.q_total * params.sigma_q * params.tau_q) ** 2 / params.horizon


def rate_noise_ratio(params: ModelParams) -> float:
    """Var[q_t] / E[q_t]^2 = sigma_q^2 tau_q / 2 for the stationary rate."""
    return params.sigma_q**2 * params.tau_q / 2.0


def delta_noise_sd(params: ModelParams) -> float:
    """Market-noise-only standard deviation of dC_T (dollars), the leading term."""
    v = params.sigma_m**2 * rate_noise_ratio(params) * params.tau_q
    return params.q_total * math.sqrt(v) * params.point_value


@dataclass(frozen=True)
class CostMomentsReport:
    """Moments of the arrival-slippage and TWAP-slippage estimators (dollars)."""

    e_linear: float           # expected spread cost a*s*Q
    e_impact_leading: float   # TWAP impact cost, first term only
    e_impact_full: float      # all displayed correction terms
    e_total: float            # e_linear + e_impact_full
    sd_cost_twap: float       # sqrt Var[C_T] for a pure TWAP schedule
    sd_cost_full: float       # sqrt Var[C_T] with rate-fluctuation corrections
    e_delta_leading: float    # expected dC_T, spread term only
    e_delta_full: float       # with the residual impact correction
    sd_delta_full: float      # sqrt Var[dC_T], both displayed terms
    var_qt: float             # exact Var[Q_T] (contracts^2)

    def to_json(self, **kwargs) -> str:
        return json.dumps(asdict(self), **kwargs)


@dataclass(frozen=True)
class ImpactMomentsReport:
    """Moments of the total-impact and weighted-impact estimators (points)."""

    e_total_impact: float     # E[I]
    sd_total_impact: float    # sqrt Var[I]
    e_weighted_twap: float    # E[I_pi] under a deterministic TWAP schedule
    e_weighted_general: float # E[I_pi] with trajectory-conditional weights
    sd_weighted: float        # sqrt Var[I_pi] = sigma_m * sqrt(T) by construction
    tau_eff: float            # tau_m*tau_q/(tau_m+tau_q)

    def to_json(self, **kwargs) -> str:
        return json.dumps(asdict(self), **kwargs)


def cost_moments(params: ModelParams) -> CostMomentsReport:
    """Evaluate the cost-estimator moment expansions in dollars."""
    Q, T = params.q_total, params.horizon
    tm, tq = params.tau_m, params.tau_q
    pv = params.point_value
    a_s = params.a * params.spread
    lam, sm = params.lam, params.sigma_m

    vq_ratio = rate_noise_ratio(params)
    vqt = var_total_quantity_leading(params)
    twap_shape = (tm / T) * (1.0 - tm / T)

    e_linear = a_s * Q * pv
    e_impact_leading = lam * Q * Q * twap_shape * pv
    concentration = lam * Q * Q * vq_ratio * tm * tq * (T - 2.0 * (tm + tq)) / ((tm + tq) * T * T)
    e_impact_full = e_impact_leading + (lam * vqt * twap_shape + concentration) * pv

    var_twap = sm * sm * Q * Q * T / 3.0
    var_full = (
        var_twap
        + sm * sm * vqt * T / 2.0
        + a_s * a_s * vqt
        - a_s * Q * lam * vqt * tm / (tm + tq)
    )

    e_delta_full = (a_s * Q + lam * Q * Q * vq_ratio * tm * tq / ((tm + tq) * T)) * pv
    var_delta = Q * Q * (sm * sm * vq_ratio * tq + a_s * a_s * vqt / (Q * Q))

    return CostMomentsReport(
        e_linear=e_linear,
        e_impact_leading=e_impact_leading,
        e_impact_full=e_impact_full,
        e_total=e_linear + e_impact_full,
        sd_cost_twap=math.sqrt(var_twap) * pv,
        sd_cost_full=math.sqrt(var_full) * pv,
        e_delta_leading=a_s * Q * pv,
        e_delta_full=e_delta_full,
        sd_delta_full=math.sqrt(var_delta) * pv,
        var_qt=var_total_quantity(params),
    )


def impact_moments(params: ModelParams) -> ImpactMomentsReport:
    """Evaluate the impact-estimator moment formulas in points."""
    Q, T = params.q_total, params.horizon
    tm, tq = params.tau_m, params.tau_q
    lam, sm, sq = params.lam, params.sigma_m, params.sigma_q

    e_total = lam * Q * (tm / T) * (1.0 - math.exp(-T / tm))
    var_total = sm * sm * T + (lam * Q * tm / T) ** 2 * (2.0 * sq * sq * tq * tq / (tm + tq) + 1.0)

    e_twap = lam * Q / math.sqrt(2.0) * math.sqrt(tm / T) * math.sqrt(1.0 - math.exp(-2.0 * T / tm))

    te = tm * tq / (tm + tq)
    bracket = tm / (2.0 * T) + sq * sq * tq * (
        0.5 + te * te / (T * tm) - te * (tm + 3.0 * tq) / (4.0 * T * (tm + tq))
    )
    e_general = lam * Q * math.sqrt(bracket)

    return ImpactMomentsReport(
        e_total_impact=e_total,
        sd_total_impact=math.sqrt(var_total),
        e_weighted_twap=e_twap,
        e_weighted_general=e_general,
        sd_weighted=sm * math.sqrt(T),
        tau_eff=te,
    )


def weighted_impact_leading(params: ModelParams) -> float:
    """Leading-order E[I_pi]: keep only the 1/2 inside the fluctuation bracket."""
    bracket = params.tau_m / (2.0 * params.horizon) + params.sigma_q**2 * params.tau_q * 0.5
    return params.lam * params.q_total * math.sqrt(bracket)


def expected_impact_trajectory(params: ModelParams, grid: SimGrid) -> np.ndarray:
    """Expected cumulative impact lambda*Q*(tau_m/T)*(1 - exp(-t/tau_m)) on the grid."""
    grid.check_horizon(params.horizon)
    shape = params.lam * params.q_total * params.tau_m / params.horizon
    return shape * (1.0 - np.exp(-grid.times / params.tau_m))


def tstat(mean: float, sd: float, n_orders: int) -> float:
    """t-statistic of a sample mean over n_orders orders: sqrt(n) * mean / sd."""
    if sd <= 0:
        raise ValueError("sd must be positive")
    if n_orders < 1:
        raise ValueError("n_orders must be at least 1")
    return math.sqrt(n_orders) * mean / sd


def regression_design_coeffs(params: ModelParams) -> tuple[float, float]:
    """Design coefficients (phi1, phi2) of the slippage-vs-size regression.

    E[C_T / Q] = a * phi1 + lam * phi2 * Q in points per contract, with
    phi1 = s and phi2 collecting the impact-cost shape terms. Both are
    independent of Q, so the per-unit slippage is exactly affine in order
    size under the moment expansion.
    """
    T, tm, tq = params.horizon, params.tau_m, params.tau_q
    twap_shape = (tm / T) * (1.0 - tm / T)
    vqt_over_q2 = (params.sigma_q * tq) ** 2 / T
    phi1 = params.spread
    phi2 = twap_shape * (1.0 + vqt_over_q2) + rate_noise_ratio(params) * tm * tq * (
        T - 2.0 * (tm + tq)
    ) / ((tm + tq) * T * T)
    return phi1, phi2
