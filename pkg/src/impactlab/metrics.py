"""Per-order cost and impact estimators.

Given a rate path and a price path (simulated or reconstructed from broker
fill records), computes the four estimators of broker cost parameters:

* arrival slippage  C_T  = point_value * integral (P_t - m0) q_t dt
* TWAP slippage    dC_T  = C_T - point_value * integral (M_t - m0) * (Q/T) dt
* total impact        I  = M_T - M_0
* weighted impact  I_pi  = sum pi_i * (M_{i+1} - M_i)

The weight curves satisfy the noise-preservation constraint
integral pi^2 dt = horizon, so I_pi carries the same market-noise variance
as I while concentrating on the impact-rich part of the order.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .model import (
    ModelParams,
    PricePath,
    RatePath,
    SimGrid,
    cumulative_trapezoid,
    impact_state_from_rates,
    trapezoid_weights,
)

__all__ = [
    "OrderMetrics",
    "WeightCurve",
    "FillRecord",
    "naive_cost",
    "twap_slippage",
    "total_impact",
    "twap_weights",
    "general_weights",
    "weighted_impact",
    "metrics_from_records",
    "read_fill_records",
]

WEIGHT_NORM_RTOL = 5e-3


@dataclass(frozen=True)
class OrderMetrics:
    """The four estimators for one order, plus the simulation-only decomposition.

    Costs in dollars, impacts in points. The decomposition fields are None for
    orders ingested from fill records, where the impact state is unobservable.
    """

    cost_arrival: float
    cost_to_twap: float
    impact_total: float
    impact_weighted: float
    executed_qty: float
    cost_linear_part: Optional[float] = None
    cost_impact_part: Optional[float] = None
    cost_noise_part: Optional[float] = None


@dataclass(frozen=True)
class WeightCurve:
    """Weights on mid-price increments, one per grid interval."""

    pi: np.ndarray

    def __post_init__(self):
        if self.pi.ndim != 1 or self.pi.size < 2:
            raise ValueError("weight curve must be a 1-d sequence of interval weights")

    def check_normalization(self, grid: SimGrid, horizon: float) -> None:
        norm = float(np.sum(self.pi**2) * grid.dt)
        if not math.isclose(norm, horizon, rel_tol=WEIGHT_NORM_RTOL):
            raise ValueError(
                f"weight normalization sum pi^2 dt = {norm:.6g}, expected {horizon:.6g}"
            )


@dataclass(frozen=True)
class FillRecord:
    """One broker print: minutes from order start, signed quantity, prices."""

    time: float
    signed_qty: float
    fill_price: float
    mid_price: float


def _check_lengths(path: RatePath, prices: PricePath, grid: SimGrid) -> None:
    n = grid.n_steps + 1
    if path.q.shape[-1] != n or prices.mid.shape[-1] != n or prices.fill.shape[-1] != n:
        raise ValueError("rate path, price path and grid have mismatched lengths")


def naive_cost(
    path: RatePath, prices: PricePath, params: ModelParams, grid: SimGrid
) -> tuple[float, tuple[float, float, float]]:
    """Arrival slippage in dollars with its linear/impact/noise decomposition.

    total = point_value * integral (fill - m0) q dt. The decomposition splits
    the integrand into the spread premium (fill - mid), the impact state, and
    the residual mid noise (mid - m0 - impact); the three parts sum to the
    total up to rounding.
    """
    _check_lengths(path, prices, grid)
    w = trapezoid_weights(grid)
    pv = params.point_value
    m0 = prices.mid[0]
    total = pv * float(np.dot((prices.fill - m0) * path.q, w))
    linear = pv * float(np.dot((prices.fill - prices.mid) * path.q, w))
    impact = pv * float(np.dot(prices.impact * path.q, w))
    noise = pv * float(np.dot((prices.mid - m0 - prices.impact) * path.q, w))
    return total, (linear, impact, noise)


def twap_slippage(path: RatePath, prices: PricePath, params: ModelParams, grid: SimGrid) -> float:
    """Slippage against the time-weighted average of the realized mids (dollars).

    Both legs reference the arrival mid m0; for a constant rate the impact and
    noise legs cancel exactly, leaving the pure spread cost.
    """
    _check_lengths(path, prices, grid)
    w = trapezoid_weights(grid)
    m0 = prices.mid[0]
    arrival_leg = float(np.dot((prices.fill - m0) * path.q, w))
    twap_leg = params.twap_rate * float(np.dot(prices.mid - m0, w))
    return params.point_value * (arrival_leg - twap_leg)


def total_impact(prices: PricePath) -> float:
    """Total mid-price displacement over the order (points)."""
    if prices.mid.size == 0:
        raise ValueError("empty price path")
    return float(prices.mid[-1] - prices.mid[0])


def twap_weights(params: ModelParams, grid: SimGrid) -> WeightCurve:
    """Optimal deterministic weights for a TWAP schedule, at interval midpoints.

    pi(t) = sqrt(2) * (T/tau_m)^(1/2) * (1 - exp(-2T/tau_m))^(-1/2) * exp(-t/tau_m),
    which maximizes the expected impact signal at fixed noise variance.
    """
    grid.check_horizon(params.horizon)
    T, tm = params.horizon, params.tau_m
    scale = math.sqrt(2.0 * T / tm) / math.sqrt(1.0 - math.exp(-2.0 * T / tm))
    return WeightCurve(pi=scale * np.exp(-grid.midpoints / tm))


def general_weights(path: RatePath, params: ModelParams, grid: SimGrid) -> WeightCurve:
    """Trajectory-conditional weights, proportional to the expected impact drift.

    The unnormalized weight is u_t = q_t - J_t/tau_m (the conditional expected
    mid drift per unit lambda), sampled at interval midpoints and scaled by
    nu = sqrt(horizon / integral u^2 dt) to preserve the noise variance.
    Invariant to lambda and to positive rescaling of the rate path.
    """
    grid.check_horizon(params.horizon)
    if path.q.shape[-1] != grid.n_steps + 1:
        raise ValueError("rate path does not match grid")
    u = path.q - impact_state_from_rates(path.q, params.tau_m, grid.dt) / params.tau_m
    u_mid = 0.5 * (u[:-1] + u[1:])
    norm = float(np.sum(u_mid**2) * grid.dt)
    if norm <= 0.0:
        raise ValueError("degenerate weights: rate path is identically zero")
    nu = math.sqrt(params.horizon / norm)
    return WeightCurve(pi=nu * u_mid)


def weighted_impact(prices: PricePath, weights: WeightCurve) -> float:
    """Weighted sum of mid increments, sum pi_i * (mid[i+1] - mid[i]) (points)."""
    if weights.pi.size != prices.mid.size - 1:
        raise ValueError("weight curve length must equal the number of mid increments")
    return float(np.dot(weights.pi, np.diff(prices.mid)))


def read_fill_records(path: str | Path) -> list[FillRecord]:
    """Load one order's fill records from CSV.

    Expected header: ``time_min,signed_qty,fill_price,mid_price``.
    """
    expected = ["time_min", "signed_qty", "fill_price", "mid_price"]
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != expected:
            raise ValueError(f"bad fill-record header {reader.fieldnames}, expected {expected}")
        return [
            FillRecord(
                time=float(row["time_min"]),
                signed_qty=float(row["signed_qty"]),
                fill_price=float(row["fill_price"]),
                mid_price=float(row["mid_price"]),
            )
            for row in reader
        ]


def _interp_records_to_grid(
    records: Sequence[FillRecord], horizon: float, grid: SimGrid
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Piecewise-constant rate and fill, linearly interpolated mid, on the grid.

    The quantity of record j is treated as executed at a constant rate over
    (t_{j-1}, t_j]; grid nodes take the rate and fill price of the interval
    they fall in (nodes at record times take the closing interval).
    """
    times = np.array([r.time for r in records])
    if np.any(np.diff(times) <= 0):
        raise ValueError("record times must be strictly increasing")
    if times[0] < 0 or times[-1] > horizon:
        raise ValueError("record times must lie within [0, horizon]")
    if abs(times[0]) > 1e-9:
        raise ValueError("first record must anchor the order start (time 0) with the arrival mid")

    qty = np.array([r.signed_qty for r in records])
    fills = np.array([r.fill_price for r in records])
    mids = np.array([r.mid_price for r in records])
    rates = qty[1:] / np.diff(times)

    t = grid.times
    # interval index for each node: nodes on a record time close that interval
    idx = np.clip(np.searchsorted(times, t, side="left") - 1, 0, len(rates) - 1)
    q = rates[idx]
    q[t > times[-1] + 1e-12] = 0.0  # order finished before the horizon
    fill = fills[idx + 1]
    fill[0] = fills[0]
    mid = np.interp(t, times, mids)
    return q, mid, fill


def metrics_from_records(
    records: Sequence[FillRecord],
    *,
    q_total: float,
    horizon: float,
    tau_m: float,
    point_value: float,
    grid: SimGrid,
) -> OrderMetrics:
    """Model-free estimators from broker fill records.

    Needs only the target size, the horizon, the impact decay timescale (for
    the weighting curve) and the dollar conversion; no impact coefficient or
    volatilities. The impact/noise decomposition is unavailable and left None.
    """
    if len(records) == 0:
        raise ValueError("no records")
    if len(records) < 2:
        raise ValueError("need at least two records to imply a trading rate")

    q, mid, fill = _interp_records_to_grid(records, horizon, grid)
    params = ModelParams(
        m0=float(mid[0]),
        q_total=q_total,
        horizon=horizon,
        tau_m=tau_m,
        tau_q=horizon / 1e6,  # placeholder; not used by any estimator below
        a=0.0,
        lam=0.0,
        sigma_m=0.0,
        sigma_q=0.0,
        spread=0.0,
        point_value=point_value,
    )
    path = RatePath(q=q, q_cum=cumulative_trapezoid(q, grid.dt))
    prices = PricePath(impact=np.zeros_like(mid), mid=mid, fill=fill)

    total, _ = naive_cost(path, prices, params, grid)
    delta = twap_slippage(path, prices, params, grid)
    weights = general_weights(path, params, grid)
    return OrderMetrics(
        cost_arrival=total,
        cost_to_twap=delta,
        impact_total=total_impact(prices),
        impact_weighted=weighted_impact(prices, weights),
        executed_qty=float(path.q_cum[-1]),
    )
