"""Intraday trading-rate and price dynamics.

The broker works an order of ``q_total`` contracts over ``[0, horizon]`` at a
stochastic rate q_t that mean-reverts around the TWAP rate q_total/horizon:

    dq_t = (1/tau_q) * (q_total/horizon - q_t) dt + (q_total/horizon) * sigma_q dW^q_t

The mid price carries transient impact that decays on the timescale tau_m,
plus an independent Brownian noise term:

    M_t = m0 + lambda * J_t + sigma_m * W^M_t,
    J_t = integral_0^t exp(-(t-s)/tau_m) q_s ds

Execution prices add a spread premium a*s in the direction of the order.

All simulation is exact-in-distribution on the grid: the rate uses the exact
OU transition, the impact state uses an exponentially decayed trapezoid
(second-order in dt), and terminal-quantity conditioning uses the exact linear
Gaussian correction.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import lfilter

__all__ = [
    "ModelParams",
    "SimGrid",
    "RatePath",
    "PricePath",
    "emini_params",
    "substream",
    "stationary_rate_moments",
    "var_total_quantity",
    "cov_rate_total_quantity",
    "simulate_rate_path",
    "condition_on_terminal",
    "propagate_impact",
    "simulate_mid_and_fills",
    "trapezoid_weights",
    "cumulative_trapezoid",
]

RATE_LEG = 0
MID_LEG = 1


@dataclass(frozen=True)
class ModelParams:
    """Market and broker constants for one order.

    Units: prices in points, quantities in contracts, times in minutes,
    ``point_value`` in dollars per point per contract.
    """

    m0: float            # arrival mid price (points)
    q_total: float       # target order size (contracts)
    horizon: float       # order duration T (minutes)
    tau_m: float         # impact decay timescale (minutes)
    tau_q: float         # rate-fluctuation timescale (minutes)
    a: float             # spread-capture fraction
    lam: float           # impact coefficient (points per contract)
    sigma_m: float       # mid volatility (points / sqrt(minute))
    sigma_q: float       # rate volatility (1 / sqrt(minute))
    spread: float        # bid-ask spread s (points)
    point_value: float   # dollars per point per contract

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.tau_m <= 0 or self.tau_q <= 0:
            raise ValueError("tau_m and tau_q must be positive")
        if self.spread < 0 or self.sigma_m < 0 or self.sigma_q < 0 or self.lam < 0:
            raise ValueError("spread, sigma_m, sigma_q and lam must be non-negative")
        if self.point_value <= 0:
            raise ValueError("point_value must be positive")
        if self.horizon <= 2.0 * (self.tau_m + self.tau_q):
            # The concentration-penalty correction to the expected impact cost
            # changes sign in this regime; moment formulas lose accuracy.
            warnings.warn(
                "horizon <= 2*(tau_m + tau_q): short-order regime, "
                "small-timescale moment expansions become unreliable",
                UserWarning,
                stacklevel=2,
            )

    @property
    def twap_rate(self) -> float:
        return self.q_total / self.horizon

    @property
    def side(self) -> float:
        """Direction of the order: +1 buy, -1 sell, 0 empty."""
        return float(np.sign(self.q_total))


def emini_params(**overrides) -> ModelParams:
    """Baseline parameter set, sized for working E-mini S&P futures orders.

    The mid volatility is normalized so that the unaffected price moves by
    50 points (1% of the arrival price) in one standard deviation over the
    order, i.e. sigma_m * sqrt(horizon) = 50.
    """
    defaults = dict(
        m0=5000.0,
        q_total=2000.0,
        horizon=390.0,
        tau_m=39.0,
        tau_q=5.0,
        a=0.5,
        lam=0.0075,
        sigma_m=50.0 / math.sqrt(390.0),
        sigma_q=0.5,
        spread=1.0,
        point_value=50.0,
    )
    defaults.update(overrides)
    return ModelParams(**defaults)


@dataclass(frozen=True)
class SimGrid:
    """Uniform time grid with n_steps intervals of width dt."""

    dt: float
    n_steps: int

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.n_steps < 2:
            raise ValueError("n_steps must be at least 2")

    @classmethod
    def from_horizon(cls, horizon: float, dt: float) -> "SimGrid":
        n_steps = int(round(horizon / dt))
        grid = cls(dt=dt, n_steps=n_steps)
        grid.check_horizon(horizon)
        return grid

    def check_horizon(self, horizon: float) -> None:
        if abs(self.n_steps * self.dt - horizon) > 1e-9 * horizon:
            raise ValueError(
                f"grid covers {self.n_steps * self.dt} minutes, expected {horizon}"
            )

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    @property
    def midpoints(self) -> np.ndarray:
        return (np.arange(self.n_steps) + 0.5) * self.dt


@dataclass
class RatePath:
    """Trading rate q and cumulative quantity on the grid nodes."""

    q: np.ndarray          # (n_steps+1,) contracts/minute
    q_cum: np.ndarray      # (n_steps+1,) contracts, trapezoidal integral of q
    conditioned: bool = False


@dataclass
class PricePath:
    """Impact state, mid price and execution price on the grid nodes."""

    impact: np.ndarray     # lambda * J_t (points), impact[0] = 0
    mid: np.ndarray        # M_t (points), mid[0] = m0
    fill: np.ndarray       # P_t (points)


def substream(master_seed: int, path_index: int, leg: int) -> np.random.Generator:
    """Independent random stream for one leg of one path.

    Streams are derived deterministically from (master_seed, path_index, leg)
    so batch results do not depend on how paths are scheduled across workers.
    """
    return np.random.default_rng([int(master_seed), int(path_index), int(leg)])


def trapezoid_weights(grid: SimGrid) -> np.ndarray:
    w = np.full(grid.n_steps + 1, grid.dt)
    w[0] = w[-1] = 0.5 * grid.dt
    return w


def cumulative_trapezoid(values: np.ndarray, dt: float) -> np.ndarray:
    """Running trapezoidal integral along the last axis, starting at 0."""
    inc = 0.5 * dt * (values[..., :-1] + values[..., 1:])
    out = np.zeros(values.shape)
    np.cumsum(inc, axis=-1, out=out[..., 1:])
    return out


def stationary_rate_moments(params: ModelParams) -> tuple[float, float]:
    """Mean and variance of the stationary trading rate.

    mean = q_total/horizon, variance = q_total^2 sigma_q^2 tau_q / (2 horizon^2).
    """
    mean = params.twap_rate
    variance = (params.q_total * params.sigma_q / params.horizon) ** 2 * params.tau_q / 2.0
    return mean, variance


def var_total_quantity(params: ModelParams) -> float:
    """Exact variance of the terminal executed quantity Q_T.

    Double integral of the stationary OU covariance:
    Var[Q_T] = Var[q] * 2 tau_q * (T - tau_q * (1 - exp(-T/tau_q))).
    """
    _, var_q = stationary_rate_moments(params)
    tq, T = params.tau_q, params.horizon
    return var_q * 2.0 * tq * (T - tq * (1.0 - math.exp(-T / tq)))


def cov_rate_total_quantity(t, params: ModelParams):
    """Covariance of the rate at time t with the terminal quantity Q_T.

    Cov[q_t, Q_T] = Var[q] * tau_q * (2 - exp(-t/tau_q) - exp(-(T-t)/tau_q)).
    Symmetric about T/2; integrates to Var[Q_T] over [0, T].
    """
    t_arr = np.asarray(t, dtype=float)
    T = params.horizon
    if np.any(t_arr < 0.0) or np.any(t_arr > T):
        raise ValueError("t must lie in [0, horizon]")
    _, var_q = stationary_rate_moments(params)
    tq = params.tau_q
    out = var_q * tq * (2.0 - np.exp(-t_arr / tq) - np.exp(-(T - t_arr) / tq))
    return float(out) if np.isscalar(t) else out


def ou_step_coefficients(params: ModelParams, dt: float) -> tuple[float, float]:
    """(decay, innovation sd) of the exact one-step OU transition.

    q_{t+dt} | q_t is Gaussian with mean m + (q_t - m) * decay and variance
    Var[q] * (1 - decay^2), where decay = exp(-dt/tau_q).
    """
    _, var_q = stationary_rate_moments(params)
    decay = math.exp(-dt / params.tau_q)
    step_sd = math.sqrt(var_q * (1.0 - decay * decay))
    return decay, step_sd


def rate_deviations_from_noise(z: np.ndarray, params: ModelParams, grid: SimGrid) -> np.ndarray:
    """Stationary AR(1) deviations from the TWAP rate, driven by unit normals.

    z[..., 0] seeds the stationary draw, z[..., 1:] the exact OU innovations.
    Shared by the single-path simulator and the batch engine so both produce
    identical paths from identical streams.
    """
    _, var_q = stationary_rate_moments(params)
    decay, step_sd = ou_step_coefficients(params, grid.dt)
    x = np.empty_like(z)
    x[..., 0] = math.sqrt(var_q) * z[..., 0]
    x[..., 1:] = step_sd * z[..., 1:]
    return lfilter([1.0], [1.0, -decay], x, axis=-1)


def simulate_rate_path(params: ModelParams, grid: SimGrid, rng: np.random.Generator) -> RatePath:
    """Draw one stationary rate path with the exact OU transition per step."""
    grid.check_horizon(params.horizon)
    z = rng.standard_normal(grid.n_steps + 1)
    q = params.twap_rate + rate_deviations_from_noise(z, params, grid)
    return RatePath(q=q, q_cum=cumulative_trapezoid(q, grid.dt), conditioned=False)


def conditioning_gain(params: ModelParams, grid: SimGrid) -> np.ndarray:
    """Per-node gain of the terminal-quantity correction.

    The raw gain Cov[q_t, Q_T]/Var[Q_T] is normalized so that its trapezoidal
    integral over the grid is exactly 1, which makes the corrected cumulative
    quantity hit q_total to rounding error by construction.
    """
    gain = cov_rate_total_quantity(grid.times, params) / var_total_quantity(params)
    gain /= float(np.dot(gain, trapezoid_weights(grid)))
    return gain


def condition_on_terminal(path: RatePath, params: ModelParams, grid: SimGrid) -> RatePath:
    """Condition a rate path on the terminal quantity hitting q_total exactly.

    (q_t, Q_T) is jointly Gaussian, so the conditional law is obtained by the
    exact linear correction q_t + gain(t) * (q_total - Q_T). Applying the
    operation to an already conditioned path returns it unchanged.
    """
    if path.conditioned:
        return path
    grid.check_horizon(params.horizon)
    shortfall = params.q_total - path.q_cum[-1]
    if var_total_quantity(params) == 0.0:
        if abs(shortfall) <= 1e-6 * abs(params.q_total):
            return replace(path, conditioned=True)
        raise ValueError("degenerate conditioning: sigma_q = 0 and terminal quantity misses target")
    q = path.q + conditioning_gain(params, grid) * shortfall
    return RatePath(q=q, q_cum=cumulative_trapezoid(q, grid.dt), conditioned=True)


def impact_state_from_rates(q: np.ndarray, tau_m: float, dt: float) -> np.ndarray:
    """Decayed impact memory J_t = integral exp(-(t-s)/tau_m) q_s ds.

    Exponentially decayed trapezoid: J_{i+1} = b*J_i + dt/2 * (b*q_i + q_{i+1})
    with b = exp(-dt/tau_m); second-order accurate in dt.
    """
    decay = math.exp(-dt / tau_m)
    drive = 0.5 * dt * (decay * q[..., :-1] + q[..., 1:])
    out = np.zeros(q.shape)
    out[..., 1:] = lfilter([1.0], [1.0, -decay], drive, axis=-1)
    return out


def propagate_impact(path: RatePath, params: ModelParams, grid: SimGrid) -> np.ndarray:
    """Transient price impact lambda * J_t along the path (points)."""
    grid.check_horizon(params.horizon)
    if path.q.shape[-1] != grid.n_steps + 1:
        raise ValueError("rate path does not match grid")
    return params.lam * impact_state_from_rates(path.q, params.tau_m, grid.dt)


def simulate_mid_and_fills(
    path: RatePath,
    impact: np.ndarray,
    params: ModelParams,
    grid: SimGrid,
    rng: np.random.Generator,
) -> PricePath:
    """Overlay Brownian mid noise on the impact and attach execution prices.

    The mid noise is independent of the rate path. Fills carry the spread
    premium a*s in the direction of the order; instants with zero rate carry
    no spread cost in any quantity-weighted integral.
    """
    if impact.shape != path.q.shape or impact.shape[-1] != grid.n_steps + 1:
        raise ValueError("impact sequence does not match path/grid")
    dw = rng.standard_normal(grid.n_steps) * math.sqrt(grid.dt)
    noise = np.zeros(grid.n_steps + 1)
    np.cumsum(dw, out=noise[1:])
    mid = params.m0 + impact + params.sigma_m * noise
    fill = mid + params.a * params.spread * params.side
    return PricePath(impact=impact, mid=mid, fill=fill)
