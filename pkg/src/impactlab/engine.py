"""Deterministic vectorized batch simulation.

Each path consumes two independent random sub-streams (rate leg, mid leg)
derived from (master_seed, path_index, leg), so a batch result depends only
on (master_seed, grid, n_paths) and never on block or thread scheduling.
Blocks have a fixed size and write into disjoint slices of preallocated
output arrays; aggregation uses exact summation (math.fsum) in path-index
order. Reruns are therefore byte-identical at any parallelism level.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from .model import (
    MID_LEG,
    RATE_LEG,
    ModelParams,
    SimGrid,
    conditioning_gain,
    impact_state_from_rates,
    rate_deviations_from_noise,
    substream,
    trapezoid_weights,
    var_total_quantity,
)

__all__ = ["PathMetrics", "simulate_batch", "simulate_rate_block", "resolve_threads",
           "fsum_mean", "fsum_std"]

BLOCK_SIZE = 1024  # fixed so floating-point reductions are schedule-independent
THREADS_ENV = "IMPACTLAB_THREADS"


@dataclass
class PathMetrics:
    """Per-path estimator values for a batch, in path-index order."""

    cost_arrival: np.ndarray
    cost_linear: np.ndarray
    cost_impact: np.ndarray
    cost_noise: np.ndarray
    cost_to_twap: np.ndarray
    impact_total: np.ndarray
    impact_weighted: np.ndarray
    executed_qty: np.ndarray

    @classmethod
    def empty(cls, n: int) -> "PathMetrics":
        return cls(**{f.name: np.empty(n) for f in fields(cls)})

    def columns(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def resolve_threads(requested: int | None = None) -> int:
    """Worker count: requested (default up to 4), capped by IMPACTLAB_THREADS."""
    threads = requested if requested is not None else min(4, os.cpu_count() or 1)
    cap = os.environ.get(THREADS_ENV)
    if cap is not None:
        threads = min(threads, max(1, int(cap)))
    return max(1, threads)


def fsum_mean(values: np.ndarray) -> float:
    return math.fsum(values) / values.size


def fsum_std(values: np.ndarray, mean: float | None = None) -> float:
    """Sample standard deviation (ddof=1) with exact accumulation."""
    if values.size < 2:
        return 0.0
    m = fsum_mean(values) if mean is None else mean
    return math.sqrt(math.fsum((values - m) ** 2) / (values.size - 1))


def _draw_block(master_seed: int, indices: np.ndarray, n_steps: int, leg: int, n_draws: int) -> np.ndarray:
    out = np.empty((indices.size, n_draws))
    for row, idx in enumerate(indices):
        out[row] = substream(master_seed, int(idx), leg).standard_normal(n_draws)
    return out


def simulate_rate_block(
    params: ModelParams, grid: SimGrid, indices: np.ndarray, master_seed: int, conditioned: bool = False
) -> np.ndarray:
    """Rate paths for the given path indices, rows in index order."""
    grid.check_horizon(params.horizon)
    z = _draw_block(master_seed, indices, grid.n_steps, RATE_LEG, grid.n_steps + 1)
    q = params.twap_rate + rate_deviations_from_noise(z, params, grid)
    if conditioned:
        if var_total_quantity(params) == 0.0:
            return q  # TWAP limit already executes the target exactly
        w = trapezoid_weights(grid)
        gain = conditioning_gain(params, grid)
        shortfall = params.q_total - q @ w
        q = q + shortfall[:, None] * gain[None, :]
    return q


def _block_metrics(
    params: ModelParams,
    grid: SimGrid,
    indices: np.ndarray,
    master_seed: int,
    conditioned: bool,
    out: PathMetrics,
    offset: int,
) -> None:
    dt = grid.dt
    w = trapezoid_weights(grid)
    pv = params.point_value
    spread_premium = params.a * params.spread * params.side

    q = simulate_rate_block(params, grid, indices, master_seed, conditioned)
    impact = params.lam * impact_state_from_rates(q, params.tau_m, dt)

    dw = _draw_block(master_seed, indices, grid.n_steps, MID_LEG, grid.n_steps) * math.sqrt(dt)
    noise = np.zeros((indices.size, grid.n_steps + 1))
    np.cumsum(dw, axis=1, out=noise[:, 1:])
    mid_exc = impact + params.sigma_m * noise  # mid - m0

    executed = q @ w
    linear = pv * spread_premium * executed
    impact_cost = pv * ((impact * q) @ w)
    noise_cost = pv * params.sigma_m * ((noise * q) @ w)
    total = pv * ((mid_exc + spread_premium) * q) @ w
    delta = total - pv * params.twap_rate * (mid_exc @ w)

    u = q - impact_state_from_rates(q, params.tau_m, dt) / params.tau_m
    u_mid = 0.5 * (u[:, :-1] + u[:, 1:])
    norm = np.sum(u_mid**2, axis=1) * dt
    nu = np.sqrt(params.horizon / norm)
    weighted = nu * np.sum(u_mid * np.diff(mid_exc, axis=1), axis=1)

    sl = slice(offset, offset + indices.size)
    out.cost_arrival[sl] = total
    out.cost_linear[sl] = linear
    out.cost_impact[sl] = impact_cost
    out.cost_noise[sl] = noise_cost
    out.cost_to_twap[sl] = delta
    out.impact_total[sl] = mid_exc[:, -1]
    out.impact_weighted[sl] = weighted
    out.executed_qty[sl] = executed


def simulate_batch(
    params: ModelParams,
    grid: SimGrid,
    n_paths: int | None = None,
    master_seed: int = 0,
    conditioned: bool = False,
    path_indices: np.ndarray | None = None,
    threads: int | None = None,
) -> PathMetrics:
    """Per-path metrics for paths 0..n_paths-1 (or an explicit index set)."""
    if path_indices is None:
        if n_paths is None or n_paths < 1:
            raise ValueError("n_paths must be at least 1")
        path_indices = np.arange(n_paths)
    path_indices = np.asarray(path_indices)
    out = PathMetrics.empty(path_indices.size)

    tasks = [
        (path_indices[start : start + BLOCK_SIZE], start)
        for start in range(0, path_indices.size, BLOCK_SIZE)
    ]
    workers = resolve_threads(threads)
    if workers == 1 or len(tasks) == 1:
        for block, offset in tasks:
            _block_metrics(params, grid, block, master_seed, conditioned, out, offset)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_block_metrics, params, grid, block, master_seed, conditioned, out, offset)
                for block, offset in tasks
            ]
            for f in futures:
                f.result()
    return out
