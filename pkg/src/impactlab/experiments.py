"""Config-driven Monte Carlo experiments and reports.

Everything here is deterministic given (config, master_seed): batches use
per-path random streams, summaries use exact summation in path-index order,
and serializers emit sorted-key JSON and plain CSV so reruns are
byte-identical at any parallelism level.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import formulas
from .engine import PathMetrics, fsum_mean, fsum_std, simulate_batch, simulate_rate_block
from .formulas import cost_moments, impact_moments, regression_design_coeffs, tstat
from .model import ModelParams, SimGrid, emini_params, trapezoid_weights
from .regression import RegressionFit, ols_fit, recover_params

__all__ = [
    "ExperimentConfig",
    "MetricSummary",
    "BatchReport",
    "config_from_dict",
    "run_batch",
    "table2_report",
    "snr_sweep",
    "export_paths",
    "snr_study",
    "regression_study",
    "TSTAT_QUOTE_N",
]

TSTAT_QUOTE_N = 1000  # reports quote t-statistics at a 1000-order sample
DEFAULT_SWEEP = (0.25, 0.5, 1.0, 2.0, 4.0)

#: Published reference values that internal checks show to be inconsistent;
#: reports surface the measured value next to them instead of targeting either.
PUBLISHED_COND_LINEAR_TSTAT_TEXT = 7.42
PUBLISHED_COND_LINEAR_TSTAT_TABLE = 6.36
PUBLISHED_SD_WEIGHTED_MC = 47.435


@dataclass(frozen=True)
class ExperimentConfig:
    params: ModelParams = field(default_factory=emini_params)
    grid: SimGrid = field(default_factory=lambda: SimGrid.from_horizon(390.0, 0.1))
    n_paths: int = 10_000
    master_seed: int = 0
    conditioned: bool = False
    sweep: tuple[float, ...] = DEFAULT_SWEEP
    q_grid: tuple[float, ...] = (1000.0, 2000.0, 3000.0, 4000.0)
    output_dir: Path = Path("impactlab-out")

    def __post_init__(self):
        self.grid.check_horizon(self.params.horizon)
        if self.n_paths < 1:
            raise ValueError("n_paths must be at least 1")
        if any(f <= 0 for f in self.sweep):
            raise ValueError("sweep factors must be positive")
        if any(q <= 0 for q in self.q_grid):
            raise ValueError("q_grid entries must be positive")


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Build a config from parsed JSON; unknown keys are rejected."""
    if not isinstance(raw, dict):
        raise ValueError("config must be a JSON object")
    known = {"params", "grid", "n_paths", "master_seed", "conditioned", "sweep", "q_grid", "output_dir"}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")

    kwargs: dict = {}
    if "params" in raw:
        pdict = dict(raw["params"])
        if "lambda" in pdict:  # JSON-friendly alias for the keyword-clashing field
            pdict["lam"] = pdict.pop("lambda")
        kwargs["params"] = emini_params(**pdict)
    params = kwargs.get("params", emini_params())

    gdict = dict(raw.get("grid", {}))
    dt = float(gdict.pop("dt", 0.1))
    n_steps = gdict.pop("n_steps", None)
    if gdict:
        raise ValueError(f"unknown grid keys: {sorted(gdict)}")
    grid = SimGrid(dt=dt, n_steps=int(n_steps)) if n_steps is not None else SimGrid.from_horizon(params.horizon, dt)
    kwargs["grid"] = grid

    for key in ("n_paths", "master_seed"):
        if key in raw:
            kwargs[key] = int(raw[key])
    if "conditioned" in raw:
        kwargs["conditioned"] = bool(raw["conditioned"])
    if "sweep" in raw:
        kwargs["sweep"] = tuple(float(f) for f in raw["sweep"])
    if "q_grid" in raw:
        kwargs["q_grid"] = tuple(float(q) for q in raw["q_grid"])
    if "output_dir" in raw:
        kwargs["output_dir"] = Path(raw["output_dir"])
    return ExperimentConfig(**kwargs)


@dataclass(frozen=True)
class MetricSummary:
    """Sample statistics of one per-order metric, with analytic counterparts."""

    mean: float
    sd: float
    se: float                 # sd / sqrt(n_paths)
    tstat_n1000: float
    analytic_mean_leading: Optional[float] = None
    analytic_mean_full: Optional[float] = None
    analytic_sd_leading: Optional[float] = None
    analytic_sd_full: Optional[float] = None


@dataclass(frozen=True)
class BatchReport:
    n_paths: int
    seed: int
    conditioned: bool
    metrics: dict[str, MetricSummary]

    def to_dict(self) -> dict:
        return {
            "n_paths": self.n_paths,
            "seed": self.seed,
            "conditioned": self.conditioned,
            "metrics": {k: dataclasses.asdict(v) for k, v in self.metrics.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _summarize(values: np.ndarray, pairing: dict | None = None) -> MetricSummary:
    mean = fsum_mean(values)
    sd = fsum_std(values, mean)
    return MetricSummary(
        mean=mean,
        sd=sd,
        se=sd / math.sqrt(values.size),
        tstat_n1000=tstat(mean, sd, TSTAT_QUOTE_N) if sd > 0 else math.inf,
        **(pairing or {}),
    )


def _analytic_pairings(params: ModelParams) -> dict[str, dict]:
    cm = cost_moments(params)
    im = impact_moments(params)
    return {
        "cost_arrival": dict(
            analytic_mean_leading=cm.e_linear + cm.e_impact_leading,
            analytic_mean_full=cm.e_total,
            analytic_sd_leading=cm.sd_cost_twap,
            analytic_sd_full=cm.sd_cost_full,
        ),
        "cost_linear": dict(analytic_mean_full=cm.e_linear),
        "cost_impact": dict(
            analytic_mean_leading=cm.e_impact_leading, analytic_mean_full=cm.e_impact_full
        ),
        "cost_noise": dict(analytic_mean_full=0.0),
        "cost_to_twap": dict(
            analytic_mean_leading=cm.e_delta_leading,
            analytic_mean_full=cm.e_delta_full,
            analytic_sd_leading=formulas.delta_noise_sd(params),
            analytic_sd_full=cm.sd_delta_full,
        ),
        "impact_total": dict(
            analytic_mean_full=im.e_total_impact,
            analytic_sd_leading=params.sigma_m * math.sqrt(params.horizon),
            analytic_sd_full=im.sd_total_impact,
        ),
        "impact_weighted": dict(
            analytic_mean_leading=formulas.weighted_impact_leading(params),
            analytic_mean_full=im.e_weighted_general,
            analytic_sd_full=im.sd_weighted,
        ),
        "executed_qty": dict(
            analytic_mean_full=params.q_total, analytic_sd_full=math.sqrt(cm.var_qt)
        ),
    }


def summarize_metrics(metrics: PathMetrics, params: ModelParams) -> dict[str, MetricSummary]:
    pairings = _analytic_pairings(params)
    return {name: _summarize(col, pairings.get(name)) for name, col in metrics.columns().items()}


def run_batch(config: ExperimentConfig, threads: int | None = None) -> BatchReport:
    """Simulate n_paths orders and aggregate all estimators."""
    metrics = simulate_batch(
        config.params,
        config.grid,
        n_paths=config.n_paths,
        master_seed=config.master_seed,
        conditioned=config.conditioned,
        threads=threads,
    )
    return BatchReport(
        n_paths=config.n_paths,
        seed=config.master_seed,
        conditioned=config.conditioned,
        metrics=summarize_metrics(metrics, config.params),
    )


TABLE_ROWS = (
    # label, metric key, statistic
    ("E[C_linear]", "cost_linear", "mean"),
    ("E[C_impact]", "cost_impact", "mean"),
    ("E[dC_T]", "cost_to_twap", "mean"),
    ("sd[C_T]", "cost_arrival", "sd"),
    ("sd[dC_T]", "cost_to_twap", "sd"),
    ("E[I]", "impact_total", "mean"),
    ("sd[I]", "impact_total", "sd"),
    ("E[I_pi]", "impact_weighted", "mean"),
    ("sd[I_pi]", "impact_weighted", "sd"),
)


def table2_report(config: ExperimentConfig, threads: int | None = None) -> dict:
    """Analytic-vs-simulation comparison table, run in both conditioning modes."""
    uncond = run_batch(dataclasses.replace(config, conditioned=False), threads)
    cond = run_batch(dataclasses.replace(config, conditioned=True), threads)

    rows = {}
    for label, key, stat in TABLE_ROWS:
        mu, mc = uncond.metrics[key], cond.metrics[key]
        analytic_leading = getattr(mu, f"analytic_{stat}_leading")
        analytic_full = getattr(mu, f"analytic_{stat}_full")
        val_u, val_c = getattr(mu, stat), getattr(mc, stat)
        se_u, se_c = mu.se, mc.se
        rows[label] = {
            "analytic_leading": analytic_leading,
            "analytic_full": analytic_full,
            "mc_unconditional": val_u,
            "mc_conditional": val_c,
            "se_unconditional": se_u,
            "se_conditional": se_c,
            "rel_dev_unconditional": (val_u - analytic_full) / analytic_full if analytic_full else None,
            "rel_dev_conditional": (val_c - analytic_full) / analytic_full if analytic_full else None,
        }

    cond_linear_t = tstat(
        cond.metrics["cost_linear"].mean, cond.metrics["cost_to_twap"].sd, TSTAT_QUOTE_N
    )
    discrepancies = [
        {
            "metric": "conditional_linear_cost_tstat_n1000",
            "measured": cond_linear_t,
            "published_text_value": PUBLISHED_COND_LINEAR_TSTAT_TEXT,
            "published_table_implied_value": PUBLISHED_COND_LINEAR_TSTAT_TABLE,
            "note": (
                "Published text and results table imply different conditional "
                "t-statistics for the linear cost (the text value matches using the "
                "mean TWAP slippage as numerator instead of the linear cost). "
                "The measured value is reported unmodified."
            ),
        },
        {
            "metric": "sd_impact_weighted",
            "measured": uncond.metrics["impact_weighted"].sd,
            "published_mc_value": PUBLISHED_SD_WEIGHTED_MC,
            "published_analytic_value": uncond.metrics["impact_weighted"].analytic_sd_full,
            "note": (
                "The published simulation reports sd[I_pi] about 5% below its own "
                "analytic value sigma_m*sqrt(T). With weights normalized to "
                "sum pi^2 dt = T per order, the market-noise contribution to "
                "Var[I_pi] is exactly sigma_m^2*T, so sd[I_pi] >= sigma_m*sqrt(T); "
                "the published cells are instead consistent with a constant "
                "normalizer taken from the closed-form mean-square weight, which "
                "overstates the realized one by ~10%. The measured value is "
                "reported unmodified."
            ),
        },
    ]
    return {
        "rows": rows,
        "unconditional": uncond.to_dict(),
        "conditional": cond.to_dict(),
        "paper_discrepancies": discrepancies,
    }


def table2_csv(report: dict) -> str:
    cols = [
        "row",
        "analytic_leading",
        "analytic_full",
        "mc_unconditional",
        "mc_conditional",
        "se_unconditional",
        "se_conditional",
        "rel_dev_unconditional",
        "rel_dev_conditional",
    ]
    lines = [",".join(cols)]
    for label, row in report["rows"].items():
        cells = [label] + ["" if row[c] is None else repr(row[c]) for c in cols[1:]]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def _snr_cells(report: BatchReport, params: ModelParams) -> dict[str, float]:
    m = report.metrics
    cm = cost_moments(params)
    im = impact_moments(params)
    return {
        "snr_linear_naive": m["cost_linear"].mean / m["cost_arrival"].sd,
        "snr_linear_enhanced": m["cost_linear"].mean / m["cost_to_twap"].sd,
        "snr_slippage_enhanced": m["cost_to_twap"].mean / m["cost_to_twap"].sd,
        "snr_impact_naive": m["impact_total"].mean / m["impact_total"].sd,
        "snr_impact_weighted": m["impact_weighted"].mean / m["impact_weighted"].sd,
        "analytic_snr_linear_naive": cm.e_linear / cm.sd_cost_full,
        "analytic_snr_linear_enhanced": cm.e_linear / cm.sd_delta_full,
        "analytic_snr_slippage_enhanced": cm.e_delta_full / cm.sd_delta_full,
        "analytic_snr_impact_naive": im.e_total_impact / im.sd_total_impact,
        "analytic_snr_impact_weighted": im.e_weighted_general / im.sd_weighted,
    }


def snr_sweep(config: ExperimentConfig, threads: int | None = None) -> list[dict]:
    """Signal-to-noise of each estimator as (tau_m, tau_q) scale in tandem."""
    if not config.sweep:
        raise ValueError("sweep factor list is empty")
    rows = []
    for factor in config.sweep:
        params = dataclasses.replace(
            config.params, tau_m=factor * config.params.tau_m, tau_q=factor * config.params.tau_q
        )
        report = run_batch(dataclasses.replace(config, params=params), threads)
        rows.append({"factor": factor, **_snr_cells(report, params)})
    return rows


def sweep_csv(rows: list[dict]) -> str:
    cols = list(rows[0].keys())
    lines = [",".join(cols)]
    for row in rows:
        lines.append(",".join(repr(row[c]) for c in cols))
    return "\n".join(lines) + "\n"


def export_paths(config: ExperimentConfig, n_samples: int, threads: int | None = None) -> dict[str, str]:
    """CSV exports of sampled cumulative-quantity trajectories, both modes."""
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    out = {}
    indices = np.arange(n_samples)
    times = config.grid.times
    for mode, conditioned in (("unconditional", False), ("conditional", True)):
        q = simulate_rate_block(config.params, config.grid, indices, config.master_seed, conditioned)
        inc = 0.5 * config.grid.dt * (q[:, :-1] + q[:, 1:])
        q_cum = np.zeros_like(q)
        np.cumsum(inc, axis=1, out=q_cum[:, 1:])
        header = ",".join(["time_min"] + [f"sample_{i}" for i in range(n_samples)])
        lines = [header]
        for j, t in enumerate(times):
            lines.append(",".join([repr(float(t))] + [repr(float(q_cum[i, j])) for i in range(n_samples)]))
        out[mode] = "\n".join(lines) + "\n"
    return out


def snr_study(
    params: ModelParams,
    grid: SimGrid,
    n_replications: int = 20,
    paths_per_replication: int = 20_000,
    base_seed: int = 0,
    threads: int | None = None,
) -> dict:
    """Replicated measurement of the t-statistic gain of the enhanced estimators.

    Each replication simulates an independent batch and quotes t-statistics at
    1000 orders from its sample moments. Both linear-cost t-statistics share
    the measured spread-cost mean as numerator (naive over sd[C_T], enhanced
    over sd[dC_T]); the impact pair uses each estimator's own mean. Ratios are
    taken between across-replication mean t-statistics: per-replication ratios
    would be dominated by the near-zero denominator of the naive impact
    t-statistic.
    """
    t_lin_naive, t_lin_enh, t_imp_naive, t_imp_enh = [], [], [], []
    for rep in range(n_replications):
        config = ExperimentConfig(
            params=params,
            grid=grid,
            n_paths=paths_per_replication,
            master_seed=base_seed + rep,
            conditioned=False,
        )
        m = run_batch(config, threads).metrics
        t_lin_naive.append(tstat(m["cost_linear"].mean, m["cost_arrival"].sd, TSTAT_QUOTE_N))
        t_lin_enh.append(tstat(m["cost_linear"].mean, m["cost_to_twap"].sd, TSTAT_QUOTE_N))
        t_imp_naive.append(tstat(m["impact_total"].mean, m["impact_total"].sd, TSTAT_QUOTE_N))
        t_imp_enh.append(tstat(m["impact_weighted"].mean, m["impact_weighted"].sd, TSTAT_QUOTE_N))

    mean = lambda xs: math.fsum(xs) / len(xs)
    return {
        "n_replications": n_replications,
        "paths_per_replication": paths_per_replication,
        "tstat_n": TSTAT_QUOTE_N,
        "t_linear_naive": mean(t_lin_naive),
        "t_linear_enhanced": mean(t_lin_enh),
        "linear_tstat_ratio": mean(t_lin_enh) / mean(t_lin_naive),
        "t_impact_naive": mean(t_imp_naive),
        "t_impact_enhanced": mean(t_imp_enh),
        "impact_tstat_ratio": mean(t_imp_enh) / mean(t_imp_naive),
        "replications": {
            "t_linear_naive": t_lin_naive,
            "t_linear_enhanced": t_lin_enh,
            "t_impact_naive": t_imp_naive,
            "t_impact_enhanced": t_imp_enh,
        },
    }


def regression_study(
    config: ExperimentConfig,
    response: str = "cost_arrival",
    threads: int | None = None,
) -> dict:
    """Varied-size regression of per-contract slippage on order size.

    Order i gets size q_grid[i mod len(q_grid)]; the per-path random streams
    are keyed by path index, so the assignment does not affect reproducibility.
    Recovers (a, lambda) through the design coefficients scaled to dollars.
    """
    if response not in ("cost_arrival", "cost_to_twap"):
        raise ValueError("response must be cost_arrival or cost_to_twap")
    q_grid = config.q_grid
    sizes = np.array([q_grid[i % len(q_grid)] for i in range(config.n_paths)])
    y = np.empty(config.n_paths)
    for q_value in sorted(set(q_grid)):
        idx = np.nonzero(sizes == q_value)[0]
        if idx.size == 0:
            continue
        params = dataclasses.replace(config.params, q_total=q_value)
        metrics = simulate_batch(
            params,
            config.grid,
            master_seed=config.master_seed,
            conditioned=config.conditioned,
            path_indices=idx,
            threads=threads,
        )
        y[idx] = getattr(metrics, response)
    y = y / sizes

    fit = ols_fit(sizes, y)
    phi1, phi2 = regression_design_coeffs(config.params)
    pv = config.params.point_value
    a_hat, lam_hat, a_se, lam_se = recover_params(fit, (phi1 * pv, phi2 * pv))
    return {
        "response": response,
        "n_orders": config.n_paths,
        "q_grid": list(q_grid),
        "fit": dataclasses.asdict(fit),
        "a_hat": a_hat,
        "a_se": a_se,
        "lambda_hat": lam_hat,
        "lambda_se": lam_se,
    }
