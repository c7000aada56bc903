"""Command-line interface.

Subcommands::

    analytic   closed-form moment reports, no simulation
    batch      Monte Carlo batch of orders -> batch_report.json
    table2     analytic-vs-simulation comparison -> table2.csv / table2.json
    sweep      SNR sweep over timescale factors -> snr_sweep.csv
    paths      sample cumulative-quantity trajectories -> CSV per mode
    regress    varied-size regression study -> regression_report.json
    tca        estimators from broker fill records -> tca_metrics.json

Configuration is a JSON file (``--config``) with keys matching
ExperimentConfig; ``--seed``, ``--paths``, ``--conditioned`` and ``--out``
override individual fields. Exit codes: 0 success, 2 configuration error,
1 I/O failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .experiments import (
    ExperimentConfig,
    config_from_dict,
    export_paths,
    regression_study,
    run_batch,
    snr_sweep,
    sweep_csv,
    table2_csv,
    table2_report,
)
from .formulas import cost_moments, impact_moments
from .metrics import metrics_from_records, read_fill_records

__all__ = ["run_cli", "main"]


class ConfigError(Exception):
    pass


def _load_config(args: argparse.Namespace) -> ExperimentConfig:
    raw: dict = {}
    if args.config is not None:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed config JSON: {exc}") from exc
    try:
        config = config_from_dict(raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc

    overrides: dict = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.paths is not None:
        overrides["n_paths"] = args.paths
    if args.conditioned:
        overrides["conditioned"] = True
    if args.out is not None:
        overrides["output_dir"] = Path(args.out)
    try:
        return dataclasses.replace(config, **overrides) if overrides else config
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _write(directory: Path, name: str, text: str) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    target = directory / name
    target.write_text(text)
    return target


def _cmd_analytic(config: ExperimentConfig, args) -> int:
    report = {
        "cost_moments": dataclasses.asdict(cost_moments(config.params)),
        "impact_moments": dataclasses.asdict(impact_moments(config.params)),
    }
    print(json.dumps(report, sort_keys=True, indent=2))
    return 0


def _cmd_batch(config: ExperimentConfig, args) -> int:
    report = run_batch(config)
    path = _write(config.output_dir, "batch_report.json", report.to_json() + "\n")
    print(f"wrote {path}")
    return 0


def _cmd_table2(config: ExperimentConfig, args) -> int:
    report = table2_report(config)
    json_path = _write(
        config.output_dir, "table2.json", json.dumps(report, sort_keys=True, indent=2) + "\n"
    )
    csv_path = _write(config.output_dir, "table2.csv", table2_csv(report))
    for flag in report["paper_discrepancies"]:
        published = ", ".join(
            f"{k.removeprefix('published_')}={v}" for k, v in flag.items() if k.startswith("published_")
        )
        print(f"note [{flag['metric']}]: measured {flag['measured']:.3f}, published {published}", file=sys.stderr)
    print(f"wrote {json_path} and {csv_path}")
    return 0


def _cmd_sweep(config: ExperimentConfig, args) -> int:
    rows = snr_sweep(config)
    path = _write(config.output_dir, "snr_sweep.csv", sweep_csv(rows))
    print(f"wrote {path}")
    return 0


def _cmd_paths(config: ExperimentConfig, args) -> int:
    exports = export_paths(config, n_samples=args.samples)
    written = [
        _write(config.output_dir, f"paths_{mode}.csv", text) for mode, text in exports.items()
    ]
    print("wrote " + " and ".join(str(p) for p in written))
    return 0


def _cmd_regress(config: ExperimentConfig, args) -> int:
    study = regression_study(config, response=args.response)
    path = _write(
        config.output_dir, "regression_report.json", json.dumps(study, sort_keys=True, indent=2) + "\n"
    )
    print(f"wrote {path}")
    return 0


def _cmd_tca(config: ExperimentConfig, args) -> int:
    input_path = Path(args.input)
    if not input_path.exists():
        raise ConfigError(f"fill-record file not found: {input_path}")
    try:
        records = read_fill_records(input_path)
        metrics = metrics_from_records(
            records,
            q_total=config.params.q_total,
            horizon=config.params.horizon,
            tau_m=config.params.tau_m,
            point_value=config.params.point_value,
            grid=config.grid,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    path = _write(
        config.output_dir,
        "tca_metrics.json",
        json.dumps(dataclasses.asdict(metrics), sort_keys=True, indent=2) + "\n",
    )
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="impactlab", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    handlers = {
        "analytic": _cmd_analytic,
        "batch": _cmd_batch,
        "table2": _cmd_table2,
        "sweep": _cmd_sweep,
        "paths": _cmd_paths,
        "regress": _cmd_regress,
        "tca": _cmd_tca,
    }
    for name, handler in handlers.items():
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="override master_seed")
        p.add_argument("--paths", type=int, help="override n_paths")
        p.add_argument("--conditioned", action="store_true", help="condition on exact execution")
        p.add_argument("--out", help="override output_dir")
        p.set_defaults(handler=handler)
    sub.choices["paths"].add_argument("--samples", type=int, default=20)
    sub.choices["regress"].add_argument(
        "--response", choices=["cost_arrival", "cost_to_twap"], default="cost_arrival"
    )
    sub.choices["tca"].add_argument("--input", required=True, help="fill-record CSV, one order")
    return parser


def run_cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        config = _load_config(args)
        return args.handler(config, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli())
