"""Command-line interface: simulate, sweep, analyze, wta.

Each command resolves its configuration from defaults, an optional JSON
config file, and flags (highest precedence), writes its outputs into
--out-dir, and drops a manifest.json recording everything needed to
reproduce them. Exit codes: 0 success, 2 validation problem, 3 data
problem, 4 I/O problem.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .analytics import relative_loss_parts, write_reports
from .core import (
    DEFAULT_PARAMS,
    PARAM_NAMES,
    DecisionMode,
    ModelParams,
    PairingRule,
    SimConfig,
    SuccessSpec,
    WealthSpec,
)
from .engine import run
from .errors import DataError, MandateSimError, ValidationError
from .sweep import GridSpec, load_dataset, run_sweep
from .wta import (
    bootstrap_crossover,
    crossover_price,
    fit_logistic,
    format_crossover,
    read_observations_csv,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_DATA = 3
EXIT_IO = 4

SERIES_COLUMNS = ("iteration", "total_assets", "alive", "stolen")

_CONFIG_KEYS = {
    "seed",
    "defenders",
    "epsilon",
    "delta",
    "max_iterations",
    "pairing",
    "mode",
    "wealth",
    "success",
    "params",
    "grid",
}


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ValidationError(f"config file {path} must hold a JSON object")
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise ValidationError(f"config file {path} has unknown keys: {sorted(unknown)}")
    return data


def _pick(flag, file_value, default):
    if flag is not None:
        return flag
    if file_value is not None:
        return file_value
    return default


def _resolve_sim_config(args, file_cfg: dict) -> SimConfig:
    wealth_cfg = file_cfg.get("wealth") or {}
    success_cfg = file_cfg.get("success") or {}
    try:
        pairing = PairingRule(_pick(args.pairing, file_cfg.get("pairing"), "random"))
        mode = DecisionMode(_pick(args.mode, file_cfg.get("mode"), "rational"))
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    return SimConfig(
        n_defenders=_pick(args.defenders, file_cfg.get("defenders"), 200),
        seed=_pick(getattr(args, "seed", None), file_cfg.get("seed"), 0),
        epsilon=_pick(args.epsilon, file_cfg.get("epsilon"), 100.0),
        delta=_pick(args.delta, file_cfg.get("delta"), 50),
        max_iterations=_pick(args.max_iters, file_cfg.get("max_iterations"), 10_000),
        pairing=pairing,
        decision_mode=mode,
        wealth=WealthSpec(**wealth_cfg),
        success=SuccessSpec(**success_cfg),
    )


def _resolve_params(args, file_cfg: dict) -> ModelParams:
    file_params = file_cfg.get("params") or {}
    unknown = set(file_params) - set(PARAM_NAMES)
    if unknown:
        raise ValidationError(f"config params has unknown keys: {sorted(unknown)}")
    values = {
        name: _pick(getattr(args, name), file_params.get(name), getattr(DEFAULT_PARAMS, name))
        for name in PARAM_NAMES
    }
    return ModelParams(**values)


def _config_json(config: SimConfig) -> dict:
    return {
        "n_defenders": config.n_defenders,
        "seed": config.seed,
        "epsilon": config.epsilon,
        "delta": config.delta,
        "max_iterations": config.max_iterations,
        "pairing": config.pairing.value,
        "decision_mode": config.decision_mode.value,
        "wealth": {"log_mean": config.wealth.log_mean, "log_sd": config.wealth.log_sd},
        "success": {"mean": config.success.mean, "sd": config.success.sd},
    }


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_manifest(
    out_dir: Path,
    command: str,
    started: float,
    outputs: list[Path],
    detail: dict,
) -> Path:
    manifest = {
        "schema_version": 1,
        "tool": {"name": "mandatesim", "version": __version__},
        "command": command,
        "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "duration_seconds": round(time.perf_counter() - started, 3),
        "outputs": sorted(p.name for p in outputs),
    }
    manifest.update(detail)
    path = out_dir / "manifest.json"
    _write_json(path, manifest)
    return path


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    started = time.perf_counter()
    file_cfg = _load_config_file(args.config)
    config = _resolve_sim_config(args, file_cfg)
    params = _resolve_params(args, file_cfg)
    out = _out_dir(args)

    result = run(params, config)
    outputs = []

    result_path = out / "result.json"
    _write_json(
        result_path,
        {
            "schema_version": 1,
            "outcome": result.outcome.value,
            "iterations": result.iterations,
            "initial_total": result.initial_total,
            "mandate_spend": result.mandate_spend,
            "total_stolen": result.total_stolen,
            "total_punished": math.fsum(r.punished_this_iter for r in result.series),
            "relative_loss": relative_loss_parts(
                params.investment, result.total_stolen, result.initial_total
            ),
            "final_defender_assets": result.series[-1].total_defender_assets,
            "alive_defenders": result.series[-1].alive_defenders,
            "params": params.as_dict(),
            "seed": config.seed,
        },
    )
    outputs.append(result_path)

    series_path = out / "series.csv"
    with open(series_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SERIES_COLUMNS)
        for rec in result.series:
            writer.writerow(
                [rec.iteration, rec.total_defender_assets, rec.alive_defenders, rec.stolen_this_iter]
            )
    outputs.append(series_path)

    if not args.no_figures:
        from . import plots

        outputs.append(plots.plot_series(result.series, out / "series.png"))

    outputs.append(
        _write_manifest(
            out,
            "simulate",
            started,
            outputs,
            {"seed": config.seed, "config": _config_json(config), "params": params.as_dict()},
        )
    )
    print(f"simulate: {result.outcome.value} after {result.iterations} iterations -> {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    started = time.perf_counter()
    file_cfg = _load_config_file(args.config)
    config = _resolve_sim_config(args, file_cfg)
    file_grid = file_cfg.get("grid") or {}
    unknown = set(file_grid) - {"step", "repetitions"}
    if unknown:
        raise ValidationError(f"config grid has unknown keys: {sorted(unknown)}")
    step = _pick(args.grid_step, file_grid.get("step"), 0.25)
    reps = _pick(args.reps, file_grid.get("repetitions"), 3)
    grid = GridSpec.from_step(step, repetitions=reps, base_seed=config.seed)
    out = _out_dir(args)

    dataset_path = out / "dataset.jsonl"
    run_sweep(
        grid,
        config,
        parallelism=args.parallelism,
        out_path=dataset_path,
        resume=args.resume,
        progress=args.progress,
    )
    outputs = [dataset_path, dataset_path.with_suffix(".csv")]
    outputs.append(
        _write_manifest(
            out,
            "sweep",
            started,
            outputs,
            {
                "seed": config.seed,
                "config": _config_json(config),
                "grid": {
                    "step": step,
                    "repetitions": reps,
                    "base_seed": grid.base_seed,
                    "cells": grid.size,
                },
                "parallelism": args.parallelism,
            },
        )
    )
    print(f"sweep: {grid.size} cells x {reps} repetitions -> {dataset_path}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    started = time.perf_counter()
    dataset_path = Path(args.dataset)
    dataset = load_dataset(dataset_path)
    out = _out_dir(args)
    outputs = write_reports(dataset, out, figures=not args.no_figures)
    outputs.append(
        _write_manifest(
            out,
            "analyze",
            started,
            outputs,
            {
                "inputs": {
                    "dataset": str(dataset_path),
                    "dataset_sha256": _sha256(dataset_path),
                    "records": len(dataset.records),
                }
            },
        )
    )
    print(f"analyze: {len(outputs)} files -> {out}")
    return EXIT_OK


def cmd_wta(args) -> int:
    started = time.perf_counter()
    obs_path = Path(args.observations)
    observations = read_observations_csv(obs_path)
    fit = fit_logistic(observations)
    estimate = crossover_price(fit, level=args.level)
    out = _out_dir(args)
    payload = {
        "schema_version": 1,
        "n_obs": fit.n_obs,
        "fit": {
            "intercept": fit.intercept,
            "slope": fit.slope,
            "covariance": [list(row) for row in fit.covariance],
            "log_likelihood": fit.log_likelihood,
            "iterations": fit.iterations,
            "converged": fit.converged,
        },
        "crossover": {
            "value": estimate.value,
            "ci_low": estimate.ci_low,
            "ci_high": estimate.ci_high,
            "level": estimate.level,
            "method": estimate.method,
            "stderr": estimate.stderr,
        },
        "formatted": format_crossover(estimate),
    }
    if args.bootstrap:
        boot = bootstrap_crossover(
            fit, observations, level=args.level, resamples=args.resamples, seed=args.seed
        )
        payload["crossover_bootstrap"] = {
            "value": boot.value,
            "ci_low": boot.ci_low,
            "ci_high": boot.ci_high,
            "level": boot.level,
            "method": boot.method,
            "stderr": boot.stderr,
            "seed": args.seed,
            "resamples": args.resamples,
        }
    wta_path = out / "wta.json"
    _write_json(wta_path, payload)
    outputs = [wta_path]

    if not args.no_figures:
        from . import plots

        outputs.append(plots.plot_wta_curve(fit, observations, estimate, out / "wta.png"))

    outputs.append(
        _write_manifest(
            out,
            "wta",
            started,
            outputs,
            {
                "inputs": {
                    "observations": str(obs_path),
                    "observations_sha256": _sha256(obs_path),
                    "n_obs": fit.n_obs,
                },
                "level": args.level,
                "bootstrap": bool(args.bootstrap),
            },
        )
    )
    print(f"wta: crossover {format_crossover(estimate)} -> {wta_path}")
    return EXIT_OK


def _add_common_sim_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override its values")
    parser.add_argument("--seed", type=int, help="RNG seed (sweep: seed root for cell seeds)")
    parser.add_argument("--defenders", type=int, help="defender population size")
    parser.add_argument("--epsilon", type=float, help="quiet-iteration threshold (currency)")
    parser.add_argument("--delta", type=int, help="consecutive quiet iterations to converge")
    parser.add_argument("--max-iters", type=int, help="iteration cap")
    parser.add_argument(
        "--pairing", choices=[p.value for p in PairingRule], help="attacker/defender matching rule"
    )
    parser.add_argument(
        "--mode", choices=[m.value for m in DecisionMode], help="attack decision rule"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mandatesim",
        description="Simulate mandated-security-investment economics and analyze the results.",
        epilog="Exit codes: 0 ok, 2 invalid arguments or config, 3 bad data, 4 I/O failure.",
    )
    parser.add_argument("--version", action="version", version=f"mandatesim {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    sim = commands.add_parser("simulate", help="run one scenario and write its trajectory")
    _add_common_sim_flags(sim)
    for name in PARAM_NAMES:
        sim.add_argument(f"--{name}", type=float, help=f"{name} in [0, 1]")
    sim.add_argument("--out-dir", default="out", help="output directory")
    sim.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    sim.set_defaults(func=cmd_simulate)

    swp = commands.add_parser("sweep", help="run the parameter grid and write a dataset")
    _add_common_sim_flags(swp)
    swp.add_argument("--grid-step", type=float, help="grid spacing on every axis (default 0.25)")
    swp.add_argument("--reps", type=int, help="repetitions per cell (default 3)")
    swp.add_argument("--parallelism", type=int, default=1, help="worker processes")
    swp.add_argument("--resume", action="store_true", help="skip runs already in the dataset")
    swp.add_argument("--progress", action="store_true", help="print progress to stderr")
    swp.add_argument("--out-dir", default="out", help="output directory")
    swp.set_defaults(func=cmd_sweep)

    ana = commands.add_parser("analyze", help="build reports from a sweep dataset")
    ana.add_argument("--dataset", required=True, help="dataset.jsonl from a sweep")
    ana.add_argument("--out-dir", default="out", help="output directory")
    ana.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    ana.set_defaults(func=cmd_analyze)

    wta = commands.add_parser("wta", help="fit a willingness-to-accept crossover price")
    wta.add_argument("--observations", required=True, help="CSV with header price,accepted")
    wta.add_argument("--level", type=float, default=0.95, help="confidence level (default 0.95)")
    wta.add_argument("--bootstrap", action="store_true", help="add a parametric bootstrap CI")
    wta.add_argument("--resamples", type=int, default=2000, help="bootstrap resamples")
    wta.add_argument("--seed", type=int, default=0, help="bootstrap seed")
    wta.add_argument("--out-dir", default="out", help="output directory")
    wta.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    wta.set_defaults(func=cmd_wta)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except MandateSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
