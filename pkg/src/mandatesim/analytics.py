"""Turn sweep datasets into the headline analyses.

Loss CDFs per mandate level, usefulness filtering, per-parameter histograms,
expected parameter values, axis sweeps against the mandate, and
time-to-total-loss distributions. Everything here is a pure function of the
dataset, so re-running a report is byte-stable.
"""

from __future__ import annotations

import json
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from statistics import fmean
from typing import TYPE_CHECKING

from .core import DEFAULT_PARAMS, PARAM_NAMES, ModelParams
from .engine import Outcome, SimResult
from .errors import GridGapError, NoDataError, ValidationError

if TYPE_CHECKING:
    from .sweep import SweepDataset, SweepRecord

# Soft calibration targets and tolerances for the summary report. They come
# from published aggregate figures whose exact wealth calibration is unknown,
# so misses are reported as warnings, never failures.
SUMMARY_TARGETS = {
    "baseline_no_loss": (0.65, 0.10),
    "ten_percent_increment": (0.08, 0.04),
    "useful_fraction": (0.35, 0.10),
    "total_loss_share": (0.01, 0.02),
    "expected_value_tolerance": 0.15,
    "flat_effectiveness_spread": 0.02,
    "best_mandate_low_effectiveness": (0.40, 0.15),
}


class OutcomeClass(str, Enum):
    EQUILIBRIUM = "equilibrium"
    TOTAL_LOSS = "total_loss"
    MAX_ITERATIONS = "max_iterations"


@dataclass(frozen=True)
class CdfCurve:
    """Empirical CDF of per-cell mean relative loss at one mandate level."""

    mandate: float
    thresholds: tuple[float, ...]
    cumulative: tuple[float, ...]


@dataclass(frozen=True)
class ParamHistogram:
    """Useful-run counts binned on one parameter's grid values."""

    param: str
    values: tuple[float, ...]
    counts: tuple[int, ...]


@dataclass(frozen=True)
class ExpectedValues:
    """Mean of each parameter over the useful records."""

    attackers: float
    effectiveness: float
    inequality: float
    investment: float
    payoff: float
    success: float

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in PARAM_NAMES}


@dataclass(frozen=True)
class AxisSweep:
    """Mean relative loss on one axis, one row per mandate level."""

    axis: str
    axis_values: tuple[float, ...]
    mandates: tuple[float, ...]
    pinned: dict[str, float]
    losses: tuple[tuple[float, ...], ...]


@dataclass(frozen=True)
class TtlStats:
    """Iteration counts of total-loss runs at one mandate level."""

    mandate: float
    histogram: tuple[tuple[int, int], ...]
    mean: float | None
    runs: int


def relative_loss_parts(investment: float, total_stolen: float, initial_total: float) -> float:
    """Fraction of initial wealth gone: the mandate floor plus theft.

    Computed as investment + stolen/initial so the floor holds exactly in
    floating point; mandate_spend is investment * initial_total by
    construction, so this equals (mandate_spend + stolen) / initial_total.
    """
    if initial_total <= 0.0:
        raise ValidationError(f"initial_total must be > 0, got {initial_total!r}")
    if total_stolen < 0.0:
        raise ValidationError(f"total_stolen must be >= 0, got {total_stolen!r}")
    return min(investment + total_stolen / initial_total, 1.0)


def relative_loss(record: SweepRecord) -> float:
    return relative_loss_parts(record.params.investment, record.total_stolen, record.initial_total)


def useful_run(total_stolen: float, iterations: int, delta: int) -> bool:
    """A run is useful unless nothing was stolen and it converged immediately."""
    return not (total_stolen == 0.0 and iterations == delta)


def is_useful(record: SweepRecord, delta: int) -> bool:
    return useful_run(record.total_stolen, record.iterations, delta)


def classify(record: SweepRecord) -> OutcomeClass:
    """Name the run's ending; converged runs are equilibria."""
    return {
        Outcome.CONVERGED: OutcomeClass.EQUILIBRIUM,
        Outcome.TOTAL_LOSS: OutcomeClass.TOTAL_LOSS,
        Outcome.MAX_ITERATIONS: OutcomeClass.MAX_ITERATIONS,
    }[record.outcome]


def _quantize(value: float) -> float:
    return round(value, 4)


def _cell_key(params: ModelParams) -> tuple[float, ...]:
    return tuple(_quantize(v) for v in params.as_tuple())


def _records_at_mandate(dataset: SweepDataset, mandate: float) -> list[SweepRecord]:
    m = _quantize(mandate)
    return [r for r in dataset.records if _quantize(r.params.investment) == m]


def loss_cdf(dataset: SweepDataset, mandate: float) -> CdfCurve:
    """ECDF of relative loss at one mandate, repetitions averaged per cell."""
    cells: dict[tuple, list[float]] = defaultdict(list)
    for record in _records_at_mandate(dataset, mandate):
        cells[_cell_key(record.params)].append(record.relative_loss)
    if not cells:
        raise NoDataError(f"no records at mandate {mandate!r}")
    losses = sorted(fmean(v) for v in cells.values())
    n = len(losses)
    thresholds = []
    cumulative = []
    seen = 0
    for loss in losses:
        seen += 1
        if thresholds and loss == thresholds[-1]:
            cumulative[-1] = seen / n
        else:
            thresholds.append(loss)
            cumulative.append(seen / n)
    return CdfCurve(
        mandate=_quantize(mandate), thresholds=tuple(thresholds), cumulative=tuple(cumulative)
    )


def no_loss_fraction(dataset: SweepDataset, mandate: float) -> float:
    """Share of cells at this mandate where no repetition lost anything to theft."""
    cells: dict[tuple, bool] = {}
    for record in _records_at_mandate(dataset, mandate):
        key = _cell_key(record.params)
        cells[key] = cells.get(key, True) and record.total_stolen == 0.0
    if not cells:
        raise NoDataError(f"no records at mandate {mandate!r}")
    return sum(cells.values()) / len(cells)


def useful_histograms(dataset: SweepDataset) -> dict[str, ParamHistogram]:
    """Count useful runs in each parameter's grid-value bins."""
    useful = [r for r in dataset.records if r.useful]
    result = {}
    for name in PARAM_NAMES:
        values = dataset.grid.values_for(name)
        counts = Counter(_quantize(getattr(r.params, name)) for r in useful)
        result[name] = ParamHistogram(
            param=name,
            values=values,
            counts=tuple(counts.get(_quantize(v), 0) for v in values),
        )
    return result


def expected_param_values(dataset: SweepDataset) -> ExpectedValues:
    """Mean parameter vector over useful records."""
    useful = [r for r in dataset.records if r.useful]
    if not useful:
        raise NoDataError("no useful records in dataset")
    return ExpectedValues(
        **{name: fmean(getattr(r.params, name) for r in useful) for name in PARAM_NAMES}
    )


def _snap(value: float, grid_values: tuple[float, ...]) -> float:
    return min(grid_values, key=lambda v: (abs(v - value), v))


def sweep_axis(
    dataset: SweepDataset,
    axis: str,
    mandates: tuple[float, ...] | None = None,
    pinned: ModelParams = DEFAULT_PARAMS,
) -> AxisSweep:
    """Mean relative loss along one axis, a row per mandate level.

    The other four parameters are pinned to the grid values nearest the
    pinned vector (reported in the result). Raises GridGapError when a
    requested (mandate, axis value) cell is missing from the dataset.
    """
    if axis not in PARAM_NAMES:
        raise ValidationError(f"unknown axis {axis!r}")
    if axis == "investment":
        raise ValidationError("investment is the mandate dimension, not a sweep axis")
    axis_values = dataset.grid.values_for(axis)
    if mandates is None:
        mandates = dataset.grid.values_for("investment")
    pins = {
        name: _snap(getattr(pinned, name), dataset.grid.values_for(name))
        for name in PARAM_NAMES
        if name not in (axis, "investment")
    }
    cells: dict[tuple, list[float]] = defaultdict(list)
    for record in dataset.records:
        if all(_quantize(getattr(record.params, n)) == _quantize(v) for n, v in pins.items()):
            key = (_quantize(record.params.investment), _quantize(getattr(record.params, axis)))
            cells[key].append(record.relative_loss)
    losses = []
    missing = []
    for mandate in mandates:
        row = []
        for value in axis_values:
            key = (_quantize(mandate), _quantize(value))
            if key not in cells:
                missing.append(key)
            else:
                row.append(fmean(cells[key]))
        losses.append(tuple(row))
    if missing:
        raise GridGapError(
            f"dataset lacks {len(missing)} cells for axis {axis!r} at pins {pins}: "
            f"{missing[:5]}{'...' if len(missing) > 5 else ''}",
            missing=missing,
        )
    return AxisSweep(
        axis=axis,
        axis_values=axis_values,
        mandates=tuple(_quantize(m) for m in mandates),
        pinned=pins,
        losses=tuple(losses),
    )


def time_to_total_loss(dataset: SweepDataset) -> dict[float, TtlStats]:
    """Iteration-count distribution of total-loss runs per mandate (may be empty)."""
    groups: dict[float, list[int]] = {
        _quantize(m): [] for m in dataset.grid.values_for("investment")
    }
    for record in dataset.records:
        if record.outcome is Outcome.TOTAL_LOSS:
            groups[_quantize(record.params.investment)].append(record.iterations)
    stats = {}
    for mandate, iterations in groups.items():
        counter = Counter(iterations)
        stats[mandate] = TtlStats(
            mandate=mandate,
            histogram=tuple(sorted(counter.items())),
            mean=fmean(iterations) if iterations else None,
            runs=len(iterations),
        )
    return stats


def loss_rate_series(result: SimResult) -> list[tuple[int, float]]:
    """(iteration, total defender assets) pairs; non-increasing by construction."""
    return [(rec.iteration, rec.total_defender_assets) for rec in result.series]


# -- summary -----------------------------------------------------------------

def _check(value: float, target: float, tolerance: float, note: str | None = None) -> dict:
    entry = {
        "value": value,
        "target": target,
        "tolerance": tolerance,
        "status": "pass" if abs(value - target) <= tolerance else "warn",
    }
    if note:
        entry["note"] = note
    return entry


def _skipped(note: str) -> dict:
    return {"value": None, "status": "skipped", "note": note}


def build_summary(dataset: SweepDataset) -> dict:
    """Compare the dataset against the soft calibration targets.

    Every block reports pass/warn/skipped; a warn means the unpublished
    calibration details diverge, not that the build is wrong.
    """
    records = dataset.records
    mandates = dataset.grid.values_for("investment")
    checks: dict[str, dict] = {}

    useful_count = sum(1 for r in records if r.useful)
    target, tol = SUMMARY_TARGETS["useful_fraction"]
    checks["useful_fraction"] = _check(useful_count / len(records), target, tol)

    no_loss = {_quantize(m): no_loss_fraction(dataset, m) for m in mandates}
    if 0.0 in no_loss:
        target, tol = SUMMARY_TARGETS["baseline_no_loss"]
        checks["baseline_no_loss"] = _check(no_loss[0.0], target, tol)
    else:
        checks["baseline_no_loss"] = _skipped("grid has no mandate 0.0")
    if 0.0 in no_loss and 0.1 in no_loss:
        target, tol = SUMMARY_TARGETS["ten_percent_increment"]
        checks["ten_percent_increment"] = _check(no_loss[0.1] - no_loss[0.0], target, tol)
    else:
        checks["ten_percent_increment"] = _skipped("grid has no mandate 0.1")

    target, tol = SUMMARY_TARGETS["total_loss_share"]
    total_loss = sum(1 for r in records if r.outcome is Outcome.TOTAL_LOSS)
    share = _check(total_loss / len(records), target, tol)
    partial = [r for r in records if r.params.investment < 1.0]
    if partial:
        # a 100% mandate bankrupts every defender on its own; split that out
        share["value_below_full_mandate"] = (
            sum(1 for r in partial if r.outcome is Outcome.TOTAL_LOSS) / len(partial)
        )
    checks["total_loss_share"] = share

    tol = SUMMARY_TARGETS["expected_value_tolerance"]
    try:
        expected = expected_param_values(dataset)
        per_param = {
            name: _check(getattr(expected, name), getattr(DEFAULT_PARAMS, name), tol)
            for name in PARAM_NAMES
        }
        status = "warn" if any(v["status"] == "warn" for v in per_param.values()) else "pass"
        checks["expected_values"] = {"status": status, "params": per_param}
    except NoDataError:
        checks["expected_values"] = _skipped("no useful records")

    try:
        eff = sweep_axis(dataset, "effectiveness")
        spreads = [
            max(row) - min(row)
            for mandate, row in zip(eff.mandates, eff.losses)
            if mandate >= 0.5
        ]
        if spreads:
            checks["flat_effectiveness_when_invested"] = _check(
                max(spreads),
                0.0,
                SUMMARY_TARGETS["flat_effectiveness_spread"],
                note="max loss spread across effectiveness at mandates >= 0.5",
            )
        else:
            checks["flat_effectiveness_when_invested"] = _skipped("no mandate >= 0.5 in grid")

        band = [i for i, v in enumerate(eff.axis_values) if 0.1 <= v <= 0.3]
        if band:
            band_loss = [fmean(row[i] for i in band) for row in eff.losses]
            best = eff.mandates[band_loss.index(min(band_loss))]
            target, tol = SUMMARY_TARGETS["best_mandate_low_effectiveness"]
            checks["best_mandate_low_effectiveness"] = _check(
                best, target, tol, note="argmin is quantized to the mandate grid"
            )
        else:
            checks["best_mandate_low_effectiveness"] = _skipped(
                "no effectiveness values in [0.1, 0.3]"
            )
    except GridGapError as exc:
        checks["flat_effectiveness_when_invested"] = _skipped(f"grid gaps: {exc}")
        checks["best_mandate_low_effectiveness"] = _skipped(f"grid gaps: {exc}")

    low_payoff = [v for v in dataset.grid.values_for("payoff") if v < 0.2]
    if low_payoff:
        hist = useful_histograms(dataset)["payoff"]
        useful_bins = {
            str(_quantize(v)): hist.counts[hist.values.index(v)] for v in low_payoff
        }
        theft_bins = {
            str(_quantize(v)): sum(
                1
                for r in records
                if _quantize(r.params.payoff) == _quantize(v) and r.total_stolen > 0.0
            )
            for v in low_payoff
        }
        checks["low_payoff_useful_bins"] = {
            "value": useful_bins,
            "theft_runs": theft_bins,
            "status": "pass",
            "discrepancy": any(c > 0 for c in theft_bins.values()),
            "note": (
                "theft below payoff 0.2 contradicts the claim that such attacks cannot "
                "succeed; expected when the baseline attack cost is zero"
            ),
        }
    else:
        checks["low_payoff_useful_bins"] = _skipped("grid has no payoff below 0.2")

    return {
        "schema_version": 1,
        "tool_version": dataset.tool_version,
        "dataset": {
            "records": len(records),
            "cells": dataset.grid.size,
            "repetitions": dataset.grid.repetitions,
            "n_defenders": dataset.config.n_defenders,
            "base_seed": dataset.grid.base_seed,
            "no_loss_fraction_by_mandate": {str(k): v for k, v in sorted(no_loss.items())},
        },
        "checks": checks,
    }


# -- report emission ---------------------------------------------------------

def _fmt_level(value: float) -> str:
    return str(_quantize(value))


def write_reports(dataset: SweepDataset, out_dir: str | Path, figures: bool = True) -> list[Path]:
    """Emit the full report set: CSVs, summary.json, and (optionally) figures."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def emit_csv(name: str, header: list[str], rows: list[list]) -> None:
        path = out_dir / name
        lines = [",".join(header)]
        lines += [",".join(str(cell) for cell in row) for row in rows]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written.append(path)

    mandates = dataset.grid.values_for("investment")
    curves = [loss_cdf(dataset, m) for m in mandates]
    for curve in curves:
        emit_csv(
            f"cdf_{_fmt_level(curve.mandate)}.csv",
            ["relative_loss", "cumulative_fraction"],
            [[t, c] for t, c in zip(curve.thresholds, curve.cumulative)],
        )

    histograms = useful_histograms(dataset)
    for name, hist in histograms.items():
        emit_csv(
            f"hist_{name}.csv",
            [name, "useful_count"],
            [[v, c] for v, c in zip(hist.values, hist.counts)],
        )

    try:
        expected = expected_param_values(dataset)
        emit_csv(
            "expected_values.csv",
            ["parameter", "mean"],
            [[name, getattr(expected, name)] for name in PARAM_NAMES],
        )
    except NoDataError:
        pass

    sweeps = []
    for axis in PARAM_NAMES:
        if axis == "investment":
            continue
        sweep = sweep_axis(dataset, axis)
        sweeps.append(sweep)
        header = [axis] + [f"mandate_{_fmt_level(m)}" for m in sweep.mandates]
        rows = [
            [value] + [sweep.losses[mi][vi] for mi in range(len(sweep.mandates))]
            for vi, value in enumerate(sweep.axis_values)
        ]
        emit_csv(f"sweep_{axis}.csv", header, rows)

    ttl = time_to_total_loss(dataset)
    for mandate in mandates:
        stats = ttl[_quantize(mandate)]
        emit_csv(
            f"ttl_{_fmt_level(mandate)}.csv",
            ["iterations", "count"],
            [[i, c] for i, c in stats.histogram],
        )

    summary_path = out_dir / "summary.json"
    summary_path.write_text(
        json.dumps(build_summary(dataset), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    written.append(summary_path)

    if figures:
        from . import plots

        written.append(plots.plot_loss_cdfs(curves, out_dir / "loss_cdf.png"))
        written.append(
            plots.plot_useful_histograms(histograms, out_dir / "useful_histograms.png")
        )
        for sweep in sweeps:
            written.append(plots.plot_axis_sweep(sweep, out_dir / f"sweep_{sweep.axis}.png"))
        written.append(plots.plot_time_to_total_loss(ttl, out_dir / "time_to_total_loss.png"))
    return written
