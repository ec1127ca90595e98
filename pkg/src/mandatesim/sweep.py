"""Grid sweeps: enumerate scenarios, run them reproducibly, persist records.

Every (cell, repetition) gets its own seed derived by hashing, so a sweep's
content is independent of execution order, worker count, and resume points.
Datasets persist as JSONL (header line plus one record per line) with a CSV
mirror alongside.
"""

from __future__ import annotations

import csv
import hashlib
import itertools
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path

from . import __version__
from .analytics import relative_loss_parts, useful_run
from .core import (
    PARAM_NAMES,
    DecisionMode,
    ModelParams,
    PairingRule,
    SimConfig,
    SuccessSpec,
    WealthSpec,
)
from .engine import Outcome, SimResult, run
from .errors import DatasetParseError, ValidationError

SCHEMA_VERSION = 1

# Cell seeds hash the parameter values at this many decimals; grids are
# expected to live on a coarser lattice than 1e-4.
SEED_DECIMALS = 4

CSV_COLUMNS = PARAM_NAMES + (
    "repetition",
    "seed",
    "outcome",
    "iterations",
    "relative_loss",
    "total_stolen",
    "mandate_spend",
    "initial_total",
    "useful",
)


@dataclass(frozen=True, kw_only=True)
class GridSpec:
    """Values swept per parameter, plus repetitions and the seed root."""

    attackers: tuple[float, ...]
    effectiveness: tuple[float, ...]
    inequality: tuple[float, ...]
    investment: tuple[float, ...]
    payoff: tuple[float, ...]
    success: tuple[float, ...]
    repetitions: int = 3
    base_seed: int = 0

    def __post_init__(self):
        for name in PARAM_NAMES:
            values = getattr(self, name)
            if not values:
                raise ValidationError(f"grid for {name} must not be empty")
            for v in values:
                if not (isinstance(v, (int, float)) and math.isfinite(v) and 0.0 <= v <= 1.0):
                    raise ValidationError(f"grid value for {name} must be in [0, 1], got {v!r}")
            if len(set(round(v, SEED_DECIMALS) for v in values)) != len(values):
                raise ValidationError(f"grid for {name} has duplicate values: {values!r}")
            object.__setattr__(self, name, tuple(sorted(float(v) for v in values)))
        if not isinstance(self.repetitions, int) or self.repetitions < 1:
            raise ValidationError(f"repetitions must be a positive int, got {self.repetitions!r}")
        if not isinstance(self.base_seed, int) or self.base_seed < 0:
            raise ValidationError(f"base_seed must be a non-negative int, got {self.base_seed!r}")

    @classmethod
    def from_step(cls, step: float, repetitions: int = 3, base_seed: int = 0) -> "GridSpec":
        """Uniform grid 0, step, 2*step, ..., 1 on every parameter."""
        if not (isinstance(step, (int, float)) and 0.0 < step <= 1.0):
            raise ValidationError(f"grid step must be in (0, 1], got {step!r}")
        n = 1.0 / step
        if abs(n - round(n)) > 1e-9:
            raise ValidationError(f"grid step must divide 1 evenly, got {step!r}")
        k = int(round(n))
        values = tuple(round(i * step, 10) for i in range(k)) + (1.0,)
        return cls(
            attackers=values,
            effectiveness=values,
            inequality=values,
            investment=values,
            payoff=values,
            success=values,
            repetitions=repetitions,
            base_seed=base_seed,
        )

    def values_for(self, name: str) -> tuple[float, ...]:
        if name not in PARAM_NAMES:
            raise ValidationError(f"unknown parameter {name!r}")
        return getattr(self, name)

    @property
    def size(self) -> int:
        """Number of cells (excluding repetitions)."""
        return math.prod(len(getattr(self, name)) for name in PARAM_NAMES)


def enumerate_grid(grid: GridSpec):
    """Yield every cell as ModelParams, lexicographic in canonical order."""
    axes = [grid.values_for(name) for name in PARAM_NAMES]
    for combo in itertools.product(*axes):
        yield ModelParams(**dict(zip(PARAM_NAMES, combo)))


def cell_seed(base_seed: int, params: ModelParams, repetition: int) -> int:
    """Stable per-run seed: 8 bytes of SHA-256 over the quantized cell key."""
    parts = [str(int(base_seed))]
    parts += [f"{v:.{SEED_DECIMALS}f}" for v in params.as_tuple()]
    parts.append(str(int(repetition)))
    digest = hashlib.sha256("|".join(parts).encode("ascii")).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass(frozen=True)
class SweepRecord:
    """One run's summary row inside a sweep dataset."""

    params: ModelParams
    repetition: int
    seed: int
    outcome: Outcome
    iterations: int
    relative_loss: float
    total_stolen: float
    mandate_spend: float
    initial_total: float
    useful: bool

    def __post_init__(self):
        if self.repetition < 0:
            raise ValidationError(f"repetition must be >= 0, got {self.repetition!r}")
        if self.iterations < 1:
            raise ValidationError(f"iterations must be >= 1, got {self.iterations!r}")
        if not isinstance(self.outcome, Outcome):
            raise ValidationError(f"outcome must be an Outcome, got {self.outcome!r}")
        if self.initial_total <= 0.0:
            raise ValidationError(f"initial_total must be > 0, got {self.initial_total!r}")
        if self.total_stolen < 0.0 or self.mandate_spend < 0.0:
            raise ValidationError("stolen and mandate spend must be >= 0")
        if not 0.0 <= self.relative_loss <= 1.0:
            raise ValidationError(f"relative_loss must be in [0, 1], got {self.relative_loss!r}")
        if self.relative_loss < self.params.investment:
            raise ValidationError(
                f"relative_loss {self.relative_loss!r} below the mandate floor "
                f"{self.params.investment!r}"
            )

    def key(self) -> tuple:
        quantized = tuple(round(v, SEED_DECIMALS) for v in self.params.as_tuple())
        return quantized + (self.repetition,)


@dataclass
class SweepDataset:
    """A finished (or loadable) sweep: provenance plus records."""

    grid: GridSpec
    config: SimConfig
    records: list[SweepRecord]
    tool_version: str = __version__


def summarize_run(
    params: ModelParams, repetition: int, seed: int, result: SimResult, delta: int
) -> SweepRecord:
    """Collapse one SimResult into its dataset row."""
    return SweepRecord(
        params=params,
        repetition=repetition,
        seed=seed,
        outcome=result.outcome,
        iterations=result.iterations,
        relative_loss=relative_loss_parts(
            params.investment, result.total_stolen, result.initial_total
        ),
        total_stolen=result.total_stolen,
        mandate_spend=result.mandate_spend,
        initial_total=result.initial_total,
        useful=useful_run(result.total_stolen, result.iterations, delta),
    )


def run_cell(params: ModelParams, repetition: int, grid: GridSpec, config: SimConfig) -> SweepRecord:
    """Run one (cell, repetition) with its derived seed."""
    seed = cell_seed(grid.base_seed, params, repetition)
    result = run(params, replace(config, seed=seed))
    return summarize_run(params, repetition, seed, result, config.delta)


# -- persistence -------------------------------------------------------------

def _config_to_json(config: SimConfig) -> dict:
    data = asdict(config)
    data["pairing"] = config.pairing.value
    data["decision_mode"] = config.decision_mode.value
    # per-run seeds come from the grid's base_seed, not from here
    data.pop("seed")
    return data


def _config_from_json(data: dict) -> SimConfig:
    return SimConfig(
        n_defenders=data["n_defenders"],
        epsilon=data["epsilon"],
        delta=data["delta"],
        max_iterations=data["max_iterations"],
        pairing=PairingRule(data["pairing"]),
        decision_mode=DecisionMode(data["decision_mode"]),
        wealth=WealthSpec(**data["wealth"]),
        success=SuccessSpec(**data["success"]),
    )


def _grid_to_json(grid: GridSpec) -> dict:
    data = {name: list(grid.values_for(name)) for name in PARAM_NAMES}
    data["repetitions"] = grid.repetitions
    data["base_seed"] = grid.base_seed
    return data


def _grid_from_json(data: dict) -> GridSpec:
    kwargs = {name: tuple(data[name]) for name in PARAM_NAMES}
    return GridSpec(
        **kwargs, repetitions=data["repetitions"], base_seed=data["base_seed"]
    )


def _header_line(grid: GridSpec, config: SimConfig) -> str:
    header = {
        "kind": "header",
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "grid": _grid_to_json(grid),
        "config": _config_to_json(config),
    }
    return json.dumps(header, sort_keys=True)


def _record_to_json(record: SweepRecord) -> dict:
    data = {name: getattr(record.params, name) for name in PARAM_NAMES}
    data.update(
        repetition=record.repetition,
        seed=record.seed,
        outcome=record.outcome.value,
        iterations=record.iterations,
        relative_loss=record.relative_loss,
        total_stolen=record.total_stolen,
        mandate_spend=record.mandate_spend,
        initial_total=record.initial_total,
        useful=record.useful,
    )
    return data


def _record_from_json(data: dict, line: int) -> SweepRecord:
    try:
        params = ModelParams(**{name: data[name] for name in PARAM_NAMES})
        return SweepRecord(
            params=params,
            repetition=data["repetition"],
            seed=data["seed"],
            outcome=Outcome(data["outcome"]),
            iterations=data["iterations"],
            relative_loss=data["relative_loss"],
            total_stolen=data["total_stolen"],
            mandate_spend=data["mandate_spend"],
            initial_total=data["initial_total"],
            useful=data["useful"],
        )
    except (KeyError, ValueError, TypeError, ValidationError) as exc:
        raise DatasetParseError(f"bad record on line {line}: {exc}", line=line) from exc


def _read_jsonl(path: Path) -> tuple[dict, list[SweepRecord]]:
    records = []
    header = None
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                data = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise DatasetParseError(
                    f"invalid JSON on line {line_no}: {exc}", line=line_no
                ) from exc
            if line_no == 1:
                if not isinstance(data, dict) or data.get("kind") != "header":
                    raise DatasetParseError("line 1 is not a dataset header", line=1)
                header = data
            else:
                records.append(_record_from_json(data, line_no))
    if header is None:
        raise DatasetParseError("dataset is empty: no header line", line=1)
    return header, records


def load_dataset(path: str | Path, partial: bool = False) -> SweepDataset:
    """Read a JSONL dataset back; partial=True skips completeness checks."""
    path = Path(path)
    header, records = _read_jsonl(path)
    grid = _grid_from_json(header["grid"])
    config = _config_from_json(header["config"])
    dataset = SweepDataset(
        grid=grid,
        config=config,
        records=records,
        tool_version=header.get("tool_version", "unknown"),
    )
    if not partial:
        validate_dataset(dataset)
    return dataset


def validate_dataset(dataset: SweepDataset) -> None:
    """Check completeness and key uniqueness against the grid."""
    expected = dataset.grid.size * dataset.grid.repetitions
    if len(dataset.records) != expected:
        raise ValidationError(
            f"dataset has {len(dataset.records)} records, grid wants {expected}"
        )
    keys = set()
    for record in dataset.records:
        key = record.key()
        if key in keys:
            raise ValidationError(f"duplicate record key {key}")
        keys.add(key)


def write_jsonl(dataset: SweepDataset, path: str | Path) -> None:
    """Write the canonical JSONL form (sorted records) atomically."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(_header_line(dataset.grid, dataset.config) + "\n")
        for record in sorted(dataset.records, key=SweepRecord.key):
            fh.write(json.dumps(_record_to_json(record), sort_keys=True) + "\n")
    os.replace(tmp, path)


def write_csv(dataset: SweepDataset, path: str | Path) -> None:
    """Write the CSV mirror with the frozen column set."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for record in sorted(dataset.records, key=SweepRecord.key):
            row = [getattr(record.params, name) for name in PARAM_NAMES]
            row += [
                record.repetition,
                record.seed,
                record.outcome.value,
                record.iterations,
                record.relative_loss,
                record.total_stolen,
                record.mandate_spend,
                record.initial_total,
                "true" if record.useful else "false",
            ]
            writer.writerow(row)
    os.replace(tmp, path)


# -- execution ---------------------------------------------------------------

_worker_state: dict = {}


def _init_worker(grid: GridSpec, config: SimConfig) -> None:
    _worker_state["grid"] = grid
    _worker_state["config"] = config


def _run_task(task: tuple[tuple[float, ...], int]) -> SweepRecord:
    values, repetition = task
    params = ModelParams(**dict(zip(PARAM_NAMES, values)))
    return run_cell(params, repetition, _worker_state["grid"], _worker_state["config"])


def run_sweep(
    grid: GridSpec,
    config: SimConfig,
    *,
    parallelism: int = 1,
    out_path: str | Path | None = None,
    resume: bool = False,
    checkpoint_every: int = 256,
    progress: bool = False,
) -> SweepDataset:
    """Run the full grid, optionally in parallel, optionally persisted.

    With out_path the dataset streams to JSONL as runs finish (flushed every
    checkpoint_every records) and is rewritten in canonical sorted order at
    the end, together with a CSV mirror next to it. With resume=True,
    (cell, repetition) keys already present in out_path are skipped; the
    final dataset is identical to an uninterrupted sweep.
    """
    if parallelism < 1:
        raise ValidationError(f"parallelism must be >= 1, got {parallelism!r}")
    if checkpoint_every < 1:
        raise ValidationError(f"checkpoint_every must be >= 1, got {checkpoint_every!r}")
    out_path = Path(out_path) if out_path is not None else None

    done_records: list[SweepRecord] = []
    done_keys: set[tuple] = set()
    if resume and out_path is not None and out_path.exists():
        partial = load_dataset(out_path, partial=True)
        if _grid_to_json(partial.grid) != _grid_to_json(grid) or _config_to_json(
            partial.config
        ) != _config_to_json(config):
            raise ValidationError(
                f"cannot resume: {out_path} was produced by a different grid or config"
            )
        done_records = partial.records
        done_keys = {record.key() for record in done_records}

    tasks = [
        (params.as_tuple(), rep)
        for params in enumerate_grid(grid)
        for rep in range(grid.repetitions)
    ]
    pending = [
        task
        for task in tasks
        if tuple(round(v, SEED_DECIMALS) for v in task[0]) + (task[1],) not in done_keys
    ]

    new_records: list[SweepRecord] = []
    out_fh = None
    if out_path is not None:
        out_path.parent.mkdir(parents=True, exist_ok=True)
        if done_keys:
            out_fh = open(out_path, "a", encoding="utf-8")
        else:
            out_fh = open(out_path, "w", encoding="utf-8")
            out_fh.write(_header_line(grid, config) + "\n")

    started = time.perf_counter()

    def consume(record: SweepRecord) -> None:
        new_records.append(record)
        if out_fh is not None:
            out_fh.write(json.dumps(_record_to_json(record), sort_keys=True) + "\n")
            if len(new_records) % checkpoint_every == 0:
                out_fh.flush()
        if progress and len(new_records) % checkpoint_every == 0:
            elapsed = time.perf_counter() - started
            print(
                f"sweep: {len(new_records)}/{len(pending)} runs, {elapsed:.0f}s elapsed",
                file=sys.stderr,
            )

    try:
        if parallelism == 1:
            _init_worker(grid, config)
            for task in pending:
                consume(_run_task(task))
        else:
            chunk = max(1, min(64, len(pending) // (parallelism * 4) or 1))
            with ProcessPoolExecutor(
                max_workers=parallelism, initializer=_init_worker, initargs=(grid, config)
            ) as pool:
                for record in pool.map(_run_task, pending, chunksize=chunk):
                    consume(record)
    finally:
        if out_fh is not None:
            out_fh.close()

    dataset = SweepDataset(grid=grid, config=config, records=done_records + new_records)
    dataset.records.sort(key=SweepRecord.key)
    validate_dataset(dataset)
    if out_path is not None:
        write_jsonl(dataset, out_path)
        write_csv(dataset, out_path.with_suffix(".csv"))
    return dataset
