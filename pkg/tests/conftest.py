from __future__ import annotations

import pytest

from mandatesim import SimConfig
from mandatesim.sweep import GridSpec, SweepDataset, run_sweep


@pytest.fixture(scope="session")
def small_dataset() -> SweepDataset:
    """A complete coarse sweep shared by analytics tests: 3^6 cells, 2 reps."""
    grid = GridSpec.from_step(0.5, repetitions=2, base_seed=9)
    return run_sweep(grid, SimConfig(n_defenders=30))


@pytest.fixture(scope="session")
def desk_dataset() -> SweepDataset:
    """The full 0.25-step grid at a reduced population.

    Same 15,625 cells as the desk-scale study but 40 defenders and 2
    repetitions, so the whole suite stays under a couple of minutes; the
    slow-marked performance test runs the full-population version.
    """
    grid = GridSpec.from_step(0.25, repetitions=2, base_seed=101)
    return run_sweep(grid, SimConfig(n_defenders=40))
