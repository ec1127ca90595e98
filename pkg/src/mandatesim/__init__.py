"""Monte-Carlo economics of mandated security investment.

A population of defenders pre-pays a mandated fraction of its assets for
security; attackers weigh expected loot against the cost of a failed attempt.
The package simulates single runs, sweeps the six-knob parameter grid,
reproduces the headline analyses, and fits willingness-to-accept crossover
prices from accept/reject observations.
"""

from .core import (
    DEFAULT_PARAMS,
    PARAM_NAMES,
    REMOVAL_THRESHOLD,
    Attacker,
    DecisionMode,
    Defender,
    ModelParams,
    PairingRule,
    SimConfig,
    SuccessSpec,
    WealthSpec,
    World,
    init_world,
)
from .engine import (
    AttackOutcome,
    IterationRecord,
    Outcome,
    SimResult,
    run,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_PARAMS",
    "PARAM_NAMES",
    "REMOVAL_THRESHOLD",
    "Attacker",
    "AttackOutcome",
    "DecisionMode",
    "Defender",
    "IterationRecord",
    "ModelParams",
    "Outcome",
    "PairingRule",
    "SimConfig",
    "SimResult",
    "SuccessSpec",
    "WealthSpec",
    "World",
    "init_world",
    "run",
    "__version__",
]
