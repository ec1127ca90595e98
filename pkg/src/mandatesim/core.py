"""Model parameters, agent state, and world construction.

A world holds a population of defenders with lognormally distributed wealth
and a smaller population of attackers whose wealth is scaled down by the
inequality parameter. Defenders pre-pay a mandated security investment; the
rest of the game happens in the engine module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ValidationError

# Canonical parameter order (lexicographic by name). Grid enumeration, cell
# seeds, and every serialized artifact list the six knobs in this order.
PARAM_NAMES: tuple[str, ...] = (
    "attackers",
    "effectiveness",
    "inequality",
    "investment",
    "payoff",
    "success",
)

# Defenders whose holdings fall below one minor currency unit are insolvent
# and leave the game; keeping the threshold above zero stops runs from
# chasing asymptotic decay tails.
REMOVAL_THRESHOLD = 0.01


class PairingRule(str, Enum):
    """How active attackers are matched to living defenders each iteration."""

    RANDOM = "random"
    WEALTHIEST = "wealthiest"


class DecisionMode(str, Enum):
    """Attack rule: rational profit-seeking, or the inverted literal variant."""

    RATIONAL = "rational"
    LITERAL = "literal"


@dataclass(frozen=True, kw_only=True)
class ModelParams:
    """The six unit-interval knobs that define one scenario.

    attackers      attacker count as a fraction of the defender count
    effectiveness  how strongly mandated investment raises the cost to attack
    inequality     attacker wealth as a fraction of defender wealth
    investment     mandated security spend as a fraction of initial assets
    payoff         fraction of a defender's current assets taken per theft
    success        baseline cost to attack as a fraction of initial assets
    """

    attackers: float
    effectiveness: float
    inequality: float
    investment: float
    payoff: float
    success: float

    def __post_init__(self):
        for name in PARAM_NAMES:
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ValidationError(f"{name} must be a finite number, got {value!r}")
            if not 0.0 <= value <= 1.0:
                raise ValidationError(f"{name} must be in [0, 1], got {value!r}")

    def as_tuple(self) -> tuple[float, ...]:
        """Values in canonical parameter order."""
        return tuple(getattr(self, name) for name in PARAM_NAMES)

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def replace(self, **changes: float) -> "ModelParams":
        merged = self.as_dict()
        merged.update(changes)
        return ModelParams(**merged)


# Central reference scenario used when nothing else is specified: a middling
# attacker population and inequality, high payoff, light mandate, moderate
# baseline attack cost.
DEFAULT_PARAMS = ModelParams(
    attackers=0.5,
    effectiveness=0.5,
    inequality=0.5,
    investment=0.2,
    payoff=0.8,
    success=0.3,
)


@dataclass(frozen=True)
class WealthSpec:
    """Lognormal asset distribution used for defender (and attacker) draws."""

    log_mean: float = math.log(10_000.0)
    log_sd: float = 1.5

    def __post_init__(self):
        if not math.isfinite(self.log_mean):
            raise ValidationError(f"log_mean must be finite, got {self.log_mean!r}")
        if not (math.isfinite(self.log_sd) and self.log_sd > 0.0):
            raise ValidationError(f"log_sd must be > 0, got {self.log_sd!r}")


@dataclass(frozen=True)
class SuccessSpec:
    """Per-attack success probability: a normal truncated to [0, 1]."""

    mean: float = 0.39
    sd: float = 0.062

    def __post_init__(self):
        if not (math.isfinite(self.mean) and 0.0 <= self.mean <= 1.0):
            raise ValidationError(f"success mean must be in [0, 1], got {self.mean!r}")
        if not (math.isfinite(self.sd) and self.sd > 0.0):
            raise ValidationError(f"success sd must be > 0, got {self.sd!r}")


@dataclass(frozen=True, kw_only=True)
class SimConfig:
    """Everything about a run that is not a model parameter."""

    n_defenders: int = 200
    seed: int = 0
    epsilon: float = 100.0
    delta: int = 50
    max_iterations: int = 10_000
    pairing: PairingRule = PairingRule.RANDOM
    decision_mode: DecisionMode = DecisionMode.RATIONAL
    wealth: WealthSpec = field(default_factory=WealthSpec)
    success: SuccessSpec = field(default_factory=SuccessSpec)

    def __post_init__(self):
        if not isinstance(self.n_defenders, int) or self.n_defenders < 1:
            raise ValidationError(f"n_defenders must be a positive int, got {self.n_defenders!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ValidationError(f"seed must be a non-negative int, got {self.seed!r}")
        if not (math.isfinite(self.epsilon) and self.epsilon >= 0.0):
            raise ValidationError(f"epsilon must be >= 0, got {self.epsilon!r}")
        if not isinstance(self.delta, int) or self.delta < 1:
            raise ValidationError(f"delta must be a positive int, got {self.delta!r}")
        if not isinstance(self.max_iterations, int) or self.max_iterations < self.delta:
            raise ValidationError(
                f"max_iterations must be an int >= delta, got {self.max_iterations!r}"
            )
        if not isinstance(self.pairing, PairingRule):
            raise ValidationError(f"pairing must be a PairingRule, got {self.pairing!r}")
        if not isinstance(self.decision_mode, DecisionMode):
            raise ValidationError(f"decision_mode must be a DecisionMode, got {self.decision_mode!r}")


@dataclass
class Defender:
    """One target. Keeps its initial draw so costs and losses have a baseline."""

    id: int
    initial_assets: float
    assets: float
    cost_to_attack: float
    alive: bool = True


@dataclass
class Attacker:
    """One adversary. Deactivated permanently once its assets hit zero."""

    id: int
    assets: float
    active: bool = True


@dataclass
class World:
    """Full mutable game state plus the generator that drives it."""

    params: ModelParams
    config: SimConfig
    defenders: list[Defender]
    attackers: list[Attacker]
    rng: np.random.Generator
    iteration: int = 0
    total_stolen: float = 0.0
    total_punished: float = 0.0
    total_mandate_spend: float = 0.0
    initial_total_assets: float = 0.0


def sample_defender_assets(spec: WealthSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n initial defender asset values."""
    return rng.lognormal(mean=spec.log_mean, sigma=spec.log_sd, size=n)


def sample_attacker_assets(
    spec: WealthSpec, inequality: float, n: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw n attacker asset values: fresh defender-distribution draws scaled by inequality."""
    return inequality * rng.lognormal(mean=spec.log_mean, sigma=spec.log_sd, size=n)


def draw_success_prob(spec: SuccessSpec, rng: np.random.Generator) -> float:
    """One success probability: normal(mean, sd) rejection-sampled into [0, 1]."""
    while True:
        value = rng.normal(spec.mean, spec.sd)
        if 0.0 <= value <= 1.0:
            return float(value)


def draw_success_probs(spec: SuccessSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Vector of n success probabilities, same rejection rule as draw_success_prob."""
    values = rng.normal(spec.mean, spec.sd, size=n)
    bad = (values < 0.0) | (values > 1.0)
    while bad.any():
        values[bad] = rng.normal(spec.mean, spec.sd, size=int(bad.sum()))
        bad = (values < 0.0) | (values > 1.0)
    return values


def cost_to_attack(initial_assets: float, params: ModelParams) -> float:
    """Price an attacker pays for a failed attempt on this defender.

    The baseline share (success) plus the mandate-bought share
    (effectiveness * investment), applied to the defender's initial assets.
    """
    return (params.success + params.effectiveness * params.investment) * initial_assets


def init_world(params: ModelParams, config: SimConfig) -> World:
    """Build the starting world; a pure function of (params, config).

    Defenders draw initial assets, immediately spend the mandated fraction,
    and are priced for attack off the initial draw. Attacker count is
    floor(attackers * n_defenders) with fresh scaled wealth draws.
    """
    rng = np.random.default_rng(config.seed)
    initial = sample_defender_assets(config.wealth, config.n_defenders, rng)
    defenders = []
    for i, raw in enumerate(initial):
        a0 = float(raw)
        held = a0 * (1.0 - params.investment)
        defenders.append(
            Defender(
                id=i,
                initial_assets=a0,
                assets=held,
                cost_to_attack=cost_to_attack(a0, params),
                alive=held >= REMOVAL_THRESHOLD,
            )
        )
    n_attackers = int(math.floor(params.attackers * config.n_defenders))
    attacker_assets = sample_attacker_assets(config.wealth, params.inequality, n_attackers, rng)
    attackers = [
        Attacker(id=j, assets=float(a), active=float(a) > 0.0)
        for j, a in enumerate(attacker_assets)
    ]
    return World(
        params=params,
        config=config,
        defenders=defenders,
        attackers=attackers,
        rng=rng,
        total_mandate_spend=math.fsum(params.investment * d.initial_assets for d in defenders),
        initial_total_assets=math.fsum(d.initial_assets for d in defenders),
    )
