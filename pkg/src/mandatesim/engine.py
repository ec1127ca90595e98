"""The iteration loop: pair, decide, fight, remove, check for termination.

Each iteration every active attacker draws a fresh success probability,
at most one attacker meets each living defender, profitable attacks are
resolved, broke agents leave, and the run ends on total loss, a long-enough
quiet streak, or the iteration cap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import (
    REMOVAL_THRESHOLD,
    Attacker,
    Defender,
    DecisionMode,
    ModelParams,
    PairingRule,
    SimConfig,
    World,
    draw_success_probs,
    init_world,
)


class Outcome(str, Enum):
    CONVERGED = "converged"
    TOTAL_LOSS = "total_loss"
    MAX_ITERATIONS = "max_iterations"


# (attacker_id, defender_id) pairs for one iteration; ids are list indexes
# into world.attackers / world.defenders.
Pairing = list[tuple[int, int]]


@dataclass(frozen=True)
class AttackOutcome:
    """What one resolved attack did to the two agents involved."""

    attacked: bool
    succeeded: bool
    amount_stolen: float = 0.0
    amount_punished: float = 0.0


@dataclass(frozen=True)
class IterationRecord:
    """Aggregate bookkeeping emitted after every iteration."""

    iteration: int
    total_defender_assets: float
    alive_defenders: int
    stolen_this_iter: float
    attacks_attempted: int
    attacks_succeeded: int
    punished_this_iter: float


@dataclass(frozen=True)
class SimResult:
    """Terminal summary of one run, with the full per-iteration series."""

    outcome: Outcome
    iterations: int
    series: tuple[IterationRecord, ...]
    initial_total: float
    mandate_spend: float
    total_stolen: float


def expected_earnings(defender_assets: float, payoff: float, p_success: float) -> float:
    """What the attacker expects to gain: current assets * payoff * p_success."""
    return defender_assets * payoff * p_success


def decide_attack(
    expected: float,
    cost: float,
    attacker_assets: float,
    mode: DecisionMode = DecisionMode.RATIONAL,
) -> bool:
    """Attack commitment rule.

    Rational attackers go when the expected haul beats the cost; the literal
    mode inverts that comparison. Either way the attacker must be able to
    cover the cost.
    """
    if mode is DecisionMode.LITERAL:
        return expected < cost and cost < attacker_assets
    return expected > cost and cost < attacker_assets


def pair_attackers(world: World, rng: np.random.Generator) -> Pairing:
    """Match active attackers to living defenders, injectively.

    Random rule: a uniformly random one-to-one assignment; when attackers
    outnumber defenders a uniformly random surplus sits out. Wealthiest rule:
    attackers in descending asset order each take the richest unclaimed
    defender, so any surplus is the poorest attackers.
    """
    active = [a for a in world.attackers if a.active]
    alive = [d for d in world.defenders if d.alive]
    if not active or not alive:
        return []
    k = min(len(active), len(alive))
    if world.config.pairing is PairingRule.WEALTHIEST:
        active.sort(key=lambda a: (-a.assets, a.id))
        alive.sort(key=lambda d: (-d.assets, d.id))
        return [(a.id, d.id) for a, d in zip(active[:k], alive[:k])]
    if len(active) > k:
        chosen = rng.permutation(len(active))[:k]
        chosen.sort()
        active = [active[i] for i in chosen]
    targets = rng.permutation(len(alive))[:k]
    return [(a.id, alive[j].id) for a, j in zip(active, targets)]


def resolve_attack(
    attacker: Attacker,
    defender: Defender,
    p_success: float,
    payoff: float,
    rng: np.random.Generator,
) -> AttackOutcome:
    """Resolve one committed attack, mutating both agents.

    Success moves payoff * current defender assets to the attacker; failure
    destroys the defender's cost_to_attack out of the attacker's assets and
    deactivates the attacker if that leaves it at or below zero.
    """
    if rng.random() < p_success:
        amount = payoff * defender.assets
        defender.assets -= amount
        attacker.assets += amount
        return AttackOutcome(attacked=True, succeeded=True, amount_stolen=amount)
    penalty = defender.cost_to_attack
    attacker.assets -= penalty
    if attacker.assets <= 0.0:
        attacker.active = False
    return AttackOutcome(attacked=True, succeeded=False, amount_punished=penalty)


def step(world: World) -> IterationRecord:
    """Advance the world one iteration and report what happened.

    Consumes randomness in a fixed order (success-probability draws for the
    active attackers in id order, then pairing, then one uniform per
    committed attack) so runs replay bit-for-bit from a seed.
    """
    params = world.params
    config = world.config
    attempts = 0
    wins = 0
    stolen = 0.0
    punished = 0.0
    active = [a for a in world.attackers if a.active]
    if active and any(d.alive for d in world.defenders):
        probs = draw_success_probs(config.success, len(active), world.rng)
        p_of = {a.id: float(p) for a, p in zip(active, probs)}
        for attacker_id, defender_id in pair_attackers(world, world.rng):
            attacker = world.attackers[attacker_id]
            defender = world.defenders[defender_id]
            p = p_of[attacker_id]
            expected = expected_earnings(defender.assets, params.payoff, p)
            if not decide_attack(
                expected, defender.cost_to_attack, attacker.assets, config.decision_mode
            ):
                continue
            attempts += 1
            result = resolve_attack(attacker, defender, p, params.payoff, world.rng)
            if result.succeeded:
                wins += 1
                stolen += result.amount_stolen
            else:
                punished += result.amount_punished
        for d in world.defenders:
            if d.alive and d.assets < REMOVAL_THRESHOLD:
                d.alive = False
    world.iteration += 1
    world.total_stolen += stolen
    world.total_punished += punished
    return IterationRecord(
        iteration=world.iteration,
        total_defender_assets=math.fsum(d.assets for d in world.defenders),
        alive_defenders=sum(1 for d in world.defenders if d.alive),
        stolen_this_iter=stolen,
        attacks_attempted=attempts,
        attacks_succeeded=wins,
        punished_this_iter=punished,
    )


def _boundary_delta(series: list[IterationRecord], k: int) -> float:
    """Change in total defender assets across iteration boundary k.

    The first record's boundary is against the pre-game total; theft is the
    only thing that moves defender assets, so that change is -stolen.
    """
    if k == 0:
        return -series[0].stolen_this_iter
    return series[k].total_defender_assets - series[k - 1].total_defender_assets


def check_termination(series: list[IterationRecord], config: SimConfig) -> Outcome | None:
    """Decide whether the run is over after the latest iteration.

    Total loss (no defender left) wins over convergence (|change in total
    defender assets| <= epsilon at each of the last delta boundaries), which
    wins over the iteration cap.
    """
    if not series:
        raise ValueError("check_termination needs at least one iteration record")
    last = series[-1]
    if last.alive_defenders == 0:
        return Outcome.TOTAL_LOSS
    n = len(series)
    if n >= config.delta and all(
        abs(_boundary_delta(series, k)) <= config.epsilon for k in range(n - config.delta, n)
    ):
        return Outcome.CONVERGED
    if last.iteration >= config.max_iterations:
        return Outcome.MAX_ITERATIONS
    return None


def run(params: ModelParams, config: SimConfig) -> SimResult:
    """Play one full game from a fresh world until it terminates."""
    world = init_world(params, config)
    series: list[IterationRecord] = []
    outcome = None
    while outcome is None:
        series.append(step(world))
        outcome = check_termination(series, config)
    return SimResult(
        outcome=outcome,
        iterations=len(series),
        series=tuple(series),
        initial_total=world.initial_total_assets,
        mandate_spend=world.total_mandate_spend,
        total_stolen=world.total_stolen,
    )
