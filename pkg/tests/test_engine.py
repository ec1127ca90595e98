from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mandatesim.core import (
    DEFAULT_PARAMS,
    REMOVAL_THRESHOLD,
    Attacker,
    DecisionMode,
    Defender,
    ModelParams,
    PairingRule,
    SimConfig,
    SuccessSpec,
    World,
    cost_to_attack,
    init_world,
)
from mandatesim.engine import (
    IterationRecord,
    Outcome,
    check_termination,
    decide_attack,
    expected_earnings,
    pair_attackers,
    resolve_attack,
    run,
    step,
)

ALWAYS = SuccessSpec(mean=1.0, sd=1e-12)


def make_world(
    attacker_assets: list[float],
    defender_assets: list[float],
    *,
    pairing: PairingRule = PairingRule.RANDOM,
    params: ModelParams = DEFAULT_PARAMS,
    seed: int = 0,
) -> World:
    """Hand-built world for pairing and resolution tests."""
    defenders = [
        Defender(id=i, initial_assets=a, assets=a, cost_to_attack=cost_to_attack(a, params))
        for i, a in enumerate(defender_assets)
    ]
    attackers = [Attacker(id=i, assets=a) for i, a in enumerate(attacker_assets)]
    config = SimConfig(n_defenders=max(len(defender_assets), 1), seed=seed, pairing=pairing)
    return World(
        params=params,
        config=config,
        defenders=defenders,
        attackers=attackers,
        rng=np.random.default_rng(seed),
    )


def record(
    iteration: int,
    total: float,
    alive: int,
    stolen: float = 0.0,
) -> IterationRecord:
    return IterationRecord(
        iteration=iteration,
        total_defender_assets=total,
        alive_defenders=alive,
        stolen_this_iter=stolen,
        attacks_attempted=0,
        attacks_succeeded=0,
        punished_this_iter=0.0,
    )


def test_expected_earnings_is_simple_product() -> None:
    assert expected_earnings(1000.0, 0.8, 0.39) == pytest.approx(312.0)
    assert expected_earnings(0.0, 0.8, 0.39) == 0.0


@pytest.mark.parametrize(
    "expected,cost,assets,rational,literal",
    [
        (500.0, 400.0, 1000.0, True, False),
        (300.0, 400.0, 1000.0, False, True),
        (500.0, 400.0, 400.0, False, False),
        (500.0, 400.0, 300.0, False, False),
        (400.0, 400.0, 1000.0, False, False),
        (0.0, 0.0, 1000.0, False, False),
    ],
)
def test_decide_attack_truth_table(
    expected: float, cost: float, assets: float, rational: bool, literal: bool
) -> None:
    assert decide_attack(expected, cost, assets, DecisionMode.RATIONAL) is rational
    assert decide_attack(expected, cost, assets, DecisionMode.LITERAL) is literal


def test_decide_attack_defaults_to_rational() -> None:
    assert decide_attack(500.0, 400.0, 1000.0) is True
    assert decide_attack(300.0, 400.0, 1000.0) is False


def test_resolve_attack_success_moves_exact_payoff_share() -> None:
    world = make_world([500.0], [1000.0])
    attacker, defender = world.attackers[0], world.defenders[0]
    out = resolve_attack(attacker, defender, 1.0, 0.8, world.rng)
    assert out.succeeded
    assert out.amount_stolen == pytest.approx(800.0)
    assert defender.assets == pytest.approx(200.0)
    assert attacker.assets == pytest.approx(1300.0)
    assert attacker.active


def test_resolve_attack_failure_burns_cost_and_can_deactivate() -> None:
    world = make_world([100.0], [1000.0])
    attacker, defender = world.attackers[0], world.defenders[0]
    cost = defender.cost_to_attack
    out = resolve_attack(attacker, defender, 0.0, 0.8, world.rng)
    assert not out.succeeded
    assert out.amount_punished == pytest.approx(cost)
    assert defender.assets == pytest.approx(1000.0)
    assert attacker.assets == pytest.approx(100.0 - cost)
    assert not attacker.active


def test_resolve_attack_failure_keeps_rich_attacker_active() -> None:
    world = make_world([10_000.0], [1000.0])
    attacker, defender = world.attackers[0], world.defenders[0]
    resolve_attack(attacker, defender, 0.0, 0.8, world.rng)
    assert attacker.active
    assert attacker.assets == pytest.approx(10_000.0 - defender.cost_to_attack)


def test_resolve_attack_full_payoff_empties_defender() -> None:
    world = make_world([500.0], [1000.0])
    out = resolve_attack(world.attackers[0], world.defenders[0], 1.0, 1.0, world.rng)
    assert out.amount_stolen == pytest.approx(1000.0)
    assert world.defenders[0].assets == 0.0


def test_resolve_attack_success_rate_tracks_probability() -> None:
    rng = np.random.default_rng(17)
    wins = 0
    trials = 20_000
    for _ in range(trials):
        attacker = Attacker(id=0, assets=1e12)
        defender = Defender(id=0, initial_assets=1.0, assets=1.0, cost_to_attack=0.5)
        if resolve_attack(attacker, defender, 0.39, 0.8, rng).succeeded:
            wins += 1
    assert wins / trials == pytest.approx(0.39, abs=0.01)


assets_lists = st.lists(
    st.floats(min_value=0.02, max_value=1e6, allow_nan=False), min_size=0, max_size=12
)


@settings(max_examples=150)
@given(att=assets_lists, dfd=assets_lists, data=st.data())
def test_pairing_is_injective_and_covers_min_side(
    att: list[float], dfd: list[float], data: st.DataObject
) -> None:
    rule = data.draw(st.sampled_from(list(PairingRule)))
    world = make_world(att, dfd, pairing=rule)
    for i in data.draw(st.sets(st.integers(0, len(att) - 1)) if att else st.just(set())):
        world.attackers[i].active = False
    for j in data.draw(st.sets(st.integers(0, len(dfd) - 1)) if dfd else st.just(set())):
        world.defenders[j].alive = False
    active = [a.id for a in world.attackers if a.active]
    alive = [d.id for d in world.defenders if d.alive]
    pairs = pair_attackers(world, world.rng)
    assert len(pairs) == min(len(active), len(alive))
    assert len({a for a, _ in pairs}) == len(pairs)
    assert len({d for _, d in pairs}) == len(pairs)
    assert all(a in set(active) for a, _ in pairs)
    assert all(d in set(alive) for _, d in pairs)


def test_random_pairing_is_uniform_on_two_by_two() -> None:
    world = make_world([10.0, 20.0], [30.0, 40.0])
    rng = np.random.default_rng(99)
    hits = 0
    trials = 4000
    for _ in range(trials):
        pairs = dict(pair_attackers(world, rng))
        if pairs[0] == 0:
            hits += 1
    assert hits / trials == pytest.approx(0.5, abs=0.025)


def test_random_pairing_surplus_choice_is_uniform() -> None:
    world = make_world([10.0, 20.0, 30.0], [40.0])
    rng = np.random.default_rng(7)
    counts = {0: 0, 1: 0, 2: 0}
    trials = 6000
    for _ in range(trials):
        ((attacker_id, _),) = pair_attackers(world, rng)
        counts[attacker_id] += 1
    for n in counts.values():
        assert n / trials == pytest.approx(1.0 / 3.0, abs=0.025)


def test_random_pairing_lists_attackers_in_id_order() -> None:
    world = make_world([5.0, 4.0, 3.0, 2.0, 1.0], [10.0, 20.0])
    rng = np.random.default_rng(3)
    for _ in range(50):
        pairs = pair_attackers(world, rng)
        ids = [a for a, _ in pairs]
        assert ids == sorted(ids)


def test_wealthiest_pairing_matches_rank_order() -> None:
    world = make_world(
        [50.0, 900.0, 300.0],
        [10.0, 700.0, 40.0, 200.0],
        pairing=PairingRule.WEALTHIEST,
    )
    pairs = pair_attackers(world, world.rng)
    assert pairs == [(1, 1), (2, 3), (0, 2)]


def test_wealthiest_pairing_idles_poorest_surplus() -> None:
    world = make_world(
        [5.0, 80.0, 1.0, 40.0],
        [100.0, 600.0],
        pairing=PairingRule.WEALTHIEST,
    )
    pairs = pair_attackers(world, world.rng)
    assert pairs == [(1, 1), (3, 0)]


def test_wealthiest_pairing_breaks_ties_by_id() -> None:
    world = make_world(
        [7.0, 7.0],
        [9.0, 9.0],
        pairing=PairingRule.WEALTHIEST,
    )
    assert pair_attackers(world, world.rng) == [(0, 0), (1, 1)]


def test_pairing_empty_sides_yield_no_pairs() -> None:
    world = make_world([], [10.0])
    assert pair_attackers(world, world.rng) == []
    world = make_world([10.0], [])
    assert pair_attackers(world, world.rng) == []


def test_step_books_balance_each_iteration() -> None:
    world = init_world(DEFAULT_PARAMS, SimConfig(n_defenders=30, seed=5))
    for _ in range(60):
        d_before = math.fsum(d.assets for d in world.defenders)
        a_before = math.fsum(a.assets for a in world.attackers)
        rec = step(world)
        d_after = math.fsum(d.assets for d in world.defenders)
        a_after = math.fsum(a.assets for a in world.attackers)
        scale = max(1.0, d_before, a_before)
        assert abs((d_after - d_before) + rec.stolen_this_iter) <= 1e-9 * scale
        assert abs((a_after - a_before) - rec.stolen_this_iter + rec.punished_this_iter) <= 1e-9 * scale
        assert rec.attacks_succeeded <= rec.attacks_attempted
        assert rec.iteration == world.iteration
        if rec.alive_defenders == 0:
            break


def test_step_removes_defender_left_below_threshold() -> None:
    world = make_world([1e6], [0.012], params=DEFAULT_PARAMS.replace(payoff=0.8))
    world.defenders[0].cost_to_attack = 0.0
    world = World(
        params=world.params,
        config=SimConfig(n_defenders=1, seed=0, success=ALWAYS),
        defenders=world.defenders,
        attackers=world.attackers,
        rng=world.rng,
    )
    rec = step(world)
    assert rec.attacks_succeeded == 1
    assert not world.defenders[0].alive
    assert world.defenders[0].assets == pytest.approx(0.012 * 0.2)
    assert rec.alive_defenders == 0


def test_step_without_active_attackers_is_quiet() -> None:
    world = init_world(DEFAULT_PARAMS.replace(attackers=0.0), SimConfig(n_defenders=10, seed=1))
    rec = step(world)
    assert rec.attacks_attempted == 0
    assert rec.stolen_this_iter == 0.0
    assert rec.alive_defenders == 10
    assert rec.iteration == 1


def test_check_termination_requires_records() -> None:
    with pytest.raises(ValueError):
        check_termination([], SimConfig())


def test_total_loss_beats_convergence() -> None:
    config = SimConfig(n_defenders=5, epsilon=100.0, delta=2, max_iterations=100)
    series = [record(1, 50.0, 2, stolen=1.0), record(2, 0.4, 0, stolen=1.0)]
    assert check_termination(series, config) is Outcome.TOTAL_LOSS


def test_convergence_needs_full_quiet_window() -> None:
    config = SimConfig(n_defenders=5, epsilon=10.0, delta=3, max_iterations=100)
    quiet = [
        record(1, 1000.0, 5, stolen=5.0),
        record(2, 995.0, 5),
        record(3, 992.0, 5),
        record(4, 991.0, 5),
    ]
    assert check_termination(quiet, config) is Outcome.CONVERGED
    loud = [
        record(1, 1000.0, 5, stolen=5.0),
        record(2, 900.0, 5),
        record(3, 899.0, 5),
        record(4, 898.0, 5),
    ]
    assert check_termination(loud, config) is None


def test_convergence_counts_first_boundary_as_theft() -> None:
    config = SimConfig(n_defenders=5, epsilon=10.0, delta=1, max_iterations=100)
    assert check_termination([record(1, 995.0, 5, stolen=5.0)], config) is Outcome.CONVERGED
    assert check_termination([record(1, 950.0, 5, stolen=50.0)], config) is None


def test_short_series_never_converges() -> None:
    config = SimConfig(n_defenders=5, epsilon=100.0, delta=3, max_iterations=100)
    assert check_termination([record(1, 1000.0, 5)], config) is None
    assert check_termination([record(1, 1000.0, 5), record(2, 1000.0, 5)], config) is None


def test_iteration_cap_fires_when_never_quiet() -> None:
    config = SimConfig(n_defenders=5, epsilon=10.0, delta=2, max_iterations=3)
    series = [
        record(1, 1000.0, 5, stolen=100.0),
        record(2, 900.0, 5),
        record(3, 800.0, 5),
    ]
    assert check_termination(series, config) is Outcome.MAX_ITERATIONS


def test_run_without_attackers_converges_at_exactly_delta() -> None:
    result = run(DEFAULT_PARAMS.replace(attackers=0.0), SimConfig(n_defenders=20, seed=4))
    assert result.outcome is Outcome.CONVERGED
    assert result.iterations == 50
    assert result.total_stolen == 0.0
    assert all(r.attacks_attempted == 0 for r in result.series)
    assert result.series[-1].alive_defenders == 20


def test_run_zero_payoff_rational_never_attacks() -> None:
    result = run(DEFAULT_PARAMS.replace(payoff=0.0), SimConfig(n_defenders=20, seed=4))
    assert result.outcome is Outcome.CONVERGED
    assert sum(r.attacks_attempted for r in result.series) == 0
    assert result.total_stolen == 0.0


def test_run_zero_payoff_literal_attacks_but_steals_nothing() -> None:
    config = SimConfig(n_defenders=40, seed=4, decision_mode=DecisionMode.LITERAL)
    result = run(DEFAULT_PARAMS.replace(payoff=0.0), config)
    assert sum(r.attacks_attempted for r in result.series) > 0
    assert result.total_stolen == 0.0
    assert result.outcome is Outcome.CONVERGED
    assert result.iterations == 50


def test_literal_mode_attacks_where_rational_declines() -> None:
    params = DEFAULT_PARAMS.replace(payoff=0.1, success=0.5, effectiveness=0.0, inequality=1.0)
    rational = run(params, SimConfig(n_defenders=40, seed=6))
    literal = run(params, SimConfig(n_defenders=40, seed=6, decision_mode=DecisionMode.LITERAL))
    assert sum(r.attacks_attempted for r in rational.series) == 0
    assert sum(r.attacks_attempted for r in literal.series) > 0


def test_run_is_deterministic_per_seed() -> None:
    config = SimConfig(n_defenders=50, seed=11)
    assert run(DEFAULT_PARAMS, config) == run(DEFAULT_PARAMS, config)


def test_run_varies_across_seeds() -> None:
    a = run(DEFAULT_PARAMS, SimConfig(n_defenders=50, seed=11))
    b = run(DEFAULT_PARAMS, SimConfig(n_defenders=50, seed=12))
    assert a.series != b.series


def test_run_conserves_assets_end_to_end() -> None:
    result = run(DEFAULT_PARAMS.replace(investment=0.3), SimConfig(n_defenders=50, seed=3))
    final_total = result.series[-1].total_defender_assets
    assert final_total == pytest.approx(
        result.initial_total - result.mandate_spend - result.total_stolen, rel=1e-12
    )
    assert result.total_stolen == pytest.approx(
        math.fsum(r.stolen_this_iter for r in result.series), rel=1e-12
    )


def test_run_full_mandate_is_immediate_total_loss() -> None:
    result = run(DEFAULT_PARAMS.replace(investment=1.0), SimConfig(n_defenders=20, seed=9))
    assert result.outcome is Outcome.TOTAL_LOSS
    assert result.iterations == 1
    assert result.total_stolen == 0.0


def test_run_hits_iteration_cap_when_theft_never_quiets() -> None:
    params = ModelParams(
        attackers=1.0,
        effectiveness=0.0,
        inequality=1.0,
        investment=0.0,
        payoff=0.5,
        success=0.0,
    )
    config = SimConfig(
        n_defenders=20, seed=2, epsilon=0.0, delta=10, max_iterations=10, success=ALWAYS
    )
    result = run(params, config)
    assert result.outcome is Outcome.MAX_ITERATIONS
    assert result.iterations == 10
    assert result.series[-1].alive_defenders > 0


def test_total_loss_matches_geometric_decay_oracle() -> None:
    params = ModelParams(
        attackers=1.0,
        effectiveness=0.0,
        inequality=1.0,
        investment=0.0,
        payoff=0.8,
        success=0.0,
    )
    config = SimConfig(n_defenders=50, seed=77, success=ALWAYS)
    world = init_world(params, config)
    expected_iters = 0
    per_defender_theft = []
    dust = []
    for d in world.defenders:
        assets = d.assets
        k = 0
        while assets >= REMOVAL_THRESHOLD:
            taken = params.payoff * assets
            assets -= taken
            k += 1
        expected_iters = max(expected_iters, k)
        per_defender_theft.append(d.assets - assets)
        dust.append(assets)
    result = run(params, config)
    assert result.outcome is Outcome.TOTAL_LOSS
    assert result.iterations == expected_iters
    assert result.total_stolen == pytest.approx(math.fsum(per_defender_theft), rel=1e-12)
    assert result.series[-1].total_defender_assets == pytest.approx(math.fsum(dust), rel=1e-9)
    assert result.series[0].attacks_succeeded == 50
