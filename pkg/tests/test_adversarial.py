import json
import os

import numpy as np
import pytest

from adversarial import (
    PolicyFamily,
    ipm_witness,
    mfc_duality_gap_estimate,
    occupancy_to_policy,
    solve_mfc_adversarial,
    solve_vanilla_adversarial,
)
from attractor import AttractorParams, alpha_family, alpha_grid, alpha_policy, build_attractor, closed_form_profile
from game_spec import load_game_spec, random_coupled_game, random_tabular_game
from metrics import mfc_adv_error, vanilla_adv_error
from mfg import InvalidInputError, PolicySequence, population_flow


def test_witness_of_identical_occupancies(attractor, half):
    flow = population_flow(attractor, half)
    result = ipm_witness(flow, flow)
    assert result.distance == 0.0
    assert np.all(result.witness.values == 0.0)


def test_witness_on_attractor(attractor, expert, half):
    result = ipm_witness(population_flow(attractor, expert), population_flow(attractor, half))
    assert result.distance == pytest.approx(4.375, abs=1e-12)
    assert result.per_step == pytest.approx([1.0, 1.5, 1.875], abs=1e-12)
    assert result.gap_check <= 1e-12


def test_witness_identity_on_random_pairs():
    rng = np.random.default_rng(0)
    for _ in range(200):
        num_states, num_actions, horizon = rng.integers(1, 5), rng.integers(1, 5), rng.integers(1, 6)
        mfg = random_coupled_game(rng, num_states, num_actions, horizon)
        first = population_flow(mfg, PolicySequence.random(rng, horizon, num_states, num_actions))
        second = population_flow(mfg, PolicySequence.random(rng, horizon, num_states, num_actions))
        result = ipm_witness(first, second)
        assert result.gap_check <= 1e-12
        assert set(np.unique(result.witness.values)) <= {-1.0, 0.0, 1.0}


def test_witness_shape_mismatch(attractor, expert):
    with pytest.raises(InvalidInputError):
        ipm_witness(population_flow(attractor, expert), np.zeros((2, 2, 2)))


def test_occupancy_to_policy_fills_unvisited_rows():
    mu = np.array([[[0.25, 0.75], [0.0, 0.0]]])
    policy = occupancy_to_policy(mu)
    assert policy.probabilities[0, 0] == pytest.approx([0.25, 0.75])
    assert np.all(policy.probabilities[0, 1] == 0.5)


def test_vanilla_from_expert_stops_immediately(attractor, expert):
    trace = solve_vanilla_adversarial(attractor, expert, max_iters=10, tolerance=1e-6, initial_policy=expert)
    assert len(trace.iterations) == 1
    assert trace.converged
    assert trace.final_objective == 0.0


def test_vanilla_beats_alpha_grid(attractor, expert):
    trace = solve_vanilla_adversarial(attractor, expert, max_iters=50, tolerance=1e-6)
    grid_best = min(vanilla_adv_error(attractor, expert, p).per_step.sum() for p in alpha_family(alpha_grid(0.01), 3))
    assert trace.final_objective <= grid_best + 1e-9
    assert trace.final_objective <= 1e-6
    assert all(b <= a + 1e-9 for a, b in zip(trace.objectives, trace.objectives[1:]))


def test_vanilla_on_tabular_game_matches_enumeration(data_dir):
    mfg, expert = load_game_spec(os.path.join(data_dir, "tabular-2x2x2.json"))
    trace = solve_vanilla_adversarial(mfg, expert, max_iters=100, tolerance=1e-6)
    candidates = list(PolicyFamily.deterministic(2, 2, 2))
    mixtures = [
        PolicySequence(w * a.probabilities + (1 - w) * b.probabilities)
        for a in candidates[::3]
        for b in candidates[::5]
        for w in (0.25, 0.5, 0.75)
    ]
    brute = min(vanilla_adv_error(mfg, expert, p).per_step.sum() for p in candidates + mixtures)
    assert abs(trace.final_objective - brute) <= 1e-6
    assert trace.converged


def test_vanilla_never_worse_than_its_start():
    rng = np.random.default_rng(1)
    mfg = random_coupled_game(rng, 3, 2, 3)
    expert = PolicySequence.random(rng, 3, 3, 2)
    trace = solve_vanilla_adversarial(mfg, expert, max_iters=20, tolerance=1e-9)
    assert trace.final_objective <= trace.objectives[0]
    assert trace.final_objective == min(trace.objectives)


@pytest.mark.parametrize("draw", [random_tabular_game, random_coupled_game])
def test_vanilla_reaches_stochastic_experts(draw):
    rng = np.random.default_rng(11)
    for _ in range(20):
        mfg = draw(rng, 2, 2, 2)
        expert = PolicySequence.random(rng, 2, 2, 2)
        trace = solve_vanilla_adversarial(mfg, expert, max_iters=100, tolerance=1e-6)
        assert trace.final_objective <= 1e-6
        assert trace.converged


def test_vanilla_reaches_a_stochastic_expert_on_a_longer_horizon():
    rng = np.random.default_rng(12)
    mfg = random_coupled_game(rng, 3, 2, 4)
    expert = PolicySequence.random(rng, 4, 3, 2)
    trace = solve_vanilla_adversarial(mfg, expert, max_iters=200, tolerance=1e-6)
    assert trace.final_objective <= 1e-6
    assert trace.converged


def test_vanilla_out_of_iterations_is_not_converged():
    rng = np.random.default_rng(13)
    mfg = random_tabular_game(rng, 2, 2, 2)
    expert = PolicySequence.random(rng, 2, 2, 2)
    trace = solve_vanilla_adversarial(mfg, expert, max_iters=1, tolerance=1e-6)
    assert len(trace.iterations) == 1
    assert trace.final_objective > 1e-6
    assert not trace.converged


def test_vanilla_needs_an_iteration(attractor, expert):
    with pytest.raises(InvalidInputError):
        solve_vanilla_adversarial(attractor, expert, max_iters=0)


def test_mfc_finds_the_expert_on_the_alpha_grid():
    mfg = build_attractor(2.0, 25)
    trace = solve_mfc_adversarial(mfg, alpha_policy(0.0, 25), alpha_family(alpha_grid(0.01), 25))
    assert trace.final_policy.label == "alpha=0"
    assert trace.final_objective == 0.0


def test_mfc_without_expert_picks_smallest_closed_form_error():
    mfg = build_attractor(1.0, 10)
    alphas = [0.6, 0.2, 0.4, 1.0]
    trace = solve_mfc_adversarial(mfg, alpha_policy(0.0, 10), alpha_family(alphas, 10))
    expected = min(alphas, key=lambda a: sum(closed_form_profile(AttractorParams(1.0, 10, a)).eps_mfc))
    assert trace.final_policy.label == "alpha={:.6g}".format(expected)
    assert trace.converged
    assert len(trace.iterations) == len(alphas)


def test_mfc_objective_is_family_minimum():
    rng = np.random.default_rng(2)
    mfg = random_coupled_game(rng, 2, 2, 3)
    expert = PolicySequence.random(rng, 3, 2, 2)
    family = PolicyFamily.deterministic(2, 2, 3)
    trace = solve_mfc_adversarial(mfg, expert, family)
    assert trace.final_objective == pytest.approx(
        min(mfc_adv_error(mfg, expert, p).per_step.sum() for p in family), abs=1e-12
    )
    estimate = mfc_duality_gap_estimate(mfg, expert, family)
    assert estimate["min_max"] == pytest.approx(trace.final_objective)
    assert estimate["gap"] >= -1e-12


def test_mfc_iteration_cap(attractor, expert):
    family = alpha_family([0.5, 0.3, 0.0], 3)
    trace = solve_mfc_adversarial(attractor, expert, family, max_iters=2)
    assert len(trace.iterations) == 2
    assert not trace.converged
    assert trace.final_policy.label == "alpha=0.3"


def test_mfc_empty_family(attractor, expert):
    with pytest.raises(InvalidInputError):
        solve_mfc_adversarial(attractor, expert, PolicyFamily([]))


def test_vanilla_and_mfc_objectives_coincide_without_coupling():
    rng = np.random.default_rng(3)
    mfg = random_tabular_game(rng, 2, 2, 3)
    expert = PolicySequence.random(rng, 3, 2, 2)
    for candidate in PolicyFamily.deterministic(2, 2, 3):
        vanilla = vanilla_adv_error(mfg, expert, candidate).per_step.sum()
        mfc = mfc_adv_error(mfg, expert, candidate).per_step.sum()
        assert vanilla == pytest.approx(mfc, abs=1e-12)


def test_deterministic_family_limit():
    with pytest.raises(InvalidInputError):
        PolicyFamily.deterministic(3, 3, 4)
    assert len(PolicyFamily.deterministic(2, 2, 2)) == 16


def test_trace_serialises(attractor, expert):
    trace = solve_vanilla_adversarial(attractor, expert, max_iters=5)
    payload = json.loads(json.dumps(trace.to_dict()))
    assert payload["mode"] == "vanilla"
    assert [it["iteration"] for it in payload["iterations"]] == list(range(len(trace.iterations)))
