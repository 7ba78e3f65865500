import numpy as np
import pytest

from attractor import (
    AttractorParams,
    alpha_family,
    alpha_grid,
    alpha_policy,
    build_attractor,
    closed_form_profile,
)
from metrics import bc_error, mfc_adv_error, vanilla_adv_error
from mfg import InvalidInputError, exploitability, population_flow, single_agent_flow, social_value

LIPSCHITZ_GRID = [0.01, 0.1, 0.5, 1.0, 2.0]
HORIZON_GRID = [3, 25, 50, 75, 100]


def test_kernel_matches_formulas():
    mfg = build_attractor(2.0, 3)
    assert mfg.transition(np.array([1.0, 0.0]))[0, 0, 1] == 0.0
    assert mfg.transition(np.array([0.0, 1.0]))[0, 0, 1] == 1.0
    assert mfg.transition(np.array([0.8, 0.2]))[0, 0, 1] == pytest.approx(0.4)
    assert np.all(mfg.transition(np.array([0.5, 0.5]))[0, 1] == [0.0, 1.0])
    assert np.all(mfg.transition(np.array([0.5, 0.5]))[1, :, 1] == 1.0)
    assert np.all(mfg.reward_at(np.array([0.3, 0.7]))[1] == -1.0)
    assert np.all(mfg.reward_at(np.array([0.3, 0.7]))[0] == 0.0)


def test_build_attractor_validation():
    with pytest.raises(InvalidInputError):
        build_attractor(-0.5, 3)
    with pytest.raises(InvalidInputError):
        build_attractor(1.0, 0)


def test_alpha_policy():
    assert np.all(alpha_policy(0.0, 4).probabilities[:, 0] == [1.0, 0.0])
    assert np.all(alpha_policy(1.0, 4).probabilities[:, 0] == [0.0, 1.0])
    assert np.all(alpha_policy(0.5, 4).probabilities == 0.5)
    with pytest.raises(InvalidInputError):
        alpha_policy(1.5, 4)


def test_params_validation():
    with pytest.raises(InvalidInputError):
        AttractorParams(1.0, 3, -0.1)
    with pytest.raises(InvalidInputError):
        AttractorParams(1.0, 2.5, 0.1)


def test_closed_form_at_equilibrium():
    profile = closed_form_profile(AttractorParams(1.0, 10, 0.0))
    assert profile.nig == 0.0
    assert profile.exploitability == 0.0
    assert max(profile.eps_bc + profile.eps_vanilla + profile.eps_mfc) == 0.0


@pytest.mark.parametrize("lipschitz_l", LIPSCHITZ_GRID)
@pytest.mark.parametrize("horizon", HORIZON_GRID)
def test_closed_form_worst_case(lipschitz_l, horizon):
    assert closed_form_profile(AttractorParams(lipschitz_l, horizon, 1.0)).nig == horizon - 1


def test_closed_form_half_policy():
    profile = closed_form_profile(AttractorParams(1.0, 3, 0.5))
    assert profile.rho_pop_s1 == pytest.approx([0.0, 0.5, 0.875])
    assert profile.rho_expertpop_s1 == pytest.approx([0.0, 0.5, 0.75])
    assert max(profile.eps_vanilla) == pytest.approx(1.75)
    assert max(profile.eps_mfc) == pytest.approx(1.875)
    assert profile.nig == pytest.approx(1.375)
    assert profile.exploitability == pytest.approx(0.875)
    assert profile.eps_bc == [1.0, 1.0, 1.0]


@pytest.mark.parametrize("lipschitz_l", LIPSCHITZ_GRID)
@pytest.mark.parametrize("horizon", HORIZON_GRID)
def test_closed_form_matches_generic_pipeline(lipschitz_l, horizon):
    mfg = build_attractor(lipschitz_l, horizon)
    expert = alpha_policy(0.0, horizon)
    for alpha in alpha_grid(0.05):
        policy = alpha_policy(alpha, horizon)
        closed = closed_form_profile(AttractorParams(lipschitz_l, horizon, alpha))
        tol = 1e-10
        assert population_flow(mfg, policy).state_dists[:, 1] == pytest.approx(closed.rho_pop_s1, abs=tol)
        assert single_agent_flow(mfg, expert, policy).state_dists[:, 1] == pytest.approx(
            closed.rho_expertpop_s1, abs=tol
        )
        assert bc_error(mfg, expert, policy).per_step == pytest.approx(closed.eps_bc, abs=tol)
        assert vanilla_adv_error(mfg, expert, policy).per_step == pytest.approx(closed.eps_vanilla, abs=tol)
        assert mfc_adv_error(mfg, expert, policy).per_step == pytest.approx(closed.eps_mfc, abs=tol)
        assert exploitability(mfg, policy) == pytest.approx(closed.exploitability, abs=tol)
        value_loss = social_value(mfg, expert) - social_value(mfg, policy)
        assert value_loss == pytest.approx(closed.nig, abs=tol)


@pytest.mark.parametrize("lipschitz_l", LIPSCHITZ_GRID)
def test_nig_monotone_in_alpha(lipschitz_l):
    for horizon in HORIZON_GRID:
        nigs = [closed_form_profile(AttractorParams(lipschitz_l, horizon, a)).nig for a in alpha_grid(0.01)]
        assert all(b >= a - 1e-12 for a, b in zip(nigs, nigs[1:]))


def test_profile_sequences_are_monotone_and_bounded():
    profile = closed_form_profile(AttractorParams(0.5, 50, 0.3))
    for seq in (profile.rho_pop_s1, profile.rho_expertpop_s1, profile.rho_br_s1):
        assert all(0.0 <= r <= 1.0 for r in seq)
        assert all(b >= a - 1e-15 for a, b in zip(seq, seq[1:]))
    assert profile.nig == pytest.approx(sum(profile.rho_pop_s1), abs=1e-12)
    assert profile.exploitability <= profile.nig


def test_alpha_grid():
    grid = alpha_grid(0.01)
    assert len(grid) == 101
    assert grid[0] == 0.0 and grid[-1] == 1.0 and grid[50] == 0.5
    with pytest.raises(InvalidInputError):
        alpha_grid(0.3)


def test_alpha_family_labels():
    family = alpha_family([0.0, 0.5], 3)
    assert [p.label for p in family] == ["alpha=0", "alpha=0.5"]
