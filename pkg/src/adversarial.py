# coding:utf-8
"""Adversarial (IPM) imitation: sign-function witnesses and small min-max solvers.

Vanilla mode keeps the population frozen to the expert's, so the inner
problem is an ordinary finite-horizon MDP solved with best_response and the
outer one a linear program over the occupancies found so far. MFC mode
couples the population to the candidate policy; it is solved by enumerating
a finite policy family and computing the inner maximum exactly, min and max
are never swapped.
"""
import logging

import numpy as np
from scipy.optimize import linprog

from mfg import (
    InvalidInputError,
    NonStationaryReward,
    PolicySequence,
    best_response,
    deterministic_policies,
    mean_field_flow,
    population_flow,
)

logger = logging.getLogger(__name__)

MAX_ENUMERATED_POLICIES = 4096
HULL_TOL = 1e-12


class IpmResult:
    def __init__(self, distance, witness, gap_check, per_step):
        self.distance = distance
        self.witness = witness
        self.gap_check = gap_check
        self.per_step = per_step

    def to_dict(self):
        return {
            "distance": self.distance,
            "per_step": self.per_step.tolist(),
            "gap_check": self.gap_check,
            "witness": self.witness.values.tolist(),
        }


class MinMaxTrace:
    def __init__(self, mode):
        self.mode = mode
        self.iterations = []
        self.converged = False
        self.final_policy = None
        self.final_objective = None

    def record(self, policy, witness, objective, **extra):
        entry = {
            "iteration": len(self.iterations),
            "objective": float(objective),
            "policy_label": policy.label,
            "policy": policy.to_list(),
            "witness": witness.values.tolist(),
        }
        entry.update(extra)
        self.iterations.append(entry)
        if self.final_objective is None or objective < self.final_objective:
            self.final_objective = float(objective)
            self.final_policy = policy

    @property
    def objectives(self):
        return [it["objective"] for it in self.iterations]

    def to_dict(self):
        return {
            "mode": self.mode,
            "converged": self.converged,
            "final_objective": self.final_objective,
            "final_policy_label": self.final_policy.label,
            "final_policy": self.final_policy.to_list(),
            "iterations": self.iterations,
        }


class PolicyFamily:
    """A finite, ordered set of candidate policies."""

    def __init__(self, policies, description="explicit"):
        self.policies = list(policies)
        self.description = description

    def __len__(self):
        return len(self.policies)

    def __iter__(self):
        return iter(self.policies)

    @classmethod
    def deterministic(cls, num_states, num_actions, horizon, limit=MAX_ENUMERATED_POLICIES):
        size = num_actions ** (num_states * horizon)
        if size > limit:
            raise InvalidInputError(
                "{} deterministic policies exceed the enumeration limit {}; supply a policy grid".format(size, limit)
            )
        return cls(deterministic_policies(num_states, num_actions, horizon), description="deterministic")


def _occupancies(flow):
    return np.asarray(getattr(flow, "state_action_dists", flow), dtype=float)


def ipm_witness(expert_occupancies, policy_occupancies):
    """Optimal f in [-1, 1] for sum_n ||mu_n^E - mu_n^pi||_1: f = sign(mu^E - mu^pi)."""
    mu_e = _occupancies(expert_occupancies)
    mu_p = _occupancies(policy_occupancies)
    if mu_e.shape != mu_p.shape or mu_e.ndim != 3:
        raise InvalidInputError("occupancy shapes differ: {} vs {}".format(mu_e.shape, mu_p.shape))
    diff = mu_e - mu_p
    witness = NonStationaryReward(np.sign(diff))
    per_step = np.abs(diff).sum(axis=(1, 2))
    distance = float(per_step.sum())
    value_gap = float(np.sum(mu_e * witness.values) - np.sum(mu_p * witness.values))
    return IpmResult(distance, witness, abs(distance - value_gap), per_step)


def occupancy_to_policy(occupancies, label=None):
    """pi_n(a|s) = mu_n(s, a) / rho_n(s); unvisited states get the uniform row."""
    mu = np.asarray(occupancies, dtype=float)
    visits = mu.sum(axis=2, keepdims=True)
    probs = np.where(visits > 0, mu / np.where(visits > 0, visits, 1.0), 1.0 / mu.shape[2])
    probs = probs / probs.sum(axis=2, keepdims=True)
    return PolicySequence(probs, label=label)


def _hull_projection(target, vertices):
    """Closest point of conv(vertices) to target in l1, and the witness attaining it.

    Returns (weights, distance, witness) where witness f in [-1, 1] satisfies
    <f, target> - max_k <f, v_k> = distance.
    """
    t = target.reshape(-1)
    v = np.stack([x.reshape(-1) for x in vertices], axis=1)
    dim, count = v.shape
    eye = np.eye(dim)
    # variables (weights, slack): minimise sum slack with |t - V w| <= slack, w on the simplex
    primal = linprog(
        np.concatenate([np.zeros(count), np.ones(dim)]),
        A_ub=np.block([[-v, -eye], [v, -eye]]),
        b_ub=np.concatenate([-t, t]),
        A_eq=np.concatenate([np.ones(count), np.zeros(dim)])[None, :],
        b_eq=[1.0],
        bounds=[(0.0, None)] * (count + dim),
        method="highs",
    )
    # variables (f, z): maximise <f, t> - z with <f, v_k> <= z
    dual = linprog(
        np.concatenate([-t, [1.0]]),
        A_ub=np.hstack([v.T, -np.ones((count, 1))]),
        b_ub=np.zeros(count),
        bounds=[(-1.0, 1.0)] * dim + [(None, None)],
        method="highs",
    )
    if primal.status != 0 or dual.status != 0:
        raise RuntimeError("occupancy projection LP failed: {} / {}".format(primal.message, dual.message))
    weights = np.clip(primal.x[:count], 0.0, None)
    weights = weights / weights.sum()
    witness = NonStationaryReward(np.clip(dual.x[:dim], -1.0, 1.0).reshape(target.shape))
    return weights, float(primal.fun), witness


def solve_vanilla_adversarial(mfg, expert, max_iters=100, tolerance=1e-6, initial_policy=None):
    """Witness / best-response scheme with the population frozen to the expert.

    The occupancies reachable under rho^E form a polytope whose vertices are
    best responses. Each round projects the expert occupancy onto the hull of
    the vertices found so far; the dual of that projection is the witness f,
    and the best response to +f is the next vertex. When no vertex beats the
    hull under f the hull optimum is the global one. The trace is converged
    only once the distance is within tolerance.
    """
    if max_iters < 1:
        raise InvalidInputError("max_iters must be >= 1, got {}".format(max_iters))
    mfg.check_policy(expert, "expert policy")
    expert_flow = population_flow(mfg, expert)
    rho_e, target = expert_flow.state_dists, expert_flow.state_action_dists
    policy = initial_policy if initial_policy is not None else PolicySequence.uniform(
        mfg.horizon, mfg.num_states, mfg.num_actions
    )
    mfg.check_policy(policy, "initial policy")

    trace = MinMaxTrace("vanilla")
    vertices = [mean_field_flow(mfg, policy, rho_e).state_action_dists]
    _, _, witness = _hull_projection(target, vertices)
    for it in range(max_iters):
        mu = mean_field_flow(mfg, policy, rho_e).state_action_dists
        distance = float(np.abs(target - mu).sum())
        trace.record(policy, witness, distance, vertices=len(vertices))
        logger.debug("vanilla iteration %d: objective %.6g over %d vertices", it, distance, len(vertices))
        if distance <= tolerance:
            trace.converged = True
            break
        responder, _ = best_response(mfg, rho_e, reward_override=witness)
        vertex = mean_field_flow(mfg, responder, rho_e).state_action_dists
        hull_best = max(float(np.sum(witness.values * v)) for v in vertices)
        if float(np.sum(witness.values * vertex)) <= hull_best + HULL_TOL:
            logger.warning("vanilla solver: no improving best response, stopping at objective %.6g", distance)
            break
        vertices.append(vertex)
        weights, _, witness = _hull_projection(target, vertices)
        mixture = np.tensordot(weights, np.stack(vertices), axes=1)
        policy = occupancy_to_policy(mixture, label="vanilla_iter{}".format(it + 1))
    logger.info(
        "vanilla solver: %d iterations, objective %.6g, converged %s",
        len(trace.iterations), trace.final_objective, trace.converged,
    )
    return trace


def solve_mfc_adversarial(mfg, expert, policy_family, max_iters=None, tolerance=0.0):
    """min over a finite family of max_f (V_f(pi^E, rho^E) - V_f(pi, rho^(pi))).

    Candidates are visited in family order; the first minimiser wins. The scan
    stops early once a candidate is within tolerance, and max_iters caps the
    number of candidates visited (the trace is then not converged).
    """
    if max_iters is not None and max_iters < 1:
        raise InvalidInputError("max_iters must be >= 1, got {}".format(max_iters))
    mfg.check_policy(expert, "expert policy")
    target = population_flow(mfg, expert).state_action_dists
    trace = MinMaxTrace("mfc")
    exhausted = True
    for idx, candidate in enumerate(policy_family):
        if max_iters is not None and idx >= max_iters:
            exhausted = False
            break
        mfg.check_policy(candidate, "candidate policy")
        ipm = ipm_witness(target, population_flow(mfg, candidate))
        trace.record(candidate, ipm.witness, ipm.distance)
        if ipm.distance <= tolerance:
            break
    if not trace.iterations:
        raise InvalidInputError("policy family is empty")
    trace.converged = exhausted
    logger.info(
        "mfc solver: %d candidates, best %s with objective %.6g",
        len(trace.iterations), trace.final_policy.label, trace.final_objective,
    )
    return trace


def mfc_duality_gap_estimate(mfg, expert, policy_family):
    """Compares min-max with max-min over the family, using the candidates' witnesses as f set.

    Returns a dict with both values and their difference, an upper estimate
    of the family's min-max/max-min gap.
    """
    mfg.check_policy(expert, "expert policy")
    target = population_flow(mfg, expert).state_action_dists.reshape(-1)
    gaps = np.array([target - population_flow(mfg, c).state_action_dists.reshape(-1) for c in policy_family])
    if gaps.size == 0:
        raise InvalidInputError("policy family is empty")
    witnesses = np.sign(gaps)
    payoff = gaps @ witnesses.T
    min_max = float(np.abs(gaps).sum(axis=1).min())
    max_min = float(payoff.min(axis=0).max())
    return {"min_max": min_max, "max_min": max_min, "gap": min_max - max_min}
