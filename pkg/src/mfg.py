# coding:utf-8
"""Finite-state, finite-horizon mean-field games.

A game is the tuple (S, A, P, r, H, rho0) where both the transition kernel P
and the reward r may depend on the population distribution. This module holds
the game/policy/flow containers and the exact (recursion based) computation of
population flows, single-agent flows, values, best responses and
exploitability, plus a mean-field-limit trajectory sampler.
"""

import itertools
import logging

import numpy as np

logger = logging.getLogger(__name__)

DIST_TOL = 1e-12


class InvalidInputError(ValueError):
    """Shape, horizon or range problem with user supplied data."""


class UnsupportedSettingError(ValueError):
    """A quantity was requested outside the regime it is defined in."""


class PreconditionError(ValueError):
    """A mathematical precondition of an operation does not hold."""


def _frozen(array, dtype=float):
    out = np.array(array, dtype=dtype)
    out.setflags(write=False)
    return out


def _check_simplex(array, axis, what):
    if np.any(~np.isfinite(array)):
        raise InvalidInputError("{} contains non-finite entries".format(what))
    if array.size and array.min() < -DIST_TOL:
        raise InvalidInputError("{} has negative entries (min {:.3e})".format(what, array.min()))
    deviation = np.abs(array.sum(axis=axis) - 1.0)
    if deviation.size and deviation.max() > DIST_TOL:
        raise InvalidInputError(
            "{} is not normalised (max deviation {:.3e})".format(what, deviation.max())
        )


class TabularKernel:
    """Population-independent kernel T[s][a][s'] (the L_P = 0 regime)."""

    kind = "tabular"

    def __init__(self, table):
        self.table = _frozen(table)
        if self.table.ndim != 3 or self.table.shape[0] != self.table.shape[2]:
            raise InvalidInputError(
                "tabular kernel must have shape (S, A, S), got {}".format(self.table.shape)
            )
        _check_simplex(self.table, 2, "tabular kernel")

    @property
    def num_states(self):
        return self.table.shape[0]

    @property
    def num_actions(self):
        return self.table.shape[1]

    @property
    def depends_on_population(self):
        return False

    def __call__(self, rho):
        return self.table

    def lipschitz_bound(self):
        return 0.0

    def to_dict(self):
        return {"type": self.kind, "table": self.table.tolist()}


class LinearCouplingKernel:
    """P(.|s,a,rho) = (1 - w(rho)) T0[s][a] + w(rho) T1[s][a], w = clip(c . rho, 0, 1)."""

    kind = "linear_coupling"

    def __init__(self, table0, table1, coupling):
        self.table0 = _frozen(table0)
        self.table1 = _frozen(table1)
        self.coupling = _frozen(coupling)
        if self.table0.shape != self.table1.shape or self.table0.ndim != 3:
            raise InvalidInputError(
                "coupled tables must share an (S, A, S) shape, got {} and {}".format(
                    self.table0.shape, self.table1.shape
                )
            )
        if self.coupling.shape != (self.table0.shape[0],):
            raise InvalidInputError(
                "coupling vector must have length {}, got {}".format(
                    self.table0.shape[0], self.coupling.shape
                )
            )
        _check_simplex(self.table0, 2, "linear coupling table0")
        _check_simplex(self.table1, 2, "linear coupling table1")

    @property
    def num_states(self):
        return self.table0.shape[0]

    @property
    def num_actions(self):
        return self.table0.shape[1]

    @property
    def depends_on_population(self):
        return bool(np.any(self.coupling != 0) and np.any(self.table0 != self.table1))

    def weight(self, rho):
        return float(np.clip(np.dot(self.coupling, rho), 0.0, 1.0))

    def __call__(self, rho):
        w = self.weight(rho)
        return (1.0 - w) * self.table0 + w * self.table1

    def lipschitz_bound(self):
        # sum(rho - rho') = 0, so |c . (rho - rho')| <= (max c - min c) / 2 * ||rho - rho'||_1
        spread = 0.5 * float(self.coupling.max() - self.coupling.min())
        row_gap = float(np.abs(self.table1 - self.table0).sum(axis=2).max())
        return spread * row_gap

    def to_dict(self):
        return {
            "type": self.kind,
            "table0": self.table0.tolist(),
            "table1": self.table1.tolist(),
            "coupling": self.coupling.tolist(),
        }


class AttractorKernel:
    """Two-state attractor: s1 absorbs, a1 jumps to s1, a0 falls in w.p. min{1, L rho(s1)}."""

    kind = "attractor"
    num_states = 2
    num_actions = 2

    def __init__(self, lipschitz_l):
        if not np.isfinite(lipschitz_l) or lipschitz_l < 0:
            raise InvalidInputError("attractor Lipschitz parameter must be >= 0, got {}".format(lipschitz_l))
        self.lipschitz_l = float(lipschitz_l)
        self._template = np.zeros((2, 2, 2))
        self._template[0, 1, 1] = 1.0
        self._template[1, :, 1] = 1.0

    @property
    def depends_on_population(self):
        return self.lipschitz_l > 0

    def attraction(self, rho):
        return min(1.0, self.lipschitz_l * float(rho[1]))

    def __call__(self, rho):
        p = self.attraction(rho)
        table = self._template.copy()
        table[0, 0, 0] = 1.0 - p
        table[0, 0, 1] = p
        return table

    def lipschitz_bound(self):
        return self.lipschitz_l

    def to_dict(self):
        return {"type": self.kind, "lipschitz": self.lipschitz_l}


class CongestionReward:
    """r(s, a, rho) = R[s][a] - c * rho(s)."""

    def __init__(self, base, congestion_coeff=0.0):
        self.base = _frozen(base)
        if self.base.ndim != 2:
            raise InvalidInputError("reward base must have shape (S, A), got {}".format(self.base.shape))
        if not np.all(np.isfinite(self.base)) or not np.isfinite(congestion_coeff):
            raise InvalidInputError("reward parameters must be finite")
        self.congestion_coeff = float(congestion_coeff)

    def __call__(self, rho):
        return self.base - self.congestion_coeff * np.asarray(rho, dtype=float)[:, None]

    def lipschitz_bound(self):
        return abs(self.congestion_coeff)

    def max_abs(self):
        # linear in rho(s) in [0, 1]: extremes sit at rho(s) = 0 and rho(s) = 1
        return float(max(np.abs(self.base).max(), np.abs(self.base - self.congestion_coeff).max()))

    def to_dict(self):
        return {"base": self.base.tolist(), "congestion_coeff": self.congestion_coeff}


class FiniteMfg:
    """The tuple (S, A, P, r, H, rho0)."""

    def __init__(self, num_states, num_actions, horizon, initial_distribution, kernel, reward):
        for name, v in (("num_states", num_states), ("num_actions", num_actions), ("horizon", horizon)):
            if int(v) != v or v < 1:
                raise InvalidInputError("{} must be a positive integer, got {}".format(name, v))
        self.num_states = int(num_states)
        self.num_actions = int(num_actions)
        self.horizon = int(horizon)
        self.initial_distribution = _frozen(initial_distribution)
        if self.initial_distribution.shape != (self.num_states,):
            raise InvalidInputError(
                "rho0 must have length {}, got shape {}".format(self.num_states, self.initial_distribution.shape)
            )
        _check_simplex(self.initial_distribution, 0, "rho0")
        if (kernel.num_states, kernel.num_actions) != (self.num_states, self.num_actions):
            raise InvalidInputError(
                "kernel is ({}, {}) but game is ({}, {})".format(
                    kernel.num_states, kernel.num_actions, self.num_states, self.num_actions
                )
            )
        if reward.base.shape != (self.num_states, self.num_actions):
            raise InvalidInputError(
                "reward base has shape {}, expected {}".format(
                    reward.base.shape, (self.num_states, self.num_actions)
                )
            )
        self.kernel = kernel
        self.reward = reward
        for probe in self._probe_distributions():
            _check_simplex(self.transition(probe), 2, "kernel evaluated at rho={}".format(probe.tolist()))

    def _probe_distributions(self):
        yield np.full(self.num_states, 1.0 / self.num_states)
        for s in range(self.num_states):
            yield np.eye(self.num_states)[s]

    def transition(self, rho):
        """Kernel tensor P[s, a, s'] at population distribution rho."""
        return self.kernel(rho)

    def reward_at(self, rho):
        """Reward matrix r[s, a] at population distribution rho."""
        return self.reward(rho)

    def check_policy(self, policy, what="policy"):
        expected = (self.horizon, self.num_states, self.num_actions)
        if policy.probabilities.shape != expected:
            raise InvalidInputError(
                "{} has shape {}, game expects {}".format(what, policy.probabilities.shape, expected)
            )

    def check_mean_field(self, mean_field):
        mean_field = getattr(mean_field, "state_dists", mean_field)
        mean_field = np.asarray(mean_field, dtype=float)
        if mean_field.shape != (self.horizon, self.num_states):
            raise InvalidInputError(
                "mean field has shape {}, game expects {}".format(
                    mean_field.shape, (self.horizon, self.num_states)
                )
            )
        _check_simplex(mean_field, 1, "mean field")
        return mean_field

    def __repr__(self):
        return "FiniteMfg(S={}, A={}, H={}, kernel={})".format(
            self.num_states, self.num_actions, self.horizon, self.kernel.kind
        )


class PolicySequence:
    """Non-stationary stochastic policy, probabilities[n, s, a] = pi_n(a|s)."""

    def __init__(self, probabilities, label=None):
        self.probabilities = _frozen(probabilities)
        if self.probabilities.ndim != 3:
            raise InvalidInputError(
                "policy must have shape (H, S, A), got {}".format(self.probabilities.shape)
            )
        _check_simplex(self.probabilities, 2, "policy")
        self.label = label

    @property
    def horizon(self):
        return self.probabilities.shape[0]

    @property
    def num_states(self):
        return self.probabilities.shape[1]

    @property
    def num_actions(self):
        return self.probabilities.shape[2]

    @classmethod
    def uniform(cls, horizon, num_states, num_actions, label="uniform"):
        return cls(np.full((horizon, num_states, num_actions), 1.0 / num_actions), label=label)

    @classmethod
    def deterministic(cls, actions, num_actions, label=None):
        """actions[n, s] -> one-hot policy."""
        actions = np.asarray(actions, dtype=int)
        return cls(np.eye(num_actions)[actions], label=label)

    @classmethod
    def random(cls, rng, horizon, num_states, num_actions, label="random"):
        return cls(rng.dirichlet(np.ones(num_actions), size=(horizon, num_states)), label=label)

    def to_list(self):
        return self.probabilities.tolist()

    def __repr__(self):
        return "PolicySequence(H={}, S={}, A={}, label={!r})".format(
            self.horizon, self.num_states, self.num_actions, self.label
        )


class FlowSequence:
    """State distributions rho_n and state-action occupancies mu_n for n < H."""

    def __init__(self, state_dists, state_action_dists, validate=True):
        self.state_dists = _frozen(state_dists)
        self.state_action_dists = _frozen(state_action_dists)
        if self.state_action_dists.shape[:2] != self.state_dists.shape:
            raise InvalidInputError(
                "flow shapes disagree: {} vs {}".format(self.state_dists.shape, self.state_action_dists.shape)
            )
        if validate:
            _check_simplex(self.state_dists, 1, "state distribution flow")
            _check_simplex(self.state_action_dists.reshape(self.horizon, -1), 1, "occupancy flow")

    @property
    def horizon(self):
        return self.state_dists.shape[0]


class NonStationaryReward:
    """Population-independent reward f_n(s, a) with values in [-1, 1]."""

    def __init__(self, values):
        self.values = _frozen(values)
        if self.values.ndim != 3:
            raise InvalidInputError("reward must have shape (H, S, A), got {}".format(self.values.shape))
        if np.any(~np.isfinite(self.values)) or np.abs(self.values).max(initial=0.0) > 1.0:
            raise InvalidInputError("non-stationary reward entries must lie in [-1, 1]")

    @classmethod
    def zeros(cls, horizon, num_states, num_actions):
        return cls(np.zeros((horizon, num_states, num_actions)))

    def __neg__(self):
        return NonStationaryReward(-self.values)


class TrajectoryBatch:
    """count trajectories of H (state, action) pairs drawn in the mean-field limit."""

    def __init__(self, states, actions, rng_seed, generating_policy_id=None):
        self.states = _frozen(states, dtype=int)
        self.actions = _frozen(actions, dtype=int)
        if self.states.shape != self.actions.shape or self.states.ndim != 2:
            raise InvalidInputError(
                "states/actions must be equal (count, H) arrays, got {} and {}".format(
                    self.states.shape, self.actions.shape
                )
            )
        self.rng_seed = rng_seed
        self.generating_policy_id = generating_policy_id

    def __len__(self):
        return self.states.shape[0]

    @property
    def horizon(self):
        return self.states.shape[1]

    @property
    def trajectories(self):
        return [list(zip(s.tolist(), a.tolist())) for s, a in zip(self.states, self.actions)]

    def check_bounds(self, num_states, num_actions):
        if len(self) and (self.states.min() < 0 or self.states.max() >= num_states):
            raise InvalidInputError("trajectory state index outside [0, {})".format(num_states))
        if len(self) and (self.actions.min() < 0 or self.actions.max() >= num_actions):
            raise InvalidInputError("trajectory action index outside [0, {})".format(num_actions))

    def empirical_occupancy(self, num_states, num_actions):
        """Per-step empirical state-action frequencies, shape (H, S, A)."""
        if len(self) == 0:
            raise InvalidInputError("empty trajectory batch")
        self.check_bounds(num_states, num_actions)
        counts = np.zeros((self.horizon, num_states, num_actions))
        steps = np.broadcast_to(np.arange(self.horizon), self.states.shape)
        np.add.at(counts, (steps, self.states, self.actions), 1.0)
        return counts / len(self)


def _propagate(mfg, probabilities, mean_field=None):
    # mean_field=None: the kernel is driven by the flow being computed (population mode)
    horizon, num_states = mfg.horizon, mfg.num_states
    rho = np.zeros((horizon, num_states))
    rho[0] = mfg.initial_distribution
    for n in range(horizon - 1):
        driver = rho[n] if mean_field is None else mean_field[n]
        mu_n = probabilities[n] * rho[n][:, None]
        kernel = mfg.transition(driver)
        rho[n + 1] = mu_n.reshape(-1) @ kernel.reshape(-1, num_states)
    mu = probabilities * rho[:, :, None]
    # a validated policy and kernel keep every rho_n and mu_n on the simplex
    return FlowSequence(rho, mu, validate=False)


def population_flow(mfg, policy):
    """rho^(pi), mu^(pi): the whole population plays pi and drives the kernel."""
    mfg.check_policy(policy)
    return _propagate(mfg, policy.probabilities)


def mean_field_flow(mfg, agent_policy, mean_field):
    """Flow of one agent playing agent_policy while the kernel sees a frozen mean field."""
    mfg.check_policy(agent_policy, "agent policy")
    mean_field = mfg.check_mean_field(mean_field)
    return _propagate(mfg, agent_policy.probabilities, mean_field)


def single_agent_flow(mfg, population_policy, agent_policy):
    """rho^(pi)pi', mu^(pi)pi': agent plays pi' inside a population playing pi."""
    mfg.check_policy(population_policy, "population policy")
    mfg.check_policy(agent_policy, "agent policy")
    population = population_flow(mfg, population_policy)
    return _propagate(mfg, agent_policy.probabilities, population.state_dists)


def _stage_rewards(mfg, mean_field, reward_override):
    if reward_override is None:
        return np.stack([mfg.reward_at(mean_field[n]) for n in range(mfg.horizon)])
    expected = (mfg.horizon, mfg.num_states, mfg.num_actions)
    if reward_override.values.shape != expected:
        raise InvalidInputError(
            "reward override has shape {}, game expects {}".format(reward_override.values.shape, expected)
        )
    return reward_override.values


def value(mfg, agent_policy, mean_field, reward_override=None):
    """V(pi, rho) = sum_n sum_{s,a} mu_n^(rho)pi(s, a) r(s, a, rho_n).

    With reward_override the stage reward is replaced by f_n(s, a) (V_f).
    """
    mean_field = mfg.check_mean_field(mean_field)
    flow = mean_field_flow(mfg, agent_policy, mean_field)
    rewards = _stage_rewards(mfg, mean_field, reward_override)
    return float(np.sum(flow.state_action_dists * rewards))


def social_value(mfg, policy, flow=None):
    """V(pi, rho^(pi)), the value the population obtains when everybody plays pi.

    flow, when given, is the already computed population_flow(mfg, policy).
    """
    if flow is None:
        flow = population_flow(mfg, policy)
    return float(np.sum(flow.state_action_dists * _stage_rewards(mfg, flow.state_dists, None)))


def best_response(mfg, mean_field, reward_override=None):
    """Backward induction against a frozen mean field.

    Returns the deterministic greedy policy (ties go to the lowest action
    index) and its value sum_s rho0(s) V_0(s).
    """
    mean_field = mfg.check_mean_field(mean_field)
    rewards = _stage_rewards(mfg, mean_field, reward_override)
    horizon, num_states = mfg.horizon, mfg.num_states
    greedy = np.zeros((horizon, num_states), dtype=int)
    v_next = np.zeros(num_states)
    for n in reversed(range(horizon)):
        q = rewards[n] + mfg.transition(mean_field[n]) @ v_next
        greedy[n] = np.argmax(q, axis=1)
        v_next = q[np.arange(num_states), greedy[n]]
    policy = PolicySequence.deterministic(greedy, mfg.num_actions, label="best_response")
    return policy, float(mfg.initial_distribution @ v_next)


def exploitability(mfg, policy, population=None):
    """max_pi' V(pi', rho^(pi)) - V(pi, rho^(pi)); the Nash imitation gap of pi."""
    if population is None:
        population = population_flow(mfg, policy)
    _, best = best_response(mfg, population.state_dists)
    gap = best - social_value(mfg, policy, population)
    logger.debug("exploitability of %s: %.6g", policy.label, gap)
    return gap


def deterministic_policies(num_states, num_actions, horizon):
    """Yields every deterministic non-stationary policy, A^(S*H) of them."""
    for choice in itertools.product(range(num_actions), repeat=num_states * horizon):
        actions = np.array(choice).reshape(horizon, num_states)
        yield PolicySequence.deterministic(actions, num_actions, label="det:" + "".join(map(str, choice)))


def _sample_rows(rng, probs):
    cumulative = np.cumsum(probs, axis=1)
    u = rng.random(probs.shape[0])[:, None]
    return np.minimum(np.sum(cumulative <= u, axis=1), probs.shape[1] - 1)


def sample_trajectories(mfg, policy, count, seed):
    """Simulates count independent agents against the precomputed flow of policy.

    Samples never feed back into the mean field (each agent is negligible).
    """
    if int(count) != count or count < 1:
        raise InvalidInputError("count must be a positive integer, got {}".format(count))
    count = int(count)
    population = population_flow(mfg, policy)
    rng = np.random.default_rng(seed)
    horizon = mfg.horizon
    states = np.zeros((count, horizon), dtype=int)
    actions = np.zeros((count, horizon), dtype=int)
    states[:, 0] = _sample_rows(rng, np.broadcast_to(mfg.initial_distribution, (count, mfg.num_states)))
    for n in range(horizon):
        actions[:, n] = _sample_rows(rng, policy.probabilities[n][states[:, n]])
        if n + 1 < horizon:
            kernel = mfg.transition(population.state_dists[n])
            states[:, n + 1] = _sample_rows(rng, kernel[states[:, n], actions[:, n]])
    logger.info("sampled %d trajectories of length %d (seed %s)", count, horizon, seed)
    return TrajectoryBatch(states, actions, seed, generating_policy_id=policy.label)
