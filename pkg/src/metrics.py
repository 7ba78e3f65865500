# coding:utf-8
"""Imitation-error proxies, bound right-hand sides and related checks."""
import logging

import numpy as np

from mfg import (
    InvalidInputError,
    PolicySequence,
    PreconditionError,
    UnsupportedSettingError,
    exploitability,
    mean_field_flow,
    population_flow,
    single_agent_flow,
    value,
)

logger = logging.getLogger(__name__)

BOUND_SLACK = 1e-9
EQUILIBRIUM_TOL = 1e-9

ERROR_KINDS = ("BC", "ADV", "VANILLA_ADV", "MFC_ADV")

# theorem label -> (profile kinds usable as its epsilon, in preference order, regime)
THEOREMS = {
    "thm1_bc_lp0": (("BC",), "lp0"),
    "thm2_adv_lp0": (("ADV", "VANILLA_ADV", "MFC_ADV"), "lp0"),
    "thm3_bc": (("BC",), "lp_pos"),
    "thm4_vanilla_adv": (("VANILLA_ADV",), "lp_pos"),
    "thm5_mfc_adv": (("MFC_ADV",), "any"),
}


class LipschitzConstants:
    def __init__(self, l_r, l_p, r_max, empirical_l_r=None, empirical_l_p=None, source="analytic"):
        for name, v in (("l_r", l_r), ("l_p", l_p), ("r_max", r_max)):
            if not np.isfinite(v) or v < 0:
                raise InvalidInputError("{} must be finite and >= 0, got {}".format(name, v))
        if r_max <= 0:
            raise InvalidInputError("r_max must be > 0, got {}".format(r_max))
        self.l_r = float(l_r)
        self.l_p = float(l_p)
        self.r_max = float(r_max)
        self.empirical_l_r = empirical_l_r
        self.empirical_l_p = empirical_l_p
        self.source = source

    def replace(self, l_r=None, l_p=None, r_max=None):
        """Copy with some constants overridden (command-line overrides)."""
        if l_r is None and l_p is None and r_max is None:
            return self
        return LipschitzConstants(
            self.l_r if l_r is None else l_r,
            self.l_p if l_p is None else l_p,
            self.r_max if r_max is None else r_max,
            self.empirical_l_r,
            self.empirical_l_p,
            source="override",
        )

    def to_dict(self):
        return {
            "l_r": self.l_r,
            "l_p": self.l_p,
            "r_max": self.r_max,
            "empirical_l_r": self.empirical_l_r,
            "empirical_l_p": self.empirical_l_p,
            "source": self.source,
        }

    def __repr__(self):
        return "LipschitzConstants(l_r={}, l_p={}, r_max={})".format(self.l_r, self.l_p, self.r_max)


class ErrorProfile:
    def __init__(self, kind, per_step):
        if kind not in ERROR_KINDS:
            raise InvalidInputError("unknown error kind {!r}".format(kind))
        self.kind = kind
        self.per_step = np.asarray(per_step, dtype=float)
        self.per_step.setflags(write=False)
        self.maximum = float(self.per_step.max()) if self.per_step.size else 0.0

    def to_dict(self):
        return {"kind": self.kind, "per_step": self.per_step.tolist(), "maximum": self.maximum}

    def __repr__(self):
        return "ErrorProfile({}, max={:.6g})".format(self.kind, self.maximum)


class BoundReport:
    """Right-hand sides of the applicable bounds and, once nig is known, their verdicts."""

    def __init__(self, bound_values, nig=None):
        self.bound_values = dict(bound_values)
        self.nig = None if nig is None else float(nig)

    @property
    def satisfied(self):
        if self.nig is None:
            return {}
        return {k: self.nig <= v + BOUND_SLACK for k, v in self.bound_values.items()}

    @property
    def tightness(self):
        if self.nig is None:
            return {}
        out = {}
        for k, v in self.bound_values.items():
            if v > 0:
                out[k] = self.nig / v
            else:
                out[k] = 0.0 if self.nig <= BOUND_SLACK else float("inf")
        return out

    @property
    def all_satisfied(self):
        return all(self.satisfied.values())

    def to_dict(self):
        return {
            "nig": self.nig,
            "bound_values": self.bound_values,
            "satisfied": self.satisfied,
            "tightness": self.tightness,
        }


def _l1_per_step(a, b):
    return np.abs(a - b).reshape(a.shape[0], -1).sum(axis=1)


def _check_pair(mfg, expert, apprentice):
    mfg.check_policy(expert, "expert policy")
    mfg.check_policy(apprentice, "apprentice policy")


def _bc_profile(expert, apprentice, rho_e):
    row_gap = np.abs(apprentice.probabilities - expert.probabilities).sum(axis=2)
    return ErrorProfile("BC", np.sum(rho_e * row_gap, axis=1))


def bc_error(mfg, expert, apprentice):
    """eps_n = sum_s rho_n^E(s) ||pi_n^A(.|s) - pi_n^E(.|s)||_1."""
    _check_pair(mfg, expert, apprentice)
    return _bc_profile(expert, apprentice, population_flow(mfg, expert).state_dists)


def adv_error(mfg, expert, apprentice):
    """l1 distance of the occupancies; only defined when the kernel ignores the population."""
    _check_pair(mfg, expert, apprentice)
    if mfg.kernel.depends_on_population:
        raise UnsupportedSettingError(
            "ADV error needs a population-independent kernel, got {}".format(mfg.kernel.kind)
        )
    mu_e = population_flow(mfg, expert).state_action_dists
    mu_a = population_flow(mfg, apprentice).state_action_dists
    return ErrorProfile("ADV", _l1_per_step(mu_e, mu_a))


def vanilla_adv_error(mfg, expert, apprentice):
    _check_pair(mfg, expert, apprentice)
    mu_ee = population_flow(mfg, expert).state_action_dists
    mu_ea = single_agent_flow(mfg, expert, apprentice).state_action_dists
    return ErrorProfile("VANILLA_ADV", _l1_per_step(mu_ee, mu_ea))


def mfc_adv_error(mfg, expert, apprentice):
    _check_pair(mfg, expert, apprentice)
    mu_ee = population_flow(mfg, expert).state_action_dists
    mu_aa = population_flow(mfg, apprentice).state_action_dists
    return ErrorProfile("MFC_ADV", _l1_per_step(mu_ee, mu_aa))


def imitation_errors(mfg, expert, apprentice, expert_flow=None, apprentice_flow=None):
    """All proxies of one (expert, apprentice) pair from a single set of flows.

    Returns {kind: ErrorProfile} with BC, VANILLA_ADV and MFC_ADV, plus ADV
    when the kernel ignores the population. The optional flows are the
    population flows of expert and apprentice if already computed.
    """
    _check_pair(mfg, expert, apprentice)
    if expert_flow is None:
        expert_flow = population_flow(mfg, expert)
    if apprentice_flow is None:
        apprentice_flow = population_flow(mfg, apprentice)
    mu_ee = expert_flow.state_action_dists
    mu_aa = apprentice_flow.state_action_dists
    mu_ea = mean_field_flow(mfg, apprentice, expert_flow.state_dists).state_action_dists
    errors = {
        "BC": _bc_profile(expert, apprentice, expert_flow.state_dists),
        "VANILLA_ADV": ErrorProfile("VANILLA_ADV", _l1_per_step(mu_ee, mu_ea)),
        "MFC_ADV": ErrorProfile("MFC_ADV", _l1_per_step(mu_ee, mu_aa)),
    }
    if not mfg.kernel.depends_on_population:
        errors["ADV"] = ErrorProfile("ADV", _l1_per_step(mu_ee, mu_aa))
    return errors


def _bound_value(label, consts, horizon, eps):
    l_r, l_p, r_max, h = consts.l_r, consts.l_p, consts.r_max, float(horizon)
    if label == "thm1_bc_lp0":
        return h ** 2 * (r_max + 2 * l_r) * eps
    if label == "thm2_adv_lp0":
        return (2 * l_r + r_max) * h * eps
    if label == "thm3_bc":
        return (h ** 2 * r_max + 2 * (1 + l_p) ** horizon * (l_r + r_max) / l_p ** 2) * eps
    if label == "thm4_vanilla_adv":
        return (r_max * h + 2 * (1 + l_p) ** horizon * (r_max + l_r) / l_p) * eps
    return ((2 * l_r + r_max) * h + 3 * l_p * r_max * h ** 2) * eps


def _in_regime(regime, l_p):
    return regime == "any" or (regime == "lp0") == (l_p == 0)


def theorem_bounds(consts, horizon, errors, nig=None, theorems=None):
    """Evaluates the bound right-hand sides for the given error profiles.

    With theorems=None every bound whose regime matches consts.l_p and whose
    error profile is present is evaluated (thm5 only when l_p > 0). Naming a
    bound outside its regime raises UnsupportedSettingError.
    """
    if int(horizon) != horizon or horizon < 1:
        raise InvalidInputError("horizon must be a positive integer, got {}".format(horizon))
    by_kind = {}
    for profile in errors:
        by_kind.setdefault(profile.kind, profile)
    explicit = theorems is not None
    if theorems is None:
        theorems = [k for k, (_, regime) in THEOREMS.items() if regime != "any" or consts.l_p > 0]
    bound_values = {}
    for label in theorems:
        if label not in THEOREMS:
            raise InvalidInputError("unknown theorem label {!r}".format(label))
        kinds, regime = THEOREMS[label]
        if not _in_regime(regime, consts.l_p):
            if explicit:
                raise UnsupportedSettingError(
                    "{} is not defined for L_P = {}".format(label, consts.l_p)
                )
            continue
        profile = next((by_kind[k] for k in kinds if k in by_kind), None)
        if profile is None:
            if explicit:
                raise InvalidInputError("{} needs one of the error profiles {}".format(label, kinds))
            continue
        bound_values[label] = float(_bound_value(label, consts, horizon, profile.maximum))
    return BoundReport(bound_values, nig)


def lipschitz_constants(mfg, num_probe_pairs=10000, seed=0):
    """Analytic constants plus empirical lower bounds from random distribution pairs."""
    l_p = float(mfg.kernel.lipschitz_bound())
    l_r = float(mfg.reward.lipschitz_bound())
    r_max = mfg.reward.max_abs()
    if r_max == 0:
        r_max = 1.0
    empirical_l_p, empirical_l_r = 0.0, 0.0
    if num_probe_pairs > 0:
        rng = np.random.default_rng(seed)
        firsts = rng.dirichlet(np.ones(mfg.num_states), size=num_probe_pairs)
        seconds = rng.dirichlet(np.ones(mfg.num_states), size=num_probe_pairs)
        for rho, rho_prime in zip(firsts, seconds):
            dist = np.abs(rho - rho_prime).sum()
            if dist <= 1e-12:
                continue
            if mfg.kernel.depends_on_population:
                kernel_gap = np.abs(mfg.transition(rho) - mfg.transition(rho_prime)).sum(axis=2).max()
                empirical_l_p = max(empirical_l_p, kernel_gap / dist)
            reward_gap = np.abs(mfg.reward_at(rho) - mfg.reward_at(rho_prime)).max()
            empirical_l_r = max(empirical_l_r, reward_gap / dist)
    logger.info(
        "Lipschitz constants: L_P=%.6g (empirical %.6g), L_r=%.6g (empirical %.6g), r_max=%.6g",
        l_p, empirical_l_p, l_r, empirical_l_r, r_max,
    )
    return LipschitzConstants(l_r, l_p, r_max, empirical_l_r=empirical_l_r, empirical_l_p=empirical_l_p)


def bc_fit_from_samples(batch, num_states, num_actions, horizon):
    """Per-(n, s) empirical action frequencies; unvisited rows become uniform."""
    if len(batch) == 0:
        raise InvalidInputError("cannot fit a policy on an empty trajectory batch")
    if batch.horizon != horizon:
        raise InvalidInputError("batch horizon {} != {}".format(batch.horizon, horizon))
    counts = batch.empirical_occupancy(num_states, num_actions) * len(batch)
    visits = counts.sum(axis=2, keepdims=True)
    probs = np.where(visits > 0, counts / np.maximum(visits, 1.0), 1.0 / num_actions)
    return PolicySequence(probs, label="bc_fit")


def value_diff_decomposition_check(mfg, expert, apprentice, probe, consts):
    """Both sides of the four-term value-difference decomposition.

    lhs = V(probe, rho^A) - V(pi^A, rho^A) (signed), and
    rhs = 2 L_r sum||rho^A - rho^E|| + r_max (sum||mu^(E)E - mu^(E)A||
          + sum||rho^(A)probe - rho^(E)probe|| + sum||rho^(A)A - rho^(E)A||).
    The expert has to be an equilibrium.
    """
    _check_pair(mfg, expert, apprentice)
    mfg.check_policy(probe, "probe policy")
    gap = exploitability(mfg, expert)
    if gap > EQUILIBRIUM_TOL:
        raise PreconditionError("expert is not an equilibrium (exploitability {:.3e})".format(gap))
    rho_a = population_flow(mfg, apprentice).state_dists
    flow_e = population_flow(mfg, expert)
    rho_e, mu_ee = flow_e.state_dists, flow_e.state_action_dists
    lhs = value(mfg, probe, rho_a) - value(mfg, apprentice, rho_a)
    flow_ea = single_agent_flow(mfg, expert, apprentice)
    terms = (
        np.abs(rho_a - rho_e).sum(),
        np.abs(mu_ee - flow_ea.state_action_dists).sum(),
        np.abs(single_agent_flow(mfg, apprentice, probe).state_dists
               - single_agent_flow(mfg, expert, probe).state_dists).sum(),
        np.abs(rho_a - flow_ea.state_dists).sum(),
    )
    rhs = 2 * consts.l_r * terms[0] + consts.r_max * (terms[1] + terms[2] + terms[3])
    logger.debug("decomposition terms %s -> lhs %.6g rhs %.6g", terms, lhs, rhs)
    return float(lhs), float(rhs)
