# coding:utf-8
"""The two-state attractor game and its closed-form quantities.

s1 is absorbing with reward -1, s0 pays 0. Action a1 moves to s1 for sure,
a0 falls into s1 with probability min{1, L rho(s1)}. Everybody starts in s0.
"""
import numpy as np

from adversarial import PolicyFamily
from mfg import AttractorKernel, CongestionReward, FiniteMfg, InvalidInputError, PolicySequence

ATTRACTOR_REWARD = [[0.0, 0.0], [-1.0, -1.0]]


class AttractorParams:
    def __init__(self, lipschitz_l, horizon, alpha):
        if not np.isfinite(lipschitz_l) or lipschitz_l < 0:
            raise InvalidInputError("L must be >= 0, got {}".format(lipschitz_l))
        if int(horizon) != horizon or horizon < 1:
            raise InvalidInputError("H must be a positive integer, got {}".format(horizon))
        if not 0.0 <= alpha <= 1.0:
            raise InvalidInputError("alpha must lie in [0, 1], got {}".format(alpha))
        self.lipschitz_l = float(lipschitz_l)
        self.horizon = int(horizon)
        self.alpha = float(alpha)


class ClosedFormProfile:
    def __init__(self, params, rho_pop_s1, rho_expertpop_s1, rho_br_s1):
        self.params = params
        self.rho_pop_s1 = rho_pop_s1
        self.rho_expertpop_s1 = rho_expertpop_s1
        self.rho_br_s1 = rho_br_s1
        alpha = params.alpha
        self.eps_bc = [2.0 * alpha] * params.horizon
        self.eps_vanilla = [2.0 * (alpha + r * (1.0 - alpha)) for r in rho_expertpop_s1]
        self.eps_mfc = [2.0 * (alpha + r * (1.0 - alpha)) for r in rho_pop_s1]
        # value loss against the equilibrium, V(pi^E, rho^E) - V(pi^alpha, rho^alpha)
        self.nig = sum(rho_pop_s1)
        # the best deviation plays a0 forever and is only dragged in by the population
        self.exploitability = self.nig - sum(rho_br_s1)

    def to_dict(self):
        return {
            "alpha": self.params.alpha,
            "L": self.params.lipschitz_l,
            "H": self.params.horizon,
            "rho_pop_s1": self.rho_pop_s1,
            "rho_expertpop_s1": self.rho_expertpop_s1,
            "rho_br_s1": self.rho_br_s1,
            "eps_bc": self.eps_bc,
            "eps_vanilla": self.eps_vanilla,
            "eps_mfc": self.eps_mfc,
            "nig": self.nig,
            "exploitability": self.exploitability,
        }


def build_attractor(lipschitz_l, horizon):
    return FiniteMfg(2, 2, horizon, [1.0, 0.0], AttractorKernel(lipschitz_l), CongestionReward(ATTRACTOR_REWARD))


def alpha_policy(alpha, horizon):
    """pi(a1|s0) = alpha at every step, uniform in s1."""
    if not 0.0 <= alpha <= 1.0:
        raise InvalidInputError("alpha must lie in [0, 1], got {}".format(alpha))
    if int(horizon) != horizon or horizon < 1:
        raise InvalidInputError("H must be a positive integer, got {}".format(horizon))
    probs = np.empty((int(horizon), 2, 2))
    probs[:, 0, :] = [1.0 - alpha, alpha]
    probs[:, 1, :] = 0.5
    return PolicySequence(probs, label="alpha={:.6g}".format(alpha))


def closed_form_profile(params):
    """Evaluates the attractor recursions directly, without the generic flow code."""
    L, alpha = params.lipschitz_l, params.alpha
    rho_pop, rho_exp, rho_br = [0.0], [0.0], [0.0]
    for _ in range(params.horizon - 1):
        p, e, b = rho_pop[-1], rho_exp[-1], rho_br[-1]
        rho_pop.append(p + (1.0 - p) * (alpha + (1.0 - alpha) * min(1.0, L * p)))
        rho_exp.append(e + (1.0 - e) * alpha)
        rho_br.append(b + (1.0 - b) * min(1.0, L * p))
    return ClosedFormProfile(params, rho_pop, rho_exp, rho_br)


def alpha_grid(step):
    """Equally spaced alphas 0, step, ..., 1; 1/step has to be an integer."""
    if not 0 < step <= 1:
        raise InvalidInputError("alpha step must lie in (0, 1], got {}".format(step))
    count = int(round(1.0 / step))
    if abs(count * step - 1.0) > 1e-9:
        raise InvalidInputError("1 / alpha step must be an integer, got step {}".format(step))
    return [round(k / count, 12) for k in range(count + 1)]


def alpha_family(alphas, horizon):
    return PolicyFamily([alpha_policy(a, horizon) for a in alphas], description="alpha_grid")
