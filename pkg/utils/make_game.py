# coding:utf-8
"""Write a game-spec JSON file.

    python make_game.py --kind attractor --lipschitz 1 --horizon 3 --out ../data/attractor-l1-h3.json
    python make_game.py --kind tabular --num_states 3 --num_actions 2 --horizon 4 --with_expert --out game.json
"""
import argparse
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "src"))

from attractor import build_attractor  # noqa: E402
from game_spec import dump_game_spec, random_coupled_game, random_tabular_game  # noqa: E402
from mfg import PolicySequence, best_response, population_flow  # noqa: E402


def make_game(kind, num_states, num_actions, horizon, lipschitz, congestion_coeff, seed, with_expert):
    """Returns (mfg, expert or None)."""
    rng = np.random.default_rng(seed)
    if kind == "attractor":
        return build_attractor(lipschitz, horizon), None
    if kind == "tabular":
        mfg = random_tabular_game(rng, num_states, num_actions, horizon, congestion_coeff)
    else:
        mfg = random_coupled_game(rng, num_states, num_actions, horizon)
    expert = None
    if with_expert:
        if mfg.kernel.depends_on_population or mfg.reward.congestion_coeff != 0:
            raise ValueError("an equilibrium expert can only be derived for population-independent games")
        anchor = population_flow(mfg, PolicySequence.uniform(horizon, num_states, num_actions)).state_dists
        expert, _ = best_response(mfg, anchor)
    return mfg, expert


if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--kind", default="tabular", type=str, choices=["tabular", "coupled", "attractor"])
    parser.add_argument("--num_states", default=2, type=int, help="Number of states (tabular/coupled).")
    parser.add_argument("--num_actions", default=2, type=int, help="Number of actions (tabular/coupled).")
    parser.add_argument("--horizon", default=3, type=int, help="Horizon H.")
    parser.add_argument("--lipschitz", default=1.0, type=float, help="Attractor L.")
    parser.add_argument("--congestion_coeff", default=0.0, type=float, help="Reward congestion coefficient.")
    parser.add_argument("--seed", default=42, type=int, help="random seed for the game draw")
    parser.add_argument(
        "--with_expert",
        default=False,
        action="store_true",
        help="Store the best response as expert_policy (population-independent games only).",
    )
    parser.add_argument("--out", default=None, type=str, required=True, help="Output JSON file.")
    args = parser.parse_args()

    mfg, expert = make_game(
        args.kind, args.num_states, args.num_actions, args.horizon,
        args.lipschitz, args.congestion_coeff, args.seed, args.with_expert,
    )
    dump_game_spec(args.out, mfg, expert)
    print("Wrote {} to {}".format(mfg, args.out))
