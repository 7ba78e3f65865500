# coding:utf-8
import argparse
import os

DEFAULT_LIPSCHITZ = "0.01,0.1,0.5,1,2"
DEFAULT_HORIZONS = "3,25,50,75,100"
OUTPUT_DIR_ENV = "MFG_IL_OUTPUT_DIR"


def default_output_dir():
    return os.environ.get(OUTPUT_DIR_ENV, "workplace/output")


def default_num_workers():
    return min(os.cpu_count() or 1, 8)


def _add_common_args(parser):
    parser.add_argument(
        "--out",
        default=None,
        type=str,
        help="Output file. Defaults to a file in ${} (or workplace/output).".format(OUTPUT_DIR_ENV),
    )
    parser.add_argument("--seed", type=int, default=42, help="random seed for initialization")
    parser.add_argument(
        "--verbose", default=False, action="store_true", help="Log per-iteration detail (DEBUG level)."
    )


def _add_grid_args(parser, with_format=True):
    parser.add_argument(
        "--alphas",
        default=None,
        type=str,
        help="Comma separated alpha values in [0, 1]. Overrides --alpha_step.",
    )
    parser.add_argument(
        "--alpha_step", default=0.01, type=float, help="Step of the default alpha grid 0, step, ..., 1."
    )
    parser.add_argument(
        "--lipschitz", default=DEFAULT_LIPSCHITZ, type=str, help="Comma separated attractor L values."
    )
    parser.add_argument("--horizons", default=DEFAULT_HORIZONS, type=str, help="Comma separated horizons H.")
    parser.add_argument(
        "--num_workers",
        default=default_num_workers(),
        type=int,
        help="Worker processes for the grid; 1 runs in-process.",
    )
    if with_format:
        parser.add_argument(
            "--format", default="csv", type=str, choices=["csv", "json"], help="Output file format."
        )


def build_parser():
    parser = argparse.ArgumentParser(
        description="Exploitability, imitation-error proxies and bounds for finite mean-field games."
    )
    subparsers = parser.add_subparsers(dest="command")
    subparsers.required = True

    sweep = subparsers.add_parser("sweep", help="Attractor study over (alpha, L, H), closed form vs generic.")
    _add_grid_args(sweep)
    _add_common_args(sweep)

    bounds = subparsers.add_parser("verify-bounds", help="Check the gap against every applicable bound.")
    _add_grid_args(bounds, with_format=False)
    _add_common_args(bounds)
    bounds.add_argument("--l_r", default=None, type=float, help="Override the reward Lipschitz constant.")
    bounds.add_argument("--l_p", default=None, type=float, help="Override the kernel Lipschitz constant.")
    bounds.add_argument("--r_max", default=None, type=float, help="Override the reward bound.")
    bounds.add_argument(
        "--tabular_games",
        default=100,
        type=int,
        help="Random population-independent games checked against the L_P = 0 bounds.",
    )
    bounds.add_argument(
        "--probe_pairs",
        default=10000,
        type=int,
        help="Random distribution pairs for the empirical Lipschitz estimate.",
    )

    adversarial = subparsers.add_parser("adversarial", help="Run a min-max solver on a JSON game spec.")
    _add_common_args(adversarial)
    adversarial.add_argument("--game", default=None, type=str, required=True, help="JSON game spec.")
    adversarial.add_argument(
        "--mode", default="vanilla", type=str, choices=["vanilla", "mfc"], help="Which formulation to solve."
    )
    adversarial.add_argument(
        "--init",
        default="uniform",
        type=str,
        choices=["uniform", "expert"],
        help="Starting policy of the vanilla solver.",
    )
    adversarial.add_argument(
        "--max_iters",
        default=None,
        type=int,
        help="Vanilla: iteration cap (default 100). Mfc: cap on candidates visited (default all).",
    )
    adversarial.add_argument(
        "--tolerance", default=None, type=float, help="Stopping tolerance (vanilla 1e-6, mfc 0)."
    )
    adversarial.add_argument(
        "--alpha_step", default=0.01, type=float, help="Alpha grid step of the attractor mfc family."
    )

    selfcheck = subparsers.add_parser("selfcheck", help="Run the oracle suites; nonzero exit on failure.")
    _add_grid_args(selfcheck, with_format=False)
    _add_common_args(selfcheck)
    selfcheck.add_argument("--ipm_pairs", default=200, type=int, help="Random occupancy pairs for the IPM suite.")
    selfcheck.add_argument("--br_games", default=100, type=int, help="Random games for the best-response suite.")
    selfcheck.add_argument(
        "--lemma_pairs", default=100, type=int, help="Random (apprentice, probe) pairs for the decomposition suite."
    )

    evaluate = subparsers.add_parser("evaluate", help="nig-at-eps curves and ordering checks for a sweep file.")
    _add_common_args(evaluate)
    evaluate.add_argument("--sweep", default=None, type=str, required=True, help="Sweep file (csv or json).")
    evaluate.add_argument("--num_levels", default=101, type=int, help="Common error levels per cell.")
    return parser
