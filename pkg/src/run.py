# coding:utf-8
"""Command-line driver: sweep, verify-bounds, adversarial, selfcheck and evaluate.

Exit codes: 0 success, 1 invalid input, 2 a verification failed.
"""
from __future__ import absolute_import, division, print_function

import csv
import itertools
import json
import logging
import os
import sys
import time
from multiprocessing import Pool

import numpy as np
from tqdm import tqdm

from adversarial import (
    PolicyFamily,
    ipm_witness,
    mfc_duality_gap_estimate,
    solve_mfc_adversarial,
    solve_vanilla_adversarial,
)
from attractor import (
    AttractorParams,
    alpha_family,
    alpha_grid,
    alpha_policy,
    build_attractor,
    closed_form_profile,
)
from evaluate import SWEEP_COLUMNS, evaluate_sweep
from game_spec import load_game_spec, random_coupled_game, random_tabular_game
from metrics import (
    BOUND_SLACK,
    imitation_errors,
    lipschitz_constants,
    theorem_bounds,
    value_diff_decomposition_check,
)
from mfg import (
    InvalidInputError,
    PolicySequence,
    best_response,
    exploitability,
    mean_field_flow,
    population_flow,
    social_value,
    value,
)
from options import build_parser, default_output_dir

logger = logging.getLogger(__name__)

AGREEMENT_TOL = 1e-10
EXACT_TOL = 1e-12
DECOMPOSITION_SLACK = 1e-9
BRUTE_FORCE_LIMIT = 4096
LIPSCHITZ_REL_TOL = 1e-9


def parse_float_list(text, name, low=None, high=None):
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InvalidInputError("--{} must be a comma separated list of numbers, got {!r}".format(name, text))
    if not values:
        raise InvalidInputError("--{} is empty".format(name))
    for v in values:
        if not np.isfinite(v) or (low is not None and v < low) or (high is not None and v > high):
            raise InvalidInputError("--{} value {} outside [{}, {}]".format(name, v, low, high))
    return values


def grid_from_args(args):
    """(alphas, Ls, Hs) from the grid flags."""
    if args.alphas:
        alphas = parse_float_list(args.alphas, "alphas", 0.0, 1.0)
    else:
        alphas = alpha_grid(args.alpha_step)
    lipschitz = parse_float_list(args.lipschitz, "lipschitz", 0.0)
    horizons = parse_float_list(args.horizons, "horizons", 1.0)
    if any(int(h) != h for h in horizons):
        raise InvalidInputError("--horizons must be integers, got {}".format(args.horizons))
    return alphas, lipschitz, [int(h) for h in horizons]


def output_path(args, default_name):
    path = args.out or os.path.join(default_output_dir(), default_name)
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    return path


def map_grid(func, points, num_workers, desc):
    """Ordered map over grid points, in worker processes when num_workers > 1."""
    if num_workers is not None and num_workers > 1 and len(points) > 1:
        chunksize = max(1, len(points) // (num_workers * 8))
        with Pool(num_workers) as pool:
            return list(tqdm(pool.imap(func, points, chunksize), total=len(points), desc=desc))
    return [func(p) for p in tqdm(points, desc=desc)]


def sweep_point(point):
    """One (alpha, L, H) row, closed form against the generic pipeline."""
    alpha, lipschitz_l, horizon = point
    closed = closed_form_profile(AttractorParams(lipschitz_l, horizon, alpha))
    mfg = build_attractor(lipschitz_l, horizon)
    expert = alpha_policy(0.0, horizon)
    policy = alpha_policy(alpha, horizon)

    expert_flow = population_flow(mfg, expert)
    policy_flow = population_flow(mfg, policy)
    errors = imitation_errors(mfg, expert, policy, expert_flow, policy_flow)
    bc, vanilla, mfc = errors["BC"], errors["VANILLA_ADV"], errors["MFC_ADV"]
    gap = exploitability(mfg, policy, policy_flow)
    value_loss = social_value(mfg, expert, expert_flow) - social_value(mfg, policy, policy_flow)
    rho_pop = policy_flow.state_dists[:, 1]
    rho_expertpop = mean_field_flow(mfg, policy, expert_flow).state_dists[:, 1]

    deviations = [
        np.abs(bc.per_step - closed.eps_bc).max(),
        np.abs(vanilla.per_step - closed.eps_vanilla).max(),
        np.abs(mfc.per_step - closed.eps_mfc).max(),
        np.abs(rho_pop - closed.rho_pop_s1).max(),
        np.abs(rho_expertpop - closed.rho_expertpop_s1).max(),
        abs(value_loss - closed.nig),
        abs(gap - closed.exploitability),
    ]
    deviation = float(max(deviations))
    return {
        "alpha": alpha,
        "L": lipschitz_l,
        "H": horizon,
        "eps_bc_max": max(closed.eps_bc),
        "eps_vanilla_max": max(closed.eps_vanilla),
        "eps_mfc_max": max(closed.eps_mfc),
        "nig": closed.nig,
        "exploitability": gap,
        "max_deviation": deviation,
        "agree": deviation <= AGREEMENT_TOL,
    }


def run_sweep(alphas, lipschitz, horizons, num_workers=1):
    """Rows ordered alpha-major, then L, then H."""
    points = list(itertools.product(alphas, lipschitz, horizons))
    logger.info("sweep over %d points (%d alphas, %d L, %d H)", len(points), len(alphas), len(lipschitz), len(horizons))
    return map_grid(sweep_point, points, num_workers, "sweep")


def _format_cell(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    return "{:.17g}".format(v)


def write_rows(path, rows, fmt, columns):
    if fmt == "json":
        with open(path, "w") as f:
            json.dump({"columns": columns, "rows": rows}, f, indent=1)
        return
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format_cell(row[c]) for c in columns])


def cmd_sweep(args):
    alphas, lipschitz, horizons = grid_from_args(args)
    path = output_path(args, "sweep." + args.format)
    s_time = time.time()
    rows = run_sweep(alphas, lipschitz, horizons, args.num_workers)
    write_rows(path, rows, args.format, SWEEP_COLUMNS)
    print("Sweep of {} rows takes {:.3f}s, written to {}".format(len(rows), time.time() - s_time, path))
    bad = [r for r in rows if not r["agree"]]
    if bad:
        for r in bad:
            print("disagreement: alpha={} L={} H={} deviation={:.3e}".format(r["alpha"], r["L"], r["H"], r["max_deviation"]))
        logger.error("%d sweep rows disagree beyond %g", len(bad), AGREEMENT_TOL)
        return 2
    logger.info("all %d sweep rows agree (max deviation %.3e)", len(rows), max(r["max_deviation"] for r in rows))
    return 0


def bound_point(task):
    """Bound check for one attractor grid point with precomputed constants."""
    alpha, lipschitz_l, horizon, consts = task
    mfg = build_attractor(lipschitz_l, horizon)
    expert = alpha_policy(0.0, horizon)
    policy = alpha_policy(alpha, horizon)
    policy_flow = population_flow(mfg, policy)
    errors = list(imitation_errors(mfg, expert, policy, apprentice_flow=policy_flow).values())
    gap = exploitability(mfg, policy, policy_flow)
    value_loss = closed_form_profile(AttractorParams(lipschitz_l, horizon, alpha)).nig
    report = theorem_bounds(consts, horizon, errors, nig=gap)
    loss_ok = all(value_loss <= v + BOUND_SLACK for v in report.bound_values.values())
    row = {"setting": "attractor", "alpha": alpha, "L": lipschitz_l, "H": horizon, "value_loss": value_loss}
    row.update(report.to_dict())
    row["ok"] = report.all_satisfied and loss_ok
    return row


def tabular_bound_rows(num_games, seed, overrides):
    rng = np.random.default_rng(seed)
    rows = []
    for idx in range(num_games):
        num_states, num_actions, horizon = rng.integers(1, 4), rng.integers(1, 4), rng.integers(1, 6)
        mfg = random_tabular_game(rng, num_states, num_actions, horizon, congestion_coeff=0.0)
        # population-independent: any mean field gives the equilibrium best response
        anchor = population_flow(mfg, PolicySequence.uniform(horizon, num_states, num_actions)).state_dists
        expert, _ = best_response(mfg, anchor)
        apprentice = PolicySequence.random(rng, horizon, num_states, num_actions)
        errors = list(imitation_errors(mfg, expert, apprentice).values())
        consts = lipschitz_constants(mfg, num_probe_pairs=0).replace(**overrides)
        report = theorem_bounds(consts, horizon, errors, nig=exploitability(mfg, apprentice))
        row = {"setting": "tabular", "game": idx, "S": int(num_states), "A": int(num_actions), "H": int(horizon)}
        row.update(report.to_dict())
        row["ok"] = report.all_satisfied
        rows.append(row)
    return rows


def cmd_verify_bounds(args):
    alphas, lipschitz, horizons = grid_from_args(args)
    overrides = {"l_r": args.l_r, "l_p": args.l_p, "r_max": args.r_max}
    path = output_path(args, "bounds.json")
    constants = {}
    for lipschitz_l in lipschitz:
        consts = lipschitz_constants(build_attractor(lipschitz_l, 1), args.probe_pairs, args.seed)
        if consts.empirical_l_p > consts.l_p * (1.0 + LIPSCHITZ_REL_TOL) + EXACT_TOL:
            raise InvalidInputError(
                "empirical L_P {} exceeds the analytic value {}".format(consts.empirical_l_p, consts.l_p)
            )
        constants[lipschitz_l] = consts.replace(**overrides)
    tasks = [(a, l, h, constants[l]) for a, l, h in itertools.product(alphas, lipschitz, horizons)]
    rows = map_grid(bound_point, tasks, args.num_workers, "attractor bounds")
    rows += tabular_bound_rows(args.tabular_games, args.seed, overrides)

    violations = [r for r in rows if not r["ok"]]
    with open(path, "w") as f:
        json.dump(
            {
                "constants": {str(k): v.to_dict() for k, v in constants.items()},
                "violations": len(violations),
                "rows": rows,
            },
            f,
            indent=1,
        )
    print("Checked {} instances, {} violations, report written to {}".format(len(rows), len(violations), path))
    if violations:
        for r in violations[:20]:
            print("violated: {}".format({k: r.get(k) for k in ("setting", "alpha", "L", "H", "game", "nig")}))
        logger.error("%d bound violations", len(violations))
        return 2
    return 0


def cmd_adversarial(args):
    mfg, expert = load_game_spec(args.game)
    if expert is None:
        if mfg.kernel.kind != "attractor":
            raise InvalidInputError("game spec {} has no expert_policy".format(args.game))
        expert = alpha_policy(0.0, mfg.horizon)
    path = output_path(args, "adversarial-{}.json".format(args.mode))
    out = {"game": args.game, "mode": args.mode}
    if args.mode == "vanilla":
        initial = expert if args.init == "expert" else None
        trace = solve_vanilla_adversarial(
            mfg,
            expert,
            max_iters=100 if args.max_iters is None else args.max_iters,
            tolerance=1e-6 if args.tolerance is None else args.tolerance,
            initial_policy=initial,
        )
    else:
        if mfg.kernel.kind == "attractor":
            family = alpha_family(alpha_grid(args.alpha_step), mfg.horizon)
        else:
            family = PolicyFamily.deterministic(mfg.num_states, mfg.num_actions, mfg.horizon)
        trace = solve_mfc_adversarial(
            mfg,
            expert,
            family,
            max_iters=args.max_iters,
            tolerance=0.0 if args.tolerance is None else args.tolerance,
        )
        if len(family) <= 1024:
            out["duality"] = mfc_duality_gap_estimate(mfg, expert, family)
    out.update(trace.to_dict())
    with open(path, "w") as f:
        json.dump(out, f, indent=1)
    print(
        "{} solver: {} iterations, objective {:.6g} ({}), trace written to {}".format(
            args.mode, len(trace.iterations), trace.final_objective, trace.final_policy.label, path
        )
    )
    return 0


def suite_grid_equivalence(args):
    alphas, lipschitz, horizons = grid_from_args(args)
    rows = run_sweep(alphas, lipschitz, horizons, args.num_workers)
    worst = max(r["max_deviation"] for r in rows)
    for r in rows:
        if r["alpha"] == 0.0 and abs(r["nig"]) > EXACT_TOL:
            return False, "nig(alpha=0) = {} at L={} H={}".format(r["nig"], r["L"], r["H"])
        if r["alpha"] == 1.0 and abs(r["nig"] - (r["H"] - 1)) > EXACT_TOL:
            return False, "nig(alpha=1) = {} at L={} H={}".format(r["nig"], r["L"], r["H"])
        if abs(r["eps_bc_max"] - 2 * r["alpha"]) > EXACT_TOL:
            return False, "eps_bc != 2 alpha at alpha={}".format(r["alpha"])
    ok = all(r["agree"] for r in rows)
    return ok, "{} rows, max deviation {:.3e}".format(len(rows), worst)


def suite_ipm_identity(args, rng):
    worst = 0.0
    for _ in range(args.ipm_pairs):
        num_states, num_actions, horizon = rng.integers(1, 5), rng.integers(1, 5), rng.integers(1, 6)
        mfg = random_coupled_game(rng, num_states, num_actions, horizon)
        first = population_flow(mfg, PolicySequence.random(rng, horizon, num_states, num_actions))
        second = population_flow(mfg, PolicySequence.random(rng, horizon, num_states, num_actions))
        worst = max(worst, ipm_witness(first, second).gap_check)
    return worst <= EXACT_TOL, "{} pairs, worst identity gap {:.3e}".format(args.ipm_pairs, worst)


def enumerated_values(mfg, mean_field):
    """Values of every deterministic policy against a frozen mean field, in one pass."""
    horizon, num_states, num_actions = mfg.horizon, mfg.num_states, mfg.num_actions
    choices = np.array(list(itertools.product(range(num_actions), repeat=num_states * horizon)))
    probs = np.eye(num_actions)[choices.reshape(-1, horizon, num_states)]
    rho = np.broadcast_to(mfg.initial_distribution, (len(choices), num_states))
    total = np.zeros(len(choices))
    for n in range(horizon):
        mu = probs[:, n] * rho[:, :, None]
        total += np.sum(mu * mfg.reward_at(mean_field[n]), axis=(1, 2))
        rho = np.einsum("ksa,sat->kt", mu, mfg.transition(mean_field[n]))
    return total


def suite_best_response(args, rng):
    worst = 0.0
    for _ in range(args.br_games):
        while True:
            num_states, num_actions, horizon = rng.integers(1, 4), rng.integers(1, 4), rng.integers(1, 5)
            if num_actions ** (num_states * horizon) <= BRUTE_FORCE_LIMIT:
                break
        mfg = random_coupled_game(rng, num_states, num_actions, horizon)
        population = PolicySequence.random(rng, horizon, num_states, num_actions)
        mean_field = population_flow(mfg, population).state_dists
        _, best = best_response(mfg, mean_field)
        worst = max(worst, abs(best - enumerated_values(mfg, mean_field).max()))
        for _ in range(10):
            probe = PolicySequence.random(rng, horizon, num_states, num_actions)
            if value(mfg, probe, mean_field) > best + EXACT_TOL:
                return False, "random policy beats the best response"
        if exploitability(mfg, population) < -BOUND_SLACK:
            return False, "negative exploitability"
    mfg = build_attractor(1.0, 3)
    expert_gap = exploitability(mfg, alpha_policy(0.0, 3))
    ok = worst <= EXACT_TOL and abs(expert_gap) <= EXACT_TOL
    return ok, "{} games, worst |DP - enumeration| {:.3e}, attractor expert gap {:.3e}".format(
        args.br_games, worst, expert_gap
    )


def suite_decomposition(args, rng):
    worst = -np.inf
    for _ in range(args.lemma_pairs):
        lipschitz_l, horizon = rng.uniform(0.0, 2.0), int(rng.integers(2, 11))
        mfg = build_attractor(lipschitz_l, horizon)
        consts = lipschitz_constants(mfg, num_probe_pairs=0)
        apprentice = PolicySequence.random(rng, horizon, 2, 2)
        probe = PolicySequence.random(rng, horizon, 2, 2)
        lhs, rhs = value_diff_decomposition_check(mfg, alpha_policy(0.0, horizon), apprentice, probe, consts)
        worst = max(worst, lhs - rhs)
    return worst <= DECOMPOSITION_SLACK, "{} pairs, worst lhs - rhs {:.3e}".format(args.lemma_pairs, worst)


def cmd_selfcheck(args):
    rng = np.random.default_rng(args.seed)
    suites = [
        ("grid_equivalence", lambda: suite_grid_equivalence(args)),
        ("ipm_identity", lambda: suite_ipm_identity(args, rng)),
        ("best_response", lambda: suite_best_response(args, rng)),
        ("value_decomposition", lambda: suite_decomposition(args, rng)),
    ]
    path = output_path(args, "selfcheck.json")
    results = {}
    for name, suite in suites:
        try:
            ok, detail = suite()
        except Exception as e:  # a crashing suite is a failing suite
            logger.exception("suite %s raised", name)
            ok, detail = False, "{}: {}".format(type(e).__name__, e)
        results[name] = {"ok": ok, "detail": detail}
        print("{:<20} {}  {}".format(name, "PASS" if ok else "FAIL", detail))
        logger.info("suite %s: %s (%s)", name, "PASS" if ok else "FAIL", detail)
    with open(path, "w") as f:
        json.dump(results, f, indent=1)
    return 0 if all(r["ok"] for r in results.values()) else 2


def cmd_evaluate(args):
    path = output_path(args, os.path.splitext(os.path.basename(args.sweep))[0] + "-curves.json")
    summary = evaluate_sweep(args.sweep, path, args.num_levels)
    print("cells: {}, ordering violations: {}, curves written to {}".format(
        summary["cells"], len(summary["ordering_violations"]), path
    ))
    degeneration = summary["degeneration"]
    if degeneration is not None:
        print("vanilla/mfc gap at L=0.01, H=3: {:.4f}".format(degeneration["max_gap"]))
    if summary["ordering_violations"] or (degeneration is not None and not degeneration["ok"]):
        return 2
    return 0


COMMANDS = {
    "sweep": cmd_sweep,
    "verify-bounds": cmd_verify_bounds,
    "adversarial": cmd_adversarial,
    "selfcheck": cmd_selfcheck,
    "evaluate": cmd_evaluate,
}


def setup_logging(args):
    log_dir = os.path.dirname(args.out) if args.out else default_output_dir()
    if log_dir:
        os.makedirs(log_dir, exist_ok=True)
    logging.basicConfig(
        filename=os.path.join(log_dir, "running.log"),
        filemode="a",
        format="%(asctime)s - %(levelname)s - %(name)s -   %(message)s",
        datefmt="%m/%d/%Y %H:%M:%S",
        level=logging.DEBUG if args.verbose else logging.INFO,
        force=True,
    )


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 1
    try:
        setup_logging(args)
        logger.info("command %s with %s", args.command, vars(args))
        return COMMANDS[args.command](args)
    except (ValueError, OSError) as e:
        print("error: {}".format(e), file=sys.stderr)
        logger.error("%s failed: %s", args.command, e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
