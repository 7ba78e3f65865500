# coding:utf-8
"""Post-hoc analysis of a sweep file: nig as a function of each error proxy.

For every (L, H) cell the sweep gives, along the alpha grid, the maximal
per-step error of the three proxies and the gap. nig-at-eps is read off each
curve by linear interpolation at the first point where the proxy reaches eps.
"""
import argparse
import csv
import json
import logging
import os

import numpy as np

from mfg import InvalidInputError

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = [
    "alpha",
    "L",
    "H",
    "eps_bc_max",
    "eps_vanilla_max",
    "eps_mfc_max",
    "nig",
    "exploitability",
    "max_deviation",
    "agree",
]
PROXIES = (("bc", "eps_bc_max"), ("vanilla", "eps_vanilla_max"), ("mfc", "eps_mfc_max"))
ORDER_SLACK = 1e-9


def _parse_row(row):
    out = {}
    for key in SWEEP_COLUMNS:
        v = row[key]
        if key == "agree":
            out[key] = v if isinstance(v, bool) else str(v).lower() == "true"
        elif key == "H":
            out[key] = int(v)
        else:
            out[key] = float(v)
    return out


def read_sweep(path):
    """Rows of a sweep file written by `run.py sweep` (csv or json)."""
    try:
        with open(path, "r") as f:
            if path.endswith(".json"):
                raw = json.load(f)["rows"]
            else:
                raw = list(csv.DictReader(f))
    except (OSError, ValueError, KeyError) as e:
        raise InvalidInputError("cannot read sweep file {}: {}".format(path, e))
    try:
        return [_parse_row(r) for r in raw]
    except (KeyError, ValueError) as e:
        raise InvalidInputError("malformed sweep row in {}: {}".format(path, e))


def nig_at_error(errors, nigs, level):
    """nig where the error curve first reaches level; None if it never does."""
    errors = np.asarray(errors, dtype=float)
    idx = int(np.searchsorted(errors, level, side="left"))
    if idx >= len(errors):
        return None
    if idx == 0:
        return float(nigs[0])
    lo, hi = errors[idx - 1], errors[idx]
    t = (level - lo) / (hi - lo)
    return float(nigs[idx - 1] + t * (nigs[idx] - nigs[idx - 1]))


def build_curves(rows, num_levels=101):
    """One curve record per (L, H): common eps levels and nig-at-eps per proxy."""
    cells = {}
    for row in rows:
        cells.setdefault((row["L"], row["H"]), []).append(row)
    curves = []
    for (lipschitz_l, horizon), cell in sorted(cells.items()):
        cell = sorted(cell, key=lambda r: r["alpha"])
        nigs = [r["nig"] for r in cell]
        # errors are nondecreasing in alpha; the running max guards against round-off
        errors = {name: np.maximum.accumulate([r[col] for r in cell]) for name, col in PROXIES}
        top = min(e[-1] for e in errors.values())
        levels = np.linspace(0.0, top, num_levels) if top > 0 else np.zeros(1)
        record = {"L": lipschitz_l, "H": horizon, "levels": levels.tolist()}
        for name, _ in PROXIES:
            record["nig_" + name] = [nig_at_error(errors[name], nigs, lv) for lv in levels]
        curves.append(record)
    return curves


def check_ordering(curves, slack=ORDER_SLACK):
    """Cells/levels where nig-at-eps violates mfc <= vanilla <= bc."""
    violations = []
    for c in curves:
        for lv, bc, van, mfc in zip(c["levels"], c["nig_bc"], c["nig_vanilla"], c["nig_mfc"]):
            if not (mfc <= van + slack and van <= bc + slack):
                violations.append({"L": c["L"], "H": c["H"], "level": lv, "bc": bc, "vanilla": van, "mfc": mfc})
    return violations


def check_degeneration(curves, lipschitz_l=0.01, horizon=3, tolerance=0.05):
    """Largest vanilla/mfc gap on the (L, H) cell, None when the sweep does not contain it."""
    for c in curves:
        if np.isclose(c["L"], lipschitz_l) and c["H"] == horizon:
            gap = max(abs(v - m) for v, m in zip(c["nig_vanilla"], c["nig_mfc"]))
            return gap, gap <= tolerance
    return None


def evaluate_sweep(path, out_path, num_levels=101):
    rows = read_sweep(path)
    curves = build_curves(rows, num_levels)
    violations = check_ordering(curves)
    degeneration = check_degeneration(curves)
    summary = {
        "sweep": path,
        "cells": len(curves),
        "ordering_violations": violations,
        "degeneration": None if degeneration is None else {"max_gap": degeneration[0], "ok": degeneration[1]},
        "curves": curves,
    }
    with open(out_path, "w") as f:
        json.dump(summary, f, indent=1)
    logger.info("evaluated %d cells from %s, %d ordering violations", len(curves), path, len(violations))
    return summary


if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--sweep", type=str, required=True, help="Sweep file (csv or json) written by run.py sweep.")
    parser.add_argument("--out", type=str, default=None, help="Where to write the curves (default next to the sweep).")
    parser.add_argument("--num_levels", type=int, default=101, help="Number of common error levels per cell.")
    args = parser.parse_args()
    out = args.out or os.path.splitext(args.sweep)[0] + "-curves.json"
    summary = evaluate_sweep(args.sweep, out, args.num_levels)
    print("cells: {}, ordering violations: {}".format(summary["cells"], len(summary["ordering_violations"])))
    if summary["degeneration"] is not None:
        print("vanilla/mfc gap at L=0.01, H=3: {:.4f}".format(summary["degeneration"]["max_gap"]))
