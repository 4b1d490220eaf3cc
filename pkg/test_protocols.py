#!/usr/bin/env python3
"""
Scaled reproductions of the recovery protocols.

The full grids take several minutes; set PCSBL_FULL_PROTOCOLS=1 to run them.
Without it each protocol runs on a reduced grid that only checks structure.
"""

import os
import sys

import numpy as np

# Add the current directory to Python path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from pcsbl.bench import ExperimentConfig, paired_comparison, run_experiment, summarize

FULL = os.getenv("PCSBL_FULL_PROTOCOLS", "0") == "1"


def _rates(summary, algorithm):
    rows = summary[summary["algorithm"] == algorithm].sort_values("m_over_n")
    return list(rows["m_over_n"]), list(rows["success_rate"])


def test_success_sweep_protocol():
    if FULL:
        cfg = ExperimentConfig.from_dict({
            "kind": "success-sweep", "N": 200, "K": 40, "T": 6, "trials": 50, "seed": 2015,
            "m_over_n": [0.3, 0.35, 0.4, 0.45, 0.5, 0.55, 0.6, 0.65, 0.7],
        })
    else:
        cfg = ExperimentConfig.from_dict({
            "kind": "success-sweep", "N": 50, "K": 10, "T": 2, "trials": 3, "seed": 2015,
            "m_over_n": [0.4, 0.7],
            "solvers": {name: {"outer": {"t_max": 30}} for name in ("pcsbl-gamp", "pcsbl-em", "sbl")},
        })
    records = run_experiment(cfg)
    summary = summarize(records)
    assert len(summary) == 3 * len(cfg.m_over_n)
    assert all(summary["trials"] == cfg.trials)
    if not FULL:
        return

    grid, gamp = _rates(summary, "pcsbl-gamp")
    _, em = _rates(summary, "pcsbl-em")
    _, sbl = _rates(summary, "sbl")
    for before, after in zip(gamp, gamp[1:]):
        assert after >= before - 0.05, gamp
    for ratio, g, s in zip(grid, gamp, sbl):
        if ratio >= 0.35:
            assert g >= s - 0.05, (ratio, g, s)
    for ratio, g, e in zip(grid, gamp, em):
        assert abs(g - e) <= 0.1, (ratio, g, e)
    assert gamp[grid.index(0.6)] >= 0.9


def test_runtime_scaling_protocol():
    n_grid = [200, 400, 800] if FULL else [20, 40]
    cfg = ExperimentConfig.from_dict({
        "kind": "runtime-sweep", "n_grid": n_grid, "K": 40 if FULL else 4, "T": 6 if FULL else 2,
        "trials": 3 if FULL else 1, "seed": 11, "algorithms": ["pcsbl-gamp", "pcsbl-em"],
        "solvers": {"pcsbl-gamp": {"outer": {"t_max": 20}}, "pcsbl-em": {"outer": {"t_max": 20}}},
    })
    summary = summarize(run_experiment(cfg))
    assert sorted(set(summary["n"])) == n_grid
    if not FULL:
        return

    def growth(algorithm):
        rows = summary[summary["algorithm"] == algorithm].set_index("n")
        return rows.loc[n_grid[-1], "median_time_s"] / rows.loc[n_grid[0], "median_time_s"]

    assert growth("pcsbl-em") >= 4.0 * growth("pcsbl-gamp")


def test_patch_protocol():
    cfg = ExperimentConfig.from_dict({
        "kind": "patch-2d", "Q": 16 if FULL else 8, "L": 16 if FULL else 8, "M": 80 if FULL else 30,
        "snr_db": 20.0, "trials": 25 if FULL else 2, "seed": 300, "shape": "letters",
        "algorithms": ["pcsbl-gamp", "sbl"],
        "solvers": {} if FULL else {"pcsbl-gamp": {"outer": {"t_max": 10}}, "sbl": {"outer": {"t_max": 10}}},
    })
    records = run_experiment(cfg)
    assert all(np.isfinite(r.nmse) for r in records)
    comparison = paired_comparison(records, "pcsbl-gamp", "sbl")
    assert comparison["pairs"] == cfg.trials
    if not FULL:
        return
    assert comparison["median_nmse_first"] < comparison["median_nmse_second"]
    assert comparison["win_rate"] >= 0.8


if __name__ == "__main__":
    for name, func in list(globals().items()):
        if name.startswith("test_") and callable(func):
            print(f"🔍 {name}")
            func()
    print(f"✅ All protocol tests passed ({'full' if FULL else 'reduced'} grids)")
