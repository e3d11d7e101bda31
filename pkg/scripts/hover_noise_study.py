#!/usr/bin/env python3
"""Hover precision across seeds: how much position scatter does the full
sensor chain leave? Prints per-seed std and a summary table."""

import argparse
import statistics

import numpy as np

from hexsim.runtime import run_scenario
from hexsim.scenario import load_scenario


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scenario", default="fixtures/scenarios/calm_hover.yaml")
    parser.add_argument("--seeds", type=int, nargs="+",
                        default=[42, 7, 99, 2024, 5150])
    parser.add_argument("--duration", type=float, default=40.0)
    args = parser.parse_args()

    stds = []
    for seed in args.seeds:
        scenario = load_scenario(args.scenario)
        scenario.seed = seed
        scenario.duration_s = args.duration
        log = run_scenario(scenario)
        pos = log.truth[len(log.truth) // 3:, 1:4]
        std = float(np.linalg.norm(np.std(pos, axis=0)))
        stds.append(std)
        print(f"seed {seed:6d}: position std {std:.3f} m "
              f"(h {np.linalg.norm(np.std(pos[:, :2], axis=0)):.3f}, "
              f"v {np.std(pos[:, 2]):.3f})")

    print(f"\n{len(stds)} runs: mean {statistics.mean(stds):.3f} m, "
          f"worst {max(stds):.3f} m")


if __name__ == "__main__":
    main()
