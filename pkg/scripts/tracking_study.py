#!/usr/bin/env python3
"""Pursuit-geometry study: sweep target speed and report centering quality,
minimum standoff and mean range for the circle-tracking scenario. With
--plot, saves the chase trajectory as a PNG."""

import argparse

import numpy as np

from hexsim.runtime import SimSession
from hexsim.scenario import load_scenario
from hexsim.vision import CircleTarget


def run_once(speed, plot_path=None):
    scenario = load_scenario("fixtures/scenarios/track_circle.yaml")
    base = scenario.target
    scenario.target = CircleTarget(
        center_ne=base.center_ne, radius_m=base.radius_m, speed_mps=speed,
        start_bearing_rad=base.start_bearing_rad)
    session = SimSession(scenario)
    camera = session.tracker.camera
    cx, cy = camera.principal_point
    in_box = []
    original = session.tracker.process

    def tap(frame, estimate):
        track, g = original(frame, estimate)
        if session.t_s > 10.0 and track.pixel_mass > 0:
            in_box.append(
                abs(track.centroid_px[0] + 0.5 - cx) <= 0.1 * camera.width_px
                and abs(track.centroid_px[1] + 0.5 - cy) <= 0.1 * camera.height_px)
        return track, g

    session.tracker.process = tap
    log = session.run()
    t = log.truth[:, 0]
    pos = log.truth[:, 1:4]
    ranges = np.array([np.linalg.norm(pos[i] - scenario.target.position(t[i]))
                       for i in range(len(t))])
    centered = sum(in_box) / len(in_box) if in_box else 0.0

    if plot_path:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        target_xy = np.array([scenario.target.position(ti)[:2] for ti in t])
        fig, ax = plt.subplots(figsize=(6, 6))
        ax.plot(target_xy[:, 1], target_xy[:, 0], label="target", lw=1)
        ax.plot(pos[:, 1], pos[:, 0], label="vehicle", lw=1)
        ax.set_xlabel("east [m]")
        ax.set_ylabel("north [m]")
        ax.set_aspect("equal")
        ax.legend()
        fig.savefig(plot_path, dpi=120)
        print(f"saved {plot_path}")

    return centered, float(ranges.min()), float(ranges.mean())


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--speeds", type=float, nargs="+",
                        default=[2.0, 3.5, 5.0, 6.5, 8.0])
    parser.add_argument("--plot", help="PNG path for the 5 m/s chase plot")
    args = parser.parse_args()

    print("speed  centered  min_range  mean_range")
    for speed in args.speeds:
        plot = args.plot if abs(speed - 5.0) < 1e-9 else None
        centered, rmin, rmean = run_once(speed, plot)
        print(f"{speed:5.1f}  {centered:7.1%}  {rmin:8.2f}  {rmean:9.2f}")


if __name__ == "__main__":
    main()
