#!/usr/bin/env python3
"""Desk-scale convergence experiment: bayesian vs linear likelihood.

Builds a seeded synthetic world, precomputes the descriptor map, calibrates
the match/nonmatch histograms, then runs the same N-seed mission sweep under
both likelihoods and prints the convergence comparison:

    python3 scripts/convergence_experiment.py --seeds 10

With the defaults (3 km world, 300x300x60 grid) the full run takes on the
order of 10 minutes on one desktop core; --side 900 --rxy 10 --ntheta 24
gives a one-minute smoke version.
"""

import argparse
import time

import numpy as np

from gridloc.grid import make_grid_spec
from gridloc.map_store import precompute
from gridloc.measurement import calibrate
from gridloc.simulator import (
    MissionConfig,
    calibration_distances,
    generate_world,
    mission_summary,
    random_waypoints,
    run_mission,
)


def sweep(world, dmap, calib, args, likelihood):
    inset = 0.12 * args.side
    box = (inset, args.side - inset, inset, args.side - inset)
    summaries = []
    for seed in range(args.seeds):
        cfg = MissionConfig(
            waypoints=random_waypoints(np.random.default_rng(seed + 7_654_321), box),
            likelihood=likelihood,
            calibration=calib if likelihood == "bayesian" else None,
            max_updates=args.max_updates,
            seed=seed,
        )
        log = run_mission(world, dmap, cfg)
        s = mission_summary(log)
        s["seed"] = seed
        summaries.append(s)
        print(
            f"  [{likelihood}] seed {seed}: k_c={s['k_c']}, "
            f"err_post={s['mean_err_post']}, divergences={s['divergence_events']}"
        )
    return summaries


def aggregate(summaries):
    conv = [s for s in summaries if s["k_c"] is not None]
    return {
        "p_c": len(conv) / len(summaries),
        "mean_k_c": float(np.mean([s["k_c"] for s in conv])) if conv else None,
        "mean_err_post": float(np.mean([s["mean_err_post"] for s in conv])) if conv else None,
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--world-seed", type=int, default=0)
    ap.add_argument("--side", type=float, default=3000.0, help="world side, meters")
    ap.add_argument("--rxy", type=float, default=10.0)
    ap.add_argument("--ntheta", type=int, default=60)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--max-updates", type=int, default=60)
    ap.add_argument("--pairs", type=int, default=2000, help="calibration sample pairs")
    args = ap.parse_args()

    t0 = time.monotonic()
    world = generate_world(args.world_seed, args.side, args.side)
    spec = make_grid_spec((0.0, args.side, 0.0, args.side), args.rxy, args.ntheta)
    print(f"world {args.side:.0f} m, grid {spec.n_x}x{spec.n_y}x{spec.n_theta}")
    dmap = precompute(world.map_raster, spec, w=100.0, D=8, out_res=10.0)
    print(f"descriptor map ready ({time.monotonic() - t0:.0f} s)")
    calib = calibrate(
        *calibration_distances(world, dmap, args.pairs, 123, w=100.0, out_res=10.0)
    )

    results = {}
    for likelihood in ("bayesian", "linear"):
        t1 = time.monotonic()
        results[likelihood] = aggregate(sweep(world, dmap, calib, args, likelihood))
        results[likelihood]["sweep_s"] = time.monotonic() - t1

    print()
    print(f"{'likelihood':<10} {'p_c':>5} {'mean k_c':>9} {'err_post m':>11} {'time s':>7}")
    for likelihood, agg in results.items():
        k_c = "-" if agg["mean_k_c"] is None else f"{agg['mean_k_c']:.1f}"
        err = "-" if agg["mean_err_post"] is None else f"{agg['mean_err_post']:.1f}"
        print(f"{likelihood:<10} {agg['p_c']:>5.2f} {k_c:>9} {err:>11} {agg['sweep_s']:>7.0f}")
    print(f"total {time.monotonic() - t0:.0f} s")


if __name__ == "__main__":
    main()
