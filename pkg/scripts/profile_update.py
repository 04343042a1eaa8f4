#!/usr/bin/env python3
"""Wall-time profile of one full filter update at survey scale.

Times predict + heading weights + map-matching weights + apply on a
1000x1000x60 grid (D=8 by default) with synthetic inputs, stage by stage:

    python3 scripts/profile_update.py
    python3 scripts/profile_update.py --nx 300 --ny 300 --ntheta 60 --repeat 5

The descriptor map is random unit vectors held in float32; run with BLAS
pinned to one thread (OMP_NUM_THREADS=1 etc.) to measure the
single-threaded budget.
"""

import argparse
import time

import numpy as np

from gridloc.grid import apply_weights, init_uniform, make_grid_spec
from gridloc.map_store import DescriptorMap
from gridloc.measurement import (
    CalibrationModel,
    HeadingMeasurement,
    bayesian_weights,
    heading_weights,
)
from gridloc.prediction import OdometryMeasurement, OdometryNoiseModel, predict


def random_unit_map(spec, d, seed=7, chunk=2_000_000):
    rng = np.random.default_rng(seed)
    data = np.empty((spec.n_voxels, d), dtype=np.float32)
    for start in range(0, spec.n_voxels, chunk):
        block = rng.standard_normal((min(chunk, spec.n_voxels - start), d)).astype(np.float32)
        block /= np.linalg.norm(block, axis=1, keepdims=True)
        data[start : start + block.shape[0]] = block
    return DescriptorMap(spec=spec, D=d, data=data.reshape(spec.shape + (d,)))


def synthetic_calibration(bins=64):
    k = np.arange(bins, dtype=np.float64)
    match = np.exp(-k / 8.0)
    nonmatch = np.exp(-(bins - 1.0 - k) / 8.0)
    return CalibrationModel(
        bins=bins, floor=1e-6, match=match / match.sum(), nonmatch=nonmatch / nonmatch.sum()
    )


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nx", type=int, default=1000)
    ap.add_argument("--ny", type=int, default=1000)
    ap.add_argument("--ntheta", type=int, default=60)
    ap.add_argument("--D", type=int, default=8)
    ap.add_argument("--repeat", type=int, default=1)
    args = ap.parse_args()

    spec = make_grid_spec(
        (0.0, args.nx * 10.0, 0.0, args.ny * 10.0), 10.0, args.ntheta
    )
    print(f"grid {spec.n_x}x{spec.n_y}x{spec.n_theta} = {spec.n_voxels:,} voxels, D={args.D}")
    t0 = time.monotonic()
    dmap = random_unit_map(spec, args.D)
    print(f"synthetic map built in {time.monotonic() - t0:.1f} s "
          f"({dmap.data.nbytes / 2**30:.2f} GiB in memory)")

    wk = np.zeros(args.D)
    wk[0] = 1.0
    calib = synthetic_calibration()
    u = OdometryMeasurement(u_x=35.0, u_y=-12.0, u_theta=0.3, u_o=50.0)
    model = OdometryNoiseModel(sigma_xy_rate=0.05, sigma_theta_rate=np.deg2rad(0.15))
    vmeas = HeadingMeasurement(v=1.0, sigma_v=np.deg2rad(3.0))

    for r in range(args.repeat):
        belief = init_uniform(spec)
        t0 = time.monotonic()
        belief = predict(belief, u, model)
        t1 = time.monotonic()
        wh = heading_weights(spec, vmeas)
        t2 = time.monotonic()
        wm = bayesian_weights(wk, dmap, calib)
        t3 = time.monotonic()
        belief = apply_weights(belief, wh, wm)
        t4 = time.monotonic()
        print(
            f"run {r}: predict {t1 - t0:6.2f} s | heading {t2 - t1:5.2f} s | "
            f"matching {t3 - t2:5.2f} s | apply {t4 - t3:5.2f} s | total {t4 - t0:6.2f} s"
        )


if __name__ == "__main__":
    main()
