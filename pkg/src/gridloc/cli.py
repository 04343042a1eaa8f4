"""Batch command-line surface: worldgen, precompute, calibrate, run, sweep, report.

All artifacts are written atomically (temp file + rename) and every manifest
embeds the package version and a hash of the effective configuration for
provenance.  Exit codes: 0 success, 2 configuration error, 3 I/O error,
4 sweep in which no mission converged.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from ._util import atomic_write_json
from .grid import make_grid_spec
from .map_store import load_map, load_raster, precompute, save_map, save_raster
from .measurement import calibrate, load_calibration, save_calibration
from .simulator import (
    CameraRig,
    MissionConfig,
    PerturbationConfig,
    WorldPair,
    calibration_distances,
    generate_world,
    mission_summary,
    random_waypoints,
    run_mission,
    write_mission_csv,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NO_CONVERGENCE = 4


class ConfigError(Exception):
    """Bad flags, malformed config file, or missing referenced paths."""


_MISSION_KEYS = {
    "waypoints",
    "trajectory",
    "u_l",
    "speed",
    "sigma_xy_rate",
    "sigma_theta_rate_deg",
    "sigma_v_deg",
    "likelihood",
    "D",
    "w",
    "out_res",
    "seed",
    "convergence_threshold",
    "max_updates",
    "use_camera",
    "camera",
}
_PATH_KEYS = {"map_raster", "flight_raster", "descriptor_map", "calibration", "out_dir"}


def _config_hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()[:16]


def _manifest(extra: dict, config_obj) -> dict:
    out = {"version": __version__, "config_hash": _config_hash(config_obj)}
    out.update(extra)
    return out


def _load_config_file(path) -> dict:
    if not os.path.exists(path):
        raise ConfigError(f"config file does not exist: {path}")
    with open(path) as f:
        try:
            cfg = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {path} is not valid JSON: {e}") from e
    if not isinstance(cfg, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    unknown = set(cfg) - _MISSION_KEYS - _PATH_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return cfg


def _require_path(cfg: dict, key: str):
    if key not in cfg or not cfg[key]:
        raise ConfigError(f"config field '{key}' is required")
    path = cfg[key]
    if not os.path.exists(path):
        raise ConfigError(f"config field '{key}': path does not exist: {path}")
    return path


def _mission_config(cfg: dict, spec, seed=None) -> MissionConfig:
    kwargs = {k: cfg[k] for k in cfg if k in _MISSION_KEYS - {"waypoints", "trajectory", "camera"}}
    if seed is not None:
        kwargs["seed"] = int(seed)
    if "camera" in cfg:
        cam = cfg["camera"]
        if not isinstance(cam, dict):
            raise ConfigError("config field 'camera' must be an object")
        try:
            kwargs["camera"] = CameraRig(**cam)
        except TypeError as e:
            raise ConfigError(f"config field 'camera': {e}") from e
    use_seed = kwargs.get("seed", 0)
    if "waypoints" in cfg and cfg["waypoints"]:
        waypoints = [tuple(map(float, p)) for p in cfg["waypoints"]]
    else:
        traj = cfg.get("trajectory", {}) or {}
        if not isinstance(traj, dict):
            raise ConfigError("config field 'trajectory' must be an object")
        margin = 0.12
        span_x = spec.x_max - spec.x_min
        span_y = spec.y_max - spec.y_min
        box = traj.get(
            "box",
            (
                spec.x_min + margin * span_x,
                spec.x_max - margin * span_x,
                spec.y_min + margin * span_y,
                spec.y_max - margin * span_y,
            ),
        )
        waypoints = random_waypoints(
            np.random.default_rng(int(use_seed) + 7_654_321),
            box,
            n_legs=int(traj.get("n_legs", 9)),
            leg_span=(float(traj.get("leg_min", 550.0)), float(traj.get("leg_max", 950.0))),
        )
    try:
        return MissionConfig(waypoints=waypoints, **kwargs)
    except TypeError as e:
        raise ConfigError(str(e)) from e


def _load_mission_inputs(cfg: dict):
    world = WorldPair(
        map_raster=load_raster(_require_path(cfg, "map_raster")),
        flight_raster=load_raster(_require_path(cfg, "flight_raster")),
    )
    dmap = load_map(_require_path(cfg, "descriptor_map"))
    calib = None
    if cfg.get("likelihood", "bayesian") == "bayesian":
        calib = load_calibration(_require_path(cfg, "calibration"))
    return world, dmap, calib


# ---------------------------------------------------------------------------
# Commands


def cmd_worldgen(args) -> int:
    if args.width <= 0 or args.height <= 0:
        raise ConfigError("--width/--height must be positive")
    pert = PerturbationConfig(0.0, 0.0, 0.0, 0.0) if args.no_perturbation else PerturbationConfig()
    world = generate_world(
        seed=args.seed,
        width=args.width,
        height=args.height,
        gsd=args.gsd,
        margin=args.margin,
        perturbation=pert,
    )
    os.makedirs(args.out, exist_ok=True)
    save_raster(world.map_raster, os.path.join(args.out, "map.png"))
    save_raster(world.flight_raster, os.path.join(args.out, "flight.png"))
    cfg = {
        "seed": args.seed,
        "width": args.width,
        "height": args.height,
        "gsd": args.gsd,
        "margin": args.margin,
        "perturbation": not args.no_perturbation,
    }
    atomic_write_json(os.path.join(args.out, "world.json"), _manifest(cfg, cfg))
    print(f"world written to {args.out}")
    return EXIT_OK


def cmd_precompute(args) -> int:
    raster = load_raster(_existing(args.map_raster, "--map-raster"))
    spec = make_grid_spec((args.x0, args.x1, args.y0, args.y1), args.rxy, args.ntheta)
    dmap = precompute(raster, spec, w=args.w, D=args.D, out_res=args.out_res)
    save_map(dmap, args.out, provider="block_mean", w=args.w, out_res=args.out_res)
    print(f"descriptor map {spec.n_x}x{spec.n_y}x{spec.n_theta} D={args.D} -> {args.out}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    flight = load_raster(_existing(args.flight_raster, "--flight-raster"))
    map_raster = load_raster(_existing(args.map_raster, "--map-raster"))
    dmap = load_map(_existing(args.map, "--map"))
    world = WorldPair(map_raster=map_raster, flight_raster=flight)
    match, nonmatch = calibration_distances(
        world, dmap, n_pairs=args.pairs, seed=args.seed, w=args.w, out_res=args.out_res
    )
    model = calibrate(match, nonmatch, bins=args.bins, floor=args.floor)
    save_calibration(model, args.out)
    print(
        f"calibrated {args.pairs} pairs: match median {np.median(match):.3f}, "
        f"nonmatch median {np.median(nonmatch):.3f} -> {args.out}"
    )
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _load_config_file(args.config)
    out_dir = args.out or cfg.get("out_dir")
    if not out_dir:
        raise ConfigError("no output dir: set --out or config field 'out_dir'")
    world, dmap, calib = _load_mission_inputs(cfg)
    mission = _mission_config(cfg, dmap.spec, seed=args.seed)
    mission.calibration = calib
    log = run_mission(world, dmap, mission)
    os.makedirs(out_dir, exist_ok=True)
    write_mission_csv(log, os.path.join(out_dir, "mission.csv"))
    summary = _manifest(mission_summary(log), cfg)
    summary["seed"] = mission.seed
    atomic_write_json(os.path.join(out_dir, "summary.json"), summary)
    print(
        f"mission seed {mission.seed}: {log.n_updates} updates, "
        f"k_c={log.k_c}, mean_err_post={log.mean_err_post}"
    )
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load_config_file(args.config)
    out_dir = args.out or cfg.get("out_dir")
    if not out_dir:
        raise ConfigError("no output dir: set --out or config field 'out_dir'")
    if args.seeds < 1:
        raise ConfigError("--seeds must be >= 1")
    world, dmap, calib = _load_mission_inputs(cfg)
    base_seed = int(cfg.get("seed", 0))
    per_seed = []
    os.makedirs(out_dir, exist_ok=True)
    for i in range(args.seeds):
        seed = base_seed + i
        mission = _mission_config(cfg, dmap.spec, seed=seed)
        mission.calibration = calib
        log = run_mission(world, dmap, mission)
        seed_dir = os.path.join(out_dir, f"seed_{seed:04d}")
        os.makedirs(seed_dir, exist_ok=True)
        write_mission_csv(log, os.path.join(seed_dir, "mission.csv"))
        summary = mission_summary(log)
        summary["seed"] = seed
        atomic_write_json(os.path.join(seed_dir, "summary.json"), summary)
        per_seed.append(summary)
        print(
            f"seed {seed}: k_c={summary['k_c']}, "
            f"mean_err_post={summary['mean_err_post']}, "
            f"divergences={summary['divergence_events']}"
        )
    agg = _aggregate(per_seed)
    atomic_write_json(
        os.path.join(out_dir, "sweep.json"), _manifest({**agg, "per_seed": per_seed}, cfg)
    )
    print(
        f"sweep: p_c={agg['p_c']:.2f}, mean_k_c={agg['mean_k_c']}, "
        f"mean_err_post={agg['mean_err_post']}"
    )
    if agg["n_converged"] == 0:
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


def _aggregate(per_seed: list) -> dict:
    n = len(per_seed)
    conv = [s for s in per_seed if s["k_c"] is not None]
    return {
        "n_missions": n,
        "n_converged": len(conv),
        "p_c": len(conv) / n if n else 0.0,
        "mean_k_c": float(np.mean([s["k_c"] for s in conv])) if conv else None,
        "mean_err_post": float(np.mean([s["mean_err_post"] for s in conv])) if conv else None,
    }


def cmd_report(args) -> int:
    if not os.path.exists(args.sweep):
        raise ConfigError(f"--sweep path does not exist: {args.sweep}")
    with open(args.sweep) as f:
        sweep = json.load(f)
    per_seed = sweep.get("per_seed", [])
    agg = _aggregate(per_seed)
    rows = [("seed", "k_c", "err_post_m", "divergences")]
    for s in per_seed:
        rows.append(
            (
                str(s.get("seed")),
                "-" if s["k_c"] is None else str(s["k_c"]),
                "-" if s["mean_err_post"] is None else f"{s['mean_err_post']:.1f}",
                str(s.get("divergence_events", 0)),
            )
        )
    widths = [max(len(r[c]) for r in rows) for c in range(len(rows[0]))]
    for r in rows:
        print("  ".join(v.rjust(wd) for v, wd in zip(r, widths)))
    print(
        f"p_c={agg['p_c']:.2f}  mean_k_c={agg['mean_k_c']}  "
        f"mean_err_post={agg['mean_err_post']}"
    )
    if args.out:
        atomic_write_json(args.out, _manifest(agg, sweep.get("config_hash", "")))
    return EXIT_OK


def _existing(path, flag):
    if not os.path.exists(path):
        raise ConfigError(f"{flag}: path does not exist: {path}")
    return path


# ---------------------------------------------------------------------------
# Parser


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="gridloc",
        description="Grid-based global localization: simulation and batch pipeline",
    )
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    w = sub.add_parser("worldgen", help="generate a synthetic map/flight raster pair")
    w.add_argument("--seed", type=int, required=True)
    w.add_argument("--width", type=float, default=3000.0)
    w.add_argument("--height", type=float, default=3000.0)
    w.add_argument("--gsd", type=float, default=3.0)
    w.add_argument("--margin", type=float, default=120.0)
    w.add_argument("--no-perturbation", action="store_true")
    w.add_argument("--out", required=True)
    w.set_defaults(func=cmd_worldgen)

    p = sub.add_parser("precompute", help="precompute the descriptor map over a grid")
    p.add_argument("--map-raster", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--x0", type=float, default=0.0)
    p.add_argument("--x1", type=float, required=True)
    p.add_argument("--y0", type=float, default=0.0)
    p.add_argument("--y1", type=float, required=True)
    p.add_argument("--rxy", type=float, default=10.0)
    p.add_argument("--ntheta", type=int, default=60)
    p.add_argument("--w", type=float, default=100.0)
    p.add_argument("--out-res", type=float, default=10.0)
    p.add_argument("--D", type=int, default=8)
    p.set_defaults(func=cmd_precompute)

    c = sub.add_parser("calibrate", help="fit match/nonmatch distance histograms")
    c.add_argument("--map-raster", required=True)
    c.add_argument("--flight-raster", required=True)
    c.add_argument("--map", required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--pairs", type=int, default=2000)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--bins", type=int, default=64)
    c.add_argument("--floor", type=float, default=1e-6)
    c.add_argument("--w", type=float, default=100.0)
    c.add_argument("--out-res", type=float, default=10.0)
    c.set_defaults(func=cmd_calibrate)

    r = sub.add_parser("run", help="run one mission from a config file")
    r.add_argument("--config", required=True)
    r.add_argument("--out", default=None)
    r.add_argument("--seed", type=int, default=None)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run a seed sweep of missions")
    s.add_argument("--config", required=True)
    s.add_argument("--seeds", type=int, default=10)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_sweep)

    rep = sub.add_parser("report", help="tabulate a sweep's convergence metrics")
    rep.add_argument("--sweep", required=True)
    rep.add_argument("--out", default=None)
    rep.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    ap = _build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on bad flags already; keep its convention.
        return int(e.code or 0)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    raise SystemExit(main())
