"""Synthetic worlds, noisy sensor streams, and end-to-end mission runs.

A world is a pair of georeferenced rasters over the same ground: the map
raster (what the descriptor map is precomputed from) and a flight raster
(what the vehicle observes) derived from it by a seeded appearance
perturbation — global brightness/contrast change, per-channel offsets, and
pixel noise.  Terrain is multi-octave value noise classified into colored
regions with sparse high-contrast structures and roads, which gives patches
enough layout variety for descriptors to disambiguate places.

A mission walks a waypoint polyline at fixed update cadence ``u_l`` meters,
feeding the filter odometry/heading/patch observations and logging the
estimate against ground truth after every update.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._util import TWO_PI, atomic_write_text, wrap_angle, wrap_signed
from .descriptor import block_mean_descriptor
from .grid import (
    BeliefGrid,
    ZeroMassError,
    apply_weights,
    converged,
    estimate_pose,
    init_uniform,
)
from .map_store import (
    DescriptorMap,
    RasterMap,
    _sample_bilinear,
    crop_rotated_patch,
)
from .measurement import (
    CalibrationModel,
    HeadingMeasurement,
    bayesian_weights,
    heading_weights,
    linear_weights,
)
from .orthoprojection import (
    InfeasibleSquareError,
    fit_horizontal_plane,
    make_pitched_camera,
    nadir_square,
    orthoproject,
)
from .prediction import OdometryMeasurement, OdometryNoiseModel, predict

__all__ = [
    "WorldPair",
    "PerturbationConfig",
    "MissionConfig",
    "CameraRig",
    "LogRow",
    "MissionLog",
    "generate_world",
    "sample_odometry",
    "sample_heading",
    "random_waypoints",
    "run_mission",
    "calibration_distances",
    "write_mission_csv",
    "mission_summary",
]


@dataclass(frozen=True)
class WorldPair:
    """Map raster and its appearance-perturbed flight twin (same georeferencing)."""

    map_raster: RasterMap
    flight_raster: RasterMap


@dataclass(frozen=True)
class PerturbationConfig:
    """Appearance gap between map and flight imagery.

    Amplitudes are drawn per world from the seeded rng within these spans;
    zero everything to make the flight raster identical to the map.
    """

    brightness: float = 14.0  # global offset, intensity levels
    contrast: float = 0.10  # relative gain span around 1
    channel: float = 9.0  # per-channel offset span, levels
    pixel_noise: float = 7.0  # additive Gaussian std, levels

    def is_zero(self) -> bool:
        return self.brightness == 0 and self.contrast == 0 and self.channel == 0 and self.pixel_noise == 0


@dataclass(frozen=True)
class CameraRig:
    """Forward-pitched camera settings for the orthoprojection observation path."""

    altitude: float = 70.0
    pitch_deg: float = 50.0
    fx: float = 500.0
    fy: float = 500.0
    width: int = 640
    height: int = 400
    n_landmarks: int = 40
    landmark_noise: float = 0.0


@dataclass
class MissionConfig:
    """Everything a mission needs besides the world and the descriptor map."""

    waypoints: list
    u_l: float = 50.0
    speed: float = 15.0
    sigma_xy_rate: float = 0.05
    sigma_theta_rate_deg: float = 0.15
    sigma_v_deg: float = 3.0
    likelihood: str = "bayesian"
    D: int = 8
    w: float = 100.0
    out_res: float = 10.0
    seed: int = 0
    convergence_threshold: float = 100.0
    max_updates: int | None = None
    calibration: CalibrationModel | None = None
    use_camera: bool = False
    camera: CameraRig = field(default_factory=CameraRig)

    def noise_model(self) -> OdometryNoiseModel:
        return OdometryNoiseModel(
            sigma_xy_rate=self.sigma_xy_rate,
            sigma_theta_rate=np.deg2rad(self.sigma_theta_rate_deg),
        )


@dataclass(frozen=True)
class LogRow:
    k: int
    x_true: float
    y_true: float
    theta_true: float
    x_est: float
    y_est: float
    theta_est: float
    err_xy: float
    err_theta: float
    sigma_xy: float
    converged: int


@dataclass
class MissionLog:
    """Per-update rows plus the convergence summary of one mission."""

    rows: list
    k_c: int | None
    mean_err_post: float | None
    divergence_events: int

    @property
    def n_updates(self) -> int:
        return len(self.rows)

    @property
    def converged(self) -> bool:
        return self.k_c is not None


# ---------------------------------------------------------------------------
# World generation


def _value_noise(rng, shape, wavelength_px: float) -> np.ndarray:
    """Bilinearly interpolated lattice noise in [-1, 1] over an (H, W) grid."""
    h, w = shape
    lh = int(np.ceil(h / wavelength_px)) + 2
    lw = int(np.ceil(w / wavelength_px)) + 2
    lattice = rng.uniform(-1.0, 1.0, size=(lh, lw, 1))
    rows = np.arange(h)[:, None] / wavelength_px
    cols = np.arange(w)[None, :] / wavelength_px
    rows = np.broadcast_to(rows, shape)
    cols = np.broadcast_to(cols, shape)
    return _sample_bilinear(lattice, rows, cols)[..., 0]


def _paint_structures(rng, arr: np.ndarray, gsd: float) -> None:
    """Scatter bright/dark building-like blocks over the raster, in place."""
    h, w = arr.shape[:2]
    area_m2 = h * w * gsd * gsd
    count = max(4, int(area_m2 / 180.0**2))
    palette = np.array(
        [
            [205, 198, 185],  # bright roof
            [58, 52, 50],  # dark roof
            [168, 120, 90],  # tiled roof
            [140, 140, 148],  # paved yard
        ]
    )
    for _ in range(count):
        cx = rng.uniform(0, w)
        cy = rng.uniform(0, h)
        sx = rng.uniform(12.0, 45.0) / gsd
        sy = rng.uniform(12.0, 45.0) / gsd
        color = palette[rng.integers(0, len(palette))]
        r0, r1 = int(max(0, cy - sy / 2)), int(min(h, cy + sy / 2))
        c0, c1 = int(max(0, cx - sx / 2)), int(min(w, cx + sx / 2))
        if r1 > r0 and c1 > c0:
            arr[r0:r1, c0:c1] = color


def _paint_roads(rng, arr: np.ndarray, gsd: float) -> None:
    h, w = arr.shape[:2]
    rows, cols = np.mgrid[0:h, 0:w]
    n_roads = 2 + int(np.sqrt(h * w) * gsd / 1500.0)
    for _ in range(n_roads):
        px = rng.uniform(0, w)
        py = rng.uniform(0, h)
        ang = rng.uniform(0, np.pi)
        nx, ny = -np.sin(ang), np.cos(ang)
        dist = np.abs((cols - px) * nx + (rows - py) * ny) * gsd
        arr[dist < 4.0] = (126, 122, 116)


def _quantize(arr: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(arr), 0.0, 255.0).astype(np.float32)


def generate_world(
    seed: int,
    width: float,
    height: float,
    gsd: float = 3.0,
    margin: float = 120.0,
    perturbation: PerturbationConfig = PerturbationConfig(),
) -> WorldPair:
    """Deterministic synthetic world covering [0, width] x [0, height] meters.

    The rasters extend ``margin`` meters beyond the extent on every side so
    rotated patch crops near the border stay inside.  Same seed, same
    output, bitwise.
    """
    if width <= 0 or height <= 0:
        raise ValueError("world dimensions must be positive")
    rng = np.random.default_rng(seed)
    h = int(np.ceil((height + 2 * margin) / gsd))
    w = int(np.ceil((width + 2 * margin) / gsd))

    terrain = np.zeros((h, w))
    for wavelength_m, amp in ((1300.0, 1.0), (640.0, 0.62), (310.0, 0.38), (150.0, 0.22), (72.0, 0.13)):
        terrain += amp * _value_noise(rng, (h, w), wavelength_m / gsd)
    terrain /= 2.35
    texture = _value_noise(rng, (h, w), 40.0 / gsd)

    classes = np.array(
        [
            [38, 68, 126],  # water
            [118, 152, 74],  # open field
            [96, 124, 62],  # shrubland
            [44, 86, 46],  # forest
        ],
        dtype=np.float64,
    )
    idx = np.digitize(terrain, [-0.34, 0.08, 0.42])
    arr = classes[idx]
    arr *= (0.82 + 0.36 * (texture[..., None] * 0.5 + 0.5))
    _paint_roads(rng, arr, gsd)
    _paint_structures(rng, arr, gsd)
    base = _quantize(arr)
    origin = (-margin, -margin)
    map_raster = RasterMap(pixels=base, origin_x=origin[0], origin_y=origin[1], gsd=gsd)

    p = perturbation
    if p.is_zero():
        flight = base.copy()
    else:
        # Magnitudes from the upper half of each span so every seed gets a
        # genuine appearance gap; brightness and channel shifts share a sign
        # so they compound instead of canceling (channel magnitudes still
        # differ, so the hue balance changes too).
        sign = 1.0 if rng.uniform() < 0.5 else -1.0
        gain = 1.0 + rng.uniform(0.5 * p.contrast, p.contrast) * (1.0 if rng.uniform() < 0.5 else -1.0)
        offs = sign * rng.uniform(0.5 * p.brightness, p.brightness)
        chan = sign * rng.uniform(0.5 * p.channel, p.channel, size=3)
        flight = (base - 128.0) * gain + 128.0 + offs + chan
        if p.pixel_noise > 0:
            flight = flight + rng.normal(0.0, p.pixel_noise, size=base.shape)
        flight = _quantize(flight)
    flight_raster = RasterMap(pixels=flight, origin_x=origin[0], origin_y=origin[1], gsd=gsd)
    return WorldPair(map_raster=map_raster, flight_raster=flight_raster)


# ---------------------------------------------------------------------------
# Sensor sampling


def sample_odometry(true_delta, model: OdometryNoiseModel, rng) -> OdometryMeasurement:
    """Noisy odometry for a true body-frame delta ``(dx, dy, dtheta, dist)``.

    Translation components get independent N(0, sigma_xy^2) noise, rotation
    N(0, sigma_theta^2), with sigmas grown linearly over ``dist``; the
    distance channel stays exact (it only scales noise downstream).
    """
    dx, dy, dtheta, dist = (float(v) for v in true_delta)
    if dist < 0:
        raise ValueError("distance traveled must be >= 0")
    sigma_xy, sigma_theta = model.sigma_xy_rate * dist, model.sigma_theta_rate * dist
    return OdometryMeasurement(
        u_x=dx + rng.normal(0.0, sigma_xy) if sigma_xy > 0 else dx,
        u_y=dy + rng.normal(0.0, sigma_xy) if sigma_xy > 0 else dy,
        u_theta=dtheta + rng.normal(0.0, sigma_theta) if sigma_theta > 0 else dtheta,
        u_o=dist,
    )


def sample_heading(true_theta: float, sigma_v: float, rng) -> HeadingMeasurement:
    """Compass measurement: true heading plus wrapped Gaussian noise."""
    v = true_theta if sigma_v == 0 else true_theta + rng.normal(0.0, sigma_v)
    return HeadingMeasurement(v=float(wrap_angle(v)), sigma_v=max(sigma_v, 1e-9))

# ---------------------------------------------------------------------------
# Trajectories and missions


def random_waypoints(seed, box, n_legs: int = 9, leg_span=(550.0, 950.0)) -> list:
    """Seeded waypoint polyline that stays inside ``box`` = (x0, x1, y0, y1).

    Legs turn by 20-85 degrees with random handedness; a leg about to leave
    the box is re-aimed toward the box center with jitter, so long missions
    keep weaving through the map instead of hugging a wall.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    x0, x1, y0, y1 = (float(v) for v in box)
    cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    px = rng.uniform(x0 + 0.3 * (x1 - x0), x1 - 0.3 * (x1 - x0))
    py = rng.uniform(y0 + 0.3 * (y1 - y0), y1 - 0.3 * (y1 - y0))
    bearing = rng.uniform(0.0, TWO_PI)
    pts = [(px, py)]
    for _ in range(n_legs):
        step = rng.uniform(*leg_span)
        nx = px + step * np.cos(bearing)
        ny = py + step * np.sin(bearing)
        if not (x0 <= nx <= x1 and y0 <= ny <= y1):
            bearing = np.arctan2(cy - py, cx - px) + rng.uniform(-0.5, 0.5)
            nx = px + step * np.cos(bearing)
            ny = py + step * np.sin(bearing)
            nx = min(max(nx, x0), x1)
            ny = min(max(ny, y0), y1)
        pts.append((float(nx), float(ny)))
        px, py = nx, ny
        bearing += rng.uniform(0.35, 1.5) * (1.0 if rng.uniform() < 0.5 else -1.0)
    return pts


@dataclass(frozen=True)
class _Pose:
    x: float
    y: float
    theta: float


class _Path:
    """Arc-length parameterization of a waypoint polyline."""

    def __init__(self, waypoints):
        pts = np.asarray(waypoints, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
            raise ValueError("need at least two (x, y) waypoints")
        seg = np.diff(pts, axis=0)
        lengths = np.hypot(seg[:, 0], seg[:, 1])
        if np.any(lengths <= 0):
            raise ValueError("zero-length trajectory segment")
        self.pts = pts
        self.bearings = np.arctan2(seg[:, 1], seg[:, 0])
        self.cum = np.concatenate([[0.0], np.cumsum(lengths)])
        self.lengths = lengths
        self.total = float(self.cum[-1])

    def pose_at(self, s: float) -> _Pose:
        s = min(max(s, 0.0), self.total - 1e-9)
        i = int(np.searchsorted(self.cum, s, side="right")) - 1
        i = min(max(i, 0), len(self.lengths) - 1)
        t = (s - self.cum[i]) / self.lengths[i]
        p = self.pts[i] + t * (self.pts[i + 1] - self.pts[i])
        return _Pose(x=float(p[0]), y=float(p[1]), theta=float(wrap_angle(self.bearings[i])))


def _render_camera_view(raster: RasterMap, pose: _Pose, camera, altitude: float) -> np.ndarray:
    """Pinhole render of the flight raster from ``altitude`` above the pose.

    Every pixel ray is intersected with the true ground plane and sampled
    bilinearly from the raster (clamped at the raster border).
    """
    h, w = camera.height, camera.width
    us, vs = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64), indexing="xy")
    dirs_c = np.stack([(us - camera.cx) / camera.fx, (vs - camera.cy) / camera.fy, np.ones_like(us)], axis=-1)
    dirs_l = dirs_c @ camera.R.T
    dz = dirs_l[..., 2]
    descending = dz < -1e-9
    s = np.where(descending, -altitude / np.where(descending, dz, -1.0), 0.0)
    lx = s * dirs_l[..., 0]
    ly = s * dirs_l[..., 1]
    ct, st = np.cos(pose.theta), np.sin(pose.theta)
    wx = pose.x + lx * ct - ly * st
    wy = pose.y + lx * st + ly * ct
    cols = (wx - raster.origin_x) / raster.gsd - 0.5
    rows = (wy - raster.origin_y) / raster.gsd - 0.5
    np.clip(rows, 0, raster.height - 1, out=rows)
    np.clip(cols, 0, raster.width - 1, out=cols)
    img = _sample_bilinear(raster.pixels, rows, cols)
    img[~descending] = 128.0
    return img


def _shift_weight_field(w: np.ndarray, spec, offset_body) -> np.ndarray:
    """Re-index a weight field from square-center hypotheses to vehicle hypotheses.

    The camera's ground square sits at a known body-frame offset from the
    vehicle; a vehicle at voxel (i, j, l) therefore predicts the square at
    (i, j) shifted by that offset rotated to the voxel's heading.  Gathers
    the per-heading-slice weights at the shifted indices (nearest voxel);
    indices falling off the map receive the slice's mean weight, which is
    uninformative rather than annihilating.
    """
    sx, sy = offset_body
    out = np.empty_like(w)
    for l, theta in enumerate(spec.theta_centers()):
        ct, st = np.cos(theta), np.sin(theta)
        dx = sx * ct - sy * st
        dy = sx * st + sy * ct
        ox = int(np.floor(dx / spec.r_xy + 0.5))
        oy = int(np.floor(dy / spec.r_xy + 0.5))
        slab = w[:, :, l]
        fill = float(slab.mean())
        dst = np.full(slab.shape, fill, dtype=w.dtype)
        di0, di1 = max(0, -ox), min(spec.n_x, spec.n_x - ox)
        dj0, dj1 = max(0, -oy), min(spec.n_y, spec.n_y - oy)
        if di0 < di1 and dj0 < dj1:
            dst[di0:di1, dj0:dj1] = slab[di0 + ox : di1 + ox, dj0 + oy : dj1 + oy]
        out[:, :, l] = dst
    return out


def _observe(world: WorldPair, pose: _Pose, config: MissionConfig, camera, rng):
    """One patch observation at the true pose; returns (patch, body_offset|None)."""
    if not config.use_camera:
        patch = crop_rotated_patch(
            world.flight_raster, pose.x, pose.y, pose.theta, config.w, config.out_res
        )
        return patch, None
    rig = config.camera
    n = max(rig.n_landmarks, 3)
    px = rng.uniform(0.0, camera.width - 1.0, size=n)
    pv = rng.uniform(0.0, camera.height - 1.0, size=n)
    dirs_c = np.column_stack([(px - camera.cx) / camera.fx, (pv - camera.cy) / camera.fy, np.ones(n)])
    dirs_l = dirs_c @ camera.R.T
    ok = dirs_l[:, 2] < -1e-9
    dirs_l = dirs_l[ok] if ok.any() else dirs_l
    s = -rig.altitude / dirs_l[:, 2]
    pts = s[:, None] * dirs_l
    if rig.landmark_noise > 0:
        pts = pts + rng.normal(0.0, rig.landmark_noise, size=pts.shape)
    z0 = fit_horizontal_plane(pts)
    square = nadir_square(camera, z0, config.w)
    image = _render_camera_view(world.flight_raster, pose, camera, rig.altitude)
    patch, square = orthoproject(image, camera, square, config.out_res)
    return patch, (float(square.center[0]), float(square.center[1]))


def _map_weights(patch, dmap: DescriptorMap, config: MissionConfig):
    wk = block_mean_descriptor(patch, config.D)
    if config.likelihood == "linear":
        return linear_weights(wk, dmap)
    return bayesian_weights(wk, dmap, config.calibration)


def run_mission(world: WorldPair, dmap: DescriptorMap, config: MissionConfig) -> MissionLog:
    """Run the filter over one simulated mission and log every update.

    Starting from the uniform wake-up prior, every ``u_l`` meters of travel:
    predict with sampled odometry, weight by sampled compass heading and by
    the descriptor match of the observed patch, renormalize, estimate.  A
    total-mass-zero contradiction is logged as a divergence event and the
    belief re-initializes to uniform.
    """
    if config.likelihood not in ("linear", "bayesian"):
        raise ValueError(f"unknown likelihood {config.likelihood!r}")
    if config.likelihood == "bayesian" and config.calibration is None:
        raise ValueError("bayesian likelihood requires a calibration model")
    spec = dmap.spec
    rng = np.random.default_rng(config.seed)
    model = config.noise_model()
    sigma_v = float(np.deg2rad(config.sigma_v_deg))
    path = _Path(config.waypoints)
    n_updates = int(np.floor(path.total / config.u_l))
    if config.max_updates is not None:
        n_updates = min(n_updates, config.max_updates)
    camera = None
    if config.use_camera:
        rig = config.camera
        camera = make_pitched_camera(
            pitch=float(np.deg2rad(rig.pitch_deg)),
            fx=rig.fx,
            fy=rig.fy,
            width=rig.width,
            height=rig.height,
        )

    belief = init_uniform(spec)
    prev = path.pose_at(0.0)
    rows = []
    divergences = 0
    for k in range(1, n_updates + 1):
        cur = path.pose_at(k * config.u_l)
        dwx, dwy = cur.x - prev.x, cur.y - prev.y
        ct, st = np.cos(prev.theta), np.sin(prev.theta)
        body_dx = ct * dwx + st * dwy
        body_dy = -st * dwx + ct * dwy
        dtheta = float(wrap_signed(cur.theta - prev.theta))
        u = sample_odometry((body_dx, body_dy, dtheta, config.u_l), model, rng)
        vmeas = sample_heading(cur.theta, sigma_v, rng)

        belief = predict(belief, u, model)
        try:
            patch, offset = _observe(world, cur, config, camera, rng)
            wm = _map_weights(patch, dmap, config)
            if offset is not None:
                wm.w = _shift_weight_field(wm.w, spec, offset)
            wh = heading_weights(spec, vmeas)
            belief = apply_weights(belief, wh, wm)
        except (ZeroMassError, InfeasibleSquareError) as exc:
            if isinstance(exc, ZeroMassError):
                divergences += 1
                belief = init_uniform(spec)
            # An infeasible square just skips the measurement for this step;
            # the predicted belief must still be normalized for estimation.
            total = belief.total()
            if not np.isfinite(total) or total <= 0:
                belief = init_uniform(spec)
            else:
                belief = BeliefGrid(spec=spec, mass=belief.mass / total)

        est = estimate_pose(belief)
        flag = converged(est, config.convergence_threshold)
        err_xy = float(np.hypot(est.x - cur.x, est.y - cur.y))
        err_theta = float(abs(wrap_signed(est.theta - cur.theta)))
        rows.append(
            LogRow(
                k=k,
                x_true=cur.x,
                y_true=cur.y,
                theta_true=float(wrap_angle(cur.theta)),
                x_est=est.x,
                y_est=est.y,
                theta_est=est.theta,
                err_xy=err_xy,
                err_theta=err_theta,
                sigma_xy=est.sigma_xy,
                converged=int(flag),
            )
        )
        prev = cur

    k_c = next((r.k for r in rows if r.converged), None)
    if k_c is None:
        mean_err_post = None
    else:
        post = [r.err_xy for r in rows if r.k >= k_c]
        mean_err_post = float(np.mean(post))
    return MissionLog(rows=rows, k_c=k_c, mean_err_post=mean_err_post, divergence_events=divergences)


def calibration_distances(world: WorldPair, dmap: DescriptorMap, n_pairs: int, seed, w: float, out_res: float):
    """Match/nonmatch descriptor-distance samples for likelihood calibration.

    Draws poses uniformly over the map extent; the observation descriptor
    comes from the flight raster at the exact pose, the matching map vector
    from the voxel containing that pose, and the nonmatch vector from a
    uniformly random other voxel.  Returns ``(match, nonmatch)`` arrays.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    spec = dmap.spec
    match = np.empty(n_pairs)
    nonmatch = np.empty(n_pairs)
    flat = dmap.data.reshape(-1, dmap.D)
    for t in range(n_pairs):
        x = rng.uniform(spec.x_min + 0.5 * spec.r_xy, spec.x_min + (spec.n_x - 0.5) * spec.r_xy)
        y = rng.uniform(spec.y_min + 0.5 * spec.r_xy, spec.y_min + (spec.n_y - 0.5) * spec.r_xy)
        theta = rng.uniform(0.0, TWO_PI)
        patch = crop_rotated_patch(world.flight_raster, x, y, theta, w, out_res)
        wk = block_mean_descriptor(patch, dmap.D)
        i = min(int((x - spec.x_min) / spec.r_xy), spec.n_x - 1)
        j = min(int((y - spec.y_min) / spec.r_xy), spec.n_y - 1)
        l = min(int(theta / spec.r_theta), spec.n_theta - 1)
        mvec = dmap.data[i, j, l]
        c = np.sqrt(max(0.0, min(4.0, 2.0 - 2.0 * float(mvec @ wk.values))))
        match[t] = c
        while True:
            alt = rng.integers(0, flat.shape[0])
            if alt != (i * spec.n_y + j) * spec.n_theta + l:
                break
        avec = flat[alt]
        nonmatch[t] = np.sqrt(max(0.0, min(4.0, 2.0 - 2.0 * float(avec @ wk.values))))
    return match, nonmatch


def write_mission_csv(log: MissionLog, path) -> None:
    """Mission log as CSV (angles in radians, shortest-roundtrip floats)."""
    lines = ["k,x_true,y_true,theta_true,x_est,y_est,theta_est,err_xy,err_theta,sigma_xy,converged"]
    for r in log.rows:
        lines.append(
            f"{r.k},{r.x_true!r},{r.y_true!r},{r.theta_true!r},{r.x_est!r},{r.y_est!r},"
            f"{r.theta_est!r},{r.err_xy!r},{r.err_theta!r},{r.sigma_xy!r},{r.converged}"
        )
    atomic_write_text(path, "\n".join(lines) + "\n")


def mission_summary(log: MissionLog) -> dict:
    return {
        "n_updates": log.n_updates,
        "converged": log.converged,
        "k_c": log.k_c,
        "mean_err_post": log.mean_err_post,
        "divergence_events": log.divergence_events,
    }
