"""From a posed camera image to a canonical top-down ground patch.

All geometry lives in the gravity-aligned local frame L: origin at the
camera optical center, x pointing along the (horizontal projection of the)
vehicle heading, y to its left, z up against gravity.  Ground landmarks are
3D points in L; the terrain is modeled as the horizontal plane z = z0 fitted
to them.  A side x side meter square is placed on that plane, axis-aligned
in L, fully visible in the image and as close to nadir as possible; the
pixels inside its projection are warped by the corner homography into a
patch whose column axis is the heading (+x) and whose row axis is the left
(+y) — the same convention as map-raster crops, so descriptors of both are
directly comparable.

Camera convention: +z optical axis, +x image right, +u = fx*x/z + cx,
+v = fy*y/z + cy.  ``make_pitched_camera`` builds the standard rig used in
simulation: optical axis pitched forward from nadir by ``pitch`` radians
with image up pointing along the heading.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .descriptor import Patch
from .map_store import _sample_bilinear

__all__ = [
    "CameraModel",
    "GroundSquare",
    "InfeasibleSquareError",
    "make_pitched_camera",
    "fit_horizontal_plane",
    "nadir_square",
    "orthoproject",
    "homography_dlt",
]


class InfeasibleSquareError(RuntimeError):
    """No fully visible square of the requested side exists; skip this frame."""


@dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics plus pose in the local frame L.

    ``R`` maps camera-frame directions to L-frame directions (its columns
    are the camera axes expressed in L); ``t`` is the optical center in L.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        err = np.abs(self.R @ self.R.T - np.eye(3)).max()
        if err > 1e-9:
            raise ValueError(f"camera rotation not orthonormal (error {err:.2e})")


@dataclass(frozen=True)
class GroundSquare:
    """An axis-aligned square on the plane z = center[2] in L.

    ``transform`` is the 4x4 rigid transform from L to the square-centered
    frame S (pure translation; S keeps L's axes).
    """

    center: np.ndarray
    side: float
    transform: np.ndarray = field(init=False)

    def __post_init__(self):
        T = np.eye(4)
        T[:3, 3] = -np.asarray(self.center, dtype=np.float64)
        object.__setattr__(self, "transform", T)
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64))


def make_pitched_camera(
    pitch: float,
    fx: float = 400.0,
    fy: float = 400.0,
    width: int = 640,
    height: int = 480,
    cx: float | None = None,
    cy: float | None = None,
    t=(0.0, 0.0, 0.0),
) -> CameraModel:
    """Camera looking ``pitch`` radians forward of straight down.

    At pitch 0 the optical axis is the nadir ray and image up is the flight
    direction; increasing pitch tilts the view toward the horizon ahead.
    """
    cp, sp = np.cos(pitch), np.sin(pitch)
    # Columns: camera x (image right) = -y_L, camera y (image down) tilts
    # from -x_L, camera z (optical axis) tilts from -z_L toward +x_L.
    R = np.array(
        [
            [0.0, -cp, sp],
            [-1.0, 0.0, 0.0],
            [0.0, -sp, -cp],
        ]
    )
    return CameraModel(
        fx=fx,
        fy=fy,
        cx=(width - 1) / 2.0 if cx is None else cx,
        cy=(height - 1) / 2.0 if cy is None else cy,
        width=width,
        height=height,
        R=R,
        t=np.asarray(t, dtype=np.float64),
    )


def fit_horizontal_plane(points) -> float:
    """Least-squares height of the horizontal plane through 3D points in L.

    With the normal constrained to +z the fit reduces to the mean of the
    points' z coordinates.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.size == 0:
        raise ValueError("cannot fit a plane to an empty point set")
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected (N, 3) points, got {pts.shape}")
    return float(pts[:, 2].mean())


def _project(camera: CameraModel, pts: np.ndarray):
    """Project L-frame points; returns (u, v, z_cam) with z_cam > 0 in front."""
    rel = np.asarray(pts, dtype=np.float64) - camera.t
    cam = rel @ camera.R  # == R.T @ rel per point
    z = cam[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = camera.fx * cam[..., 0] / z + camera.cx
        v = camera.fy * cam[..., 1] / z + camera.cy
    return u, v, z


def _square_corners(cx: np.ndarray, cy: np.ndarray, z0: float, side: float) -> np.ndarray:
    """Corners (..., 4, 3) of axis-aligned squares centered at (cx, cy, z0)."""
    h = 0.5 * side
    offs = np.array([(-h, -h), (h, -h), (h, h), (-h, h)])
    out = np.empty(np.shape(cx) + (4, 3))
    out[..., :, 0] = np.asarray(cx)[..., None] + offs[:, 0]
    out[..., :, 1] = np.asarray(cy)[..., None] + offs[:, 1]
    out[..., :, 2] = z0
    return out


def _feasible(camera: CameraModel, cx, cy, z0: float, side: float) -> np.ndarray:
    """Vectorized check: all four corners project inside the image bounds."""
    u, v, z = _project(camera, _square_corners(cx, cy, z0, side))
    ok = (
        (z > 1e-9)
        & (u >= 0.0)
        & (u <= camera.width - 1.0)
        & (v >= 0.0)
        & (v <= camera.height - 1.0)
    )
    return ok.all(axis=-1)


def _ground_footprint(camera: CameraModel, z0: float) -> np.ndarray:
    """Plane hits of the four image-corner rays, (4, 2); raises if any miss."""
    corners_px = np.array(
        [
            (0.0, 0.0),
            (camera.width - 1.0, 0.0),
            (camera.width - 1.0, camera.height - 1.0),
            (0.0, camera.height - 1.0),
        ]
    )
    dirs_c = np.column_stack(
        [
            (corners_px[:, 0] - camera.cx) / camera.fx,
            (corners_px[:, 1] - camera.cy) / camera.fy,
            np.ones(4),
        ]
    )
    dirs_l = dirs_c @ camera.R.T
    dz = dirs_l[:, 2]
    if np.any(dz >= -1e-12):
        raise InfeasibleSquareError(
            "image corner ray does not descend to the ground plane (horizon in view)"
        )
    s = (z0 - camera.t[2]) / dz
    hits = camera.t[None, :2] + s[:, None] * dirs_l[:, :2]
    return hits


def nadir_square(camera: CameraModel, z0: float, side: float, tol: float = 0.01) -> GroundSquare:
    """Fully visible axis-aligned square on z = z0 closest to the nadir point.

    Coarse deterministic grid search over the ground footprint picks the
    best feasible center (row-major first-wins tie break), then a compass
    (projected coordinate-descent) refinement walks toward nadir with step
    halving down to ``tol`` meters.

    Raises
    ------
    InfeasibleSquareError
        If no fully visible square of this side exists (or the horizon is
        in view).
    """
    nadir = camera.t[:2]
    hits = _ground_footprint(camera, z0)
    lo = hits.min(axis=0)
    hi = hits.max(axis=0)
    span = float(max(hi[0] - lo[0], hi[1] - lo[1]))
    step = max(min(side / 10.0, span / 60.0), 4.0 * tol)
    gx = np.arange(lo[0], hi[0] + step, step)
    gy = np.arange(lo[1], hi[1] + step, step)
    cxg, cyg = np.meshgrid(gx, gy, indexing="xy")
    cxg, cyg = cxg.ravel(), cyg.ravel()
    ok = _feasible(camera, cxg, cyg, z0, side)
    if not ok.any():
        raise InfeasibleSquareError(
            f"no fully visible {side:.0f} m square on plane z={z0:.1f}"
        )
    d2 = (cxg - nadir[0]) ** 2 + (cyg - nadir[1]) ** 2
    d2[~ok] = np.inf
    best = int(np.argmin(d2))  # first minimum wins: deterministic
    cx_, cy_ = float(cxg[best]), float(cyg[best])

    cur = d2[best]
    while step > tol / 2.0:
        moved = True
        while moved:
            moved = False
            for ddx, ddy in ((step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)):
                nx, ny = cx_ + ddx, cy_ + ddy
                nd = (nx - nadir[0]) ** 2 + (ny - nadir[1]) ** 2
                if nd < cur - 1e-15 and _feasible(camera, np.array([nx]), np.array([ny]), z0, side)[0]:
                    cx_, cy_, cur = nx, ny, nd
                    moved = True
                    break
        step *= 0.5
    return GroundSquare(center=np.array([cx_, cy_, z0]), side=float(side))


def homography_dlt(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Homography H (3x3) with dst ~ H @ src, by the normalized DLT.

    ``src``/``dst`` are (N >= 4, 2) point sets.  Both sets are centered and
    isotropically scaled to mean distance sqrt(2) before solving the usual
    2N x 9 system by SVD; the similarity transforms are folded back into H.

    Raises
    ------
    ValueError
        For degenerate configurations (fewer than 4 points or collinear
        points making the solution ambiguous).
    """
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if src.shape != dst.shape or src.ndim != 2 or src.shape[0] < 4 or src.shape[1] != 2:
        raise ValueError(f"need matching (N>=4, 2) point sets, got {src.shape} vs {dst.shape}")

    def normalizer(pts):
        mean = pts.mean(axis=0)
        d = np.sqrt(((pts - mean) ** 2).sum(axis=1)).mean()
        if d < 1e-12:
            raise ValueError("degenerate (coincident) points")
        s = np.sqrt(2.0) / d
        T = np.array([[s, 0.0, -s * mean[0]], [0.0, s, -s * mean[1]], [0.0, 0.0, 1.0]])
        return T

    Ts, Td = normalizer(src), normalizer(dst)
    sh = np.column_stack([src, np.ones(len(src))]) @ Ts.T
    dh = np.column_stack([dst, np.ones(len(dst))]) @ Td.T
    a = []
    for (xs, ys, _), (xd, yd, _) in zip(sh, dh):
        a.append([-xs, -ys, -1.0, 0.0, 0.0, 0.0, xd * xs, xd * ys, xd])
        a.append([0.0, 0.0, 0.0, -xs, -ys, -1.0, yd * xs, yd * ys, yd])
    a = np.asarray(a)
    _, sv, vt = np.linalg.svd(a)
    if sv[-2] < 1e-9 * sv[0]:
        raise ValueError("degenerate correspondence (collinear points)")
    Hn = vt[-1].reshape(3, 3)
    H = np.linalg.inv(Td) @ Hn @ Ts
    return H / H[2, 2]


def orthoproject(image: np.ndarray, camera: CameraModel, square: GroundSquare, out_res: float):
    """Warp the image pixels covering ``square`` into a top-down patch.

    The patch has ``side / out_res`` pixels per side, column axis along +x
    of L (the heading), row axis along +y (left).  The homography is fitted
    to the four corner correspondences with the normalized DLT and pixels
    are pulled with bilinear interpolation.

    Returns ``(patch, square)`` — the square rides along to hand its
    transform to the caller.
    """
    p = int(round(square.side / out_res))
    if p < 1:
        raise ValueError("output resolution gives an empty patch")
    corners = _square_corners(square.center[0], square.center[1], square.center[2], square.side)
    u, v, z = _project(camera, corners)
    if np.any(z <= 0):
        raise ValueError("square corner behind the camera")
    # Patch-pixel coordinates of the ground corners: offsets -s/2 and +s/2
    # map to pixel-center coordinates -0.5 and P - 0.5.
    src = np.array(
        [
            (-0.5, -0.5),
            (p - 0.5, -0.5),
            (p - 0.5, p - 0.5),
            (-0.5, p - 0.5),
        ]
    )
    dst = np.column_stack([u, v])
    H = homography_dlt(src, dst)
    pc, pr = np.meshgrid(np.arange(p, dtype=np.float64), np.arange(p, dtype=np.float64), indexing="xy")
    ones = np.ones_like(pc)
    q = np.stack([pc, pr, ones], axis=-1) @ H.T
    uu = q[..., 0] / q[..., 2]
    vv = q[..., 1] / q[..., 2]
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        img = img[..., None]
    pix = _sample_bilinear(img, vv, uu)
    return Patch(pixels=pix), square
