"""Discretized (x, y, theta) state space and the belief held over it.

The state space is a box ``[x_min, x_max) x [y_min, y_max) x [0, 2*pi)``
partitioned into voxels of size ``r_xy x r_xy x r_theta``.  Belief is a dense
nonnegative array over the voxels, normalized to unit total mass after every
public update.  Layout is ``mass[i, j, l]`` with ``i`` indexing x, ``j``
indexing y and ``l`` indexing heading, so heading slices are contiguous in
memory for the per-voxel vector operations downstream.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from ._util import TWO_PI, atomic_write_bytes, fnv1a_64

__all__ = [
    "GridSpec",
    "BeliefGrid",
    "PoseEstimate",
    "ZeroMassError",
    "make_grid_spec",
    "init_uniform",
    "apply_weights",
    "estimate_pose",
    "converged",
    "grid_spec_hash",
    "save_belief",
    "load_belief",
]

BELIEF_MAGIC = b"LSVLBEL1"

# Mass totals after any public update must hit 1 within this bound.
NORMALIZATION_TOL = 1e-9


class ZeroMassError(ValueError):
    """All belief mass was annihilated (or was never there).

    Raised when a weighting step leaves no probability mass anywhere in the
    grid.  This signals an irrecoverable contradiction between prior and
    measurements; the caller decides the recovery policy (typically
    re-initializing to the uniform prior).
    """


@dataclass(frozen=True)
class GridSpec:
    """Geometry of the voxel grid.

    Parameters
    ----------
    x_min, x_max, y_min, y_max : float
        Map extent in meters.  The grid covers the extent with whole voxels,
        so ``x_min + n_x * r_xy >= x_max`` (ceiling division).
    r_xy : float
        Voxel side in translation, meters.
    r_theta : float
        Voxel extent in heading, radians; always ``2*pi / n_theta``.
    n_x, n_y, n_theta : int
        Voxel counts per axis.
    """

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    r_xy: float
    r_theta: float
    n_x: int
    n_y: int
    n_theta: int

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n_x, self.n_y, self.n_theta)

    @property
    def n_voxels(self) -> int:
        return self.n_x * self.n_y * self.n_theta

    def x_centers(self) -> np.ndarray:
        """Center x coordinate of every column of voxels, meters."""
        return self.x_min + (np.arange(self.n_x) + 0.5) * self.r_xy

    def y_centers(self) -> np.ndarray:
        return self.y_min + (np.arange(self.n_y) + 0.5) * self.r_xy

    def theta_centers(self) -> np.ndarray:
        """Center heading of every theta bin, radians in [0, 2*pi)."""
        return (np.arange(self.n_theta) + 0.5) * self.r_theta

    def theta_lower(self, l: int) -> float:
        """Lower bound of heading bin ``l``, radians."""
        return l * self.r_theta

    def theta_upper(self, l: int) -> float:
        return (l + 1) * self.r_theta


@dataclass
class BeliefGrid:
    """A probability mass function over the voxel grid.

    ``mass`` is float64 regardless of the descriptor-map precision so the
    unit-total invariant stays stable on grids with tens of millions of
    voxels.
    """

    spec: GridSpec
    mass: np.ndarray

    def total(self) -> float:
        return float(self.mass.sum())


@dataclass(frozen=True)
class PoseEstimate:
    """Point estimate extracted from a belief.

    ``theta`` is wrapped into [0, 2*pi).  ``sigma_xy`` is the
    probability-weighted standard deviation of the Euclidean distance of the
    voxel centers from the (x, y) estimate, in meters; it is the scalar
    self-diagnostic used for convergence detection.
    """

    x: float
    y: float
    theta: float
    sigma_xy: float


def make_grid_spec(extent, r_xy: float, n_theta: int) -> GridSpec:
    """Build a grid spec covering ``extent`` at the requested resolutions.

    Parameters
    ----------
    extent : tuple of float
        ``(x_min, x_max, y_min, y_max)`` in meters.
    r_xy : float
        Translation resolution, meters.
    n_theta : int
        Number of heading bins; the heading resolution is ``2*pi / n_theta``.

    Returns
    -------
    GridSpec
        ``n_x = ceil((x_max - x_min) / r_xy)``, analogously for y.

    Raises
    ------
    ValueError
        On an empty/inverted extent, nonpositive resolution, or
        ``n_theta < 1``.
    """
    x_min, x_max, y_min, y_max = (float(v) for v in extent)
    if not (x_max > x_min and y_max > y_min):
        raise ValueError(f"degenerate extent {extent!r}")
    if not r_xy > 0.0:
        raise ValueError(f"r_xy must be positive, got {r_xy!r}")
    if int(n_theta) < 1:
        raise ValueError(f"n_theta must be >= 1, got {n_theta!r}")
    n_theta = int(n_theta)
    n_x = int(np.ceil((x_max - x_min) / r_xy - 1e-12))
    n_y = int(np.ceil((y_max - y_min) / r_xy - 1e-12))
    n_x = max(n_x, 1)
    n_y = max(n_y, 1)
    return GridSpec(
        x_min=x_min,
        x_max=x_max,
        y_min=y_min,
        y_max=y_max,
        r_xy=float(r_xy),
        r_theta=TWO_PI / n_theta,
        n_x=n_x,
        n_y=n_y,
        n_theta=n_theta,
    )


def init_uniform(spec: GridSpec) -> BeliefGrid:
    """Uniform belief over the whole grid (the wake-up prior)."""
    mass = np.full(spec.shape, 1.0 / spec.n_voxels, dtype=np.float64)
    return BeliefGrid(spec=spec, mass=mass)


def _weight_array(weight) -> np.ndarray:
    """Accept either a bare ndarray or any object with a ``.w`` array."""
    return weight.w if hasattr(weight, "w") else np.asarray(weight)


def apply_weights(belief: BeliefGrid, *weights, out: np.ndarray | None = None) -> BeliefGrid:
    """Elementwise-weight the belief and renormalize once.

    Computes ``belief.mass * w_1 * w_2 * ...`` followed by a single division
    by the total, which realizes the measurement update with its single
    normalization constant.

    Parameters
    ----------
    belief : BeliefGrid
    *weights : WeightGrid or ndarray
        One or more weight fields, each broadcastable to the belief shape
        with entries in [0, 1].
    out : ndarray, optional
        Scratch float64 array of the belief shape; the product is formed
        there (it may alias ``belief.mass``, in which case the input is
        consumed).  Used to avoid transient copies on very large grids.

    Returns
    -------
    BeliefGrid
        New normalized belief (backed by ``out`` when given).

    Raises
    ------
    ZeroMassError
        If the product annihilates all mass or produces a nonfinite total.
    """
    if not weights:
        raise ValueError("at least one weight grid is required")
    arrays = [_weight_array(w) for w in weights]
    if out is None:
        prod = belief.mass * arrays[0]
        for arr in arrays[1:]:
            prod *= arr
    else:
        prod = out
        np.multiply(belief.mass, arrays[0], out=prod)
        for arr in arrays[1:]:
            prod *= arr
    total = float(prod.sum())
    if not np.isfinite(total) or total <= 0.0:
        raise ZeroMassError(f"weighting left total mass {total!r}")
    prod /= total
    return BeliefGrid(spec=belief.spec, mass=prod)


def estimate_pose(belief: BeliefGrid) -> PoseEstimate:
    """Probability-weighted mean pose and translation spread.

    x and y are the weighted means of the voxel center coordinates.  The
    heading is the circular mean of the bin centers,
    ``atan2(sum m sin, sum m cos)``, never a linear average.  ``sigma_xy`` is
    ``sqrt(sum m * ||center - (x, y)||^2)``, evaluated through the x/y
    marginals.
    """
    spec = belief.spec
    total = belief.total()
    if not np.isfinite(total) or total <= 0.0:
        raise ZeroMassError("cannot estimate pose from a zero-mass belief")
    px = belief.mass.sum(axis=(1, 2))
    py = belief.mass.sum(axis=(0, 2))
    pt = belief.mass.sum(axis=(0, 1))
    xc = spec.x_centers()
    yc = spec.y_centers()
    tc = spec.theta_centers()
    x = float(px @ xc) / total
    y = float(py @ yc) / total
    s = float(pt @ np.sin(tc))
    c = float(pt @ np.cos(tc))
    theta = float(np.mod(np.arctan2(s, c), TWO_PI))
    var = float(px @ (xc - x) ** 2 + py @ (yc - y) ** 2) / total
    return PoseEstimate(x=x, y=y, theta=theta, sigma_xy=float(np.sqrt(max(var, 0.0))))


def converged(estimate: PoseEstimate, threshold: float) -> bool:
    """True iff the translation spread is strictly below ``threshold`` meters."""
    return estimate.sigma_xy < threshold


def grid_spec_hash(spec: GridSpec) -> int:
    """64-bit FNV-1a hash of the canonical grid-spec string.

    The canonical form contains exactly the fields that survive a file round
    trip (counts, lower corner, translation resolution); the nominal
    ``x_max``/``y_max`` are excluded because the covered extent
    ``x_min + n_x * r_xy`` is what defines the voxels.
    """
    canon = "gridspec:%d:%d:%d:%r:%r:%r" % (
        spec.n_x,
        spec.n_y,
        spec.n_theta,
        spec.x_min,
        spec.y_min,
        spec.r_xy,
    )
    return fnv1a_64(canon.encode("ascii"))


def _spec_from_header(n_x: int, n_y: int, n_theta: int, x_min: float, y_min: float, r_xy: float) -> GridSpec:
    """Rebuild a spec from serialized fields; the extent is the covered one."""
    return GridSpec(
        x_min=x_min,
        x_max=x_min + n_x * r_xy,
        y_min=y_min,
        y_max=y_min + n_y * r_xy,
        r_xy=r_xy,
        r_theta=TWO_PI / n_theta,
        n_x=n_x,
        n_y=n_y,
        n_theta=n_theta,
    )


def save_belief(belief: BeliefGrid, path) -> None:
    """Write a belief checkpoint.

    Format: magic ``LSVLBEL1``, little-endian u32 ``n_x, n_y, n_theta``,
    f64 ``x_min, y_min, r_xy``, then ``n_x * n_y * n_theta`` f64 mass values
    in ``[i][j][l]`` order.
    """
    spec = belief.spec
    header = BELIEF_MAGIC + struct.pack(
        "<3I3d", spec.n_x, spec.n_y, spec.n_theta, spec.x_min, spec.y_min, spec.r_xy
    )
    payload = np.ascontiguousarray(belief.mass, dtype="<f8").tobytes()
    atomic_write_bytes(path, header + payload)


def load_belief(path) -> BeliefGrid:
    """Read a belief checkpoint written by :func:`save_belief`."""
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 8 + struct.calcsize("<3I3d"):
        raise ValueError(f"{path}: truncated belief header")
    if blob[:8] != BELIEF_MAGIC:
        raise ValueError(f"{path}: bad magic {blob[:8]!r}")
    n_x, n_y, n_theta, x_min, y_min, r_xy = struct.unpack_from("<3I3d", blob, 8)
    spec = _spec_from_header(n_x, n_y, n_theta, x_min, y_min, r_xy)
    start = 8 + struct.calcsize("<3I3d")
    expected = spec.n_voxels * 8
    if len(blob) - start != expected:
        raise ValueError(
            f"{path}: payload is {len(blob) - start} bytes, expected {expected}"
        )
    mass = np.frombuffer(blob[start:], dtype="<f8").reshape(spec.shape).copy()
    return BeliefGrid(spec=spec, mass=mass)
