"""Odometry-driven prediction over the belief grid.

The motion update is realized as three consecutive 1D convolutions: for every
heading slice ``l`` an x- and then a y-convolution whose kernel mean is the
odometry translation rotated into the map frame by that slice's heading
center, followed by a single circular convolution along the heading axis.
x/y edges are zero-padded (mass pushed off the map is lost); the heading axis
wraps.

Kernels are discretized by normal-CDF area sampling: each tap is the normal
probability mass of one destination cell, with the sub-cell fractional part
of the mean shift absorbed into the normal's mean rather than rounded away.

``predict_dense_oracle`` realizes the same transition by direct per-voxel
enumeration and exists purely as ground truth for tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .grid import BeliefGrid, GridSpec

__all__ = [
    "OdometryMeasurement",
    "OdometryNoiseModel",
    "ShiftKernel",
    "noise_at_distance",
    "global_shift",
    "build_kernel",
    "predict",
    "predict_dense_oracle",
]


@dataclass(frozen=True)
class OdometryMeasurement:
    """Relative motion since the previous update.

    ``u_x``/``u_y`` are the translation in the body frame at the previous
    update (x forward along the then-current heading, y to the left),
    ``u_theta`` the rotation, and ``u_o`` the nonnegative integrated distance
    traveled, which drives the noise growth.
    """

    u_x: float
    u_y: float
    u_theta: float
    u_o: float

    def __post_init__(self):
        if self.u_o < 0.0:
            raise ValueError(f"u_o must be >= 0, got {self.u_o!r}")


@dataclass(frozen=True)
class OdometryNoiseModel:
    """Linear-in-distance odometry noise: sigma = rate * distance.

    ``sigma_xy_rate`` is meters of translation std per meter traveled;
    ``sigma_theta_rate`` is radians of heading std per meter traveled.
    """

    sigma_xy_rate: float
    sigma_theta_rate: float

    def __post_init__(self):
        if not (self.sigma_xy_rate > 0.0 and self.sigma_theta_rate > 0.0):
            raise ValueError("noise rates must be positive")


@dataclass(frozen=True)
class ShiftKernel:
    """A discretized 1D shift-and-diffuse kernel.

    ``offset`` is the destination displacement, in whole cells, of the first
    tap relative to the source cell: tap ``h`` moves mass by ``offset + h``
    cells.  ``taps`` are nonnegative and sum to 1.
    """

    offset: int
    taps: np.ndarray

    @property
    def width(self) -> int:
        return int(self.taps.size)


def noise_at_distance(model: OdometryNoiseModel, distance: float):
    """Noise stds after ``distance`` meters: ``(sigma_xy_m, sigma_theta_rad)``."""
    if distance < 0.0:
        raise ValueError(f"distance must be >= 0, got {distance!r}")
    return model.sigma_xy_rate * distance, model.sigma_theta_rate * distance


def global_shift(u: OdometryMeasurement, alpha: float):
    """Rotate the body-frame translation into the map frame for heading ``alpha``.

    Returns ``(dx, dy)`` in meters: the planar rotation of ``(u_x, u_y)`` by
    ``alpha`` radians.
    """
    ca, sa = np.cos(alpha), np.sin(alpha)
    return u.u_x * ca - u.u_y * sa, u.u_x * sa + u.u_y * ca


def build_kernel(mean_shift: float, sigma: float, resolution: float) -> ShiftKernel:
    """Discretize a normal shift N(mean_shift, sigma^2) onto the cell lattice.

    The integer part of ``mean_shift / resolution`` becomes a pure offset;
    the fractional residual is the mean of a normal whose per-cell CDF
    differences form the taps.  Taps span at least four standard deviations
    on each side of the mean and are renormalized to sum exactly to 1 so
    truncation never bleeds mass.  ``sigma = 0`` degenerates to a single tap
    at the nearest cell.

    Parameters
    ----------
    mean_shift : float
        Expected displacement, in the axis' physical units.
    sigma : float
        Displacement std, same units.
    resolution : float
        Cell size, same units.
    """
    if not resolution > 0.0:
        raise ValueError(f"resolution must be positive, got {resolution!r}")
    if sigma < 0.0:
        raise ValueError(f"sigma must be >= 0, got {sigma!r}")
    cells = mean_shift / resolution
    base = int(np.floor(cells))
    frac = cells - base
    if sigma == 0.0:
        return ShiftKernel(offset=base + int(np.floor(frac + 0.5)), taps=np.ones(1))
    s = sigma / resolution
    half = int(np.ceil(4.0 * s + 1.0))
    edges = (np.arange(-half, half + 2, dtype=np.float64) - 0.5 - frac) / s
    taps = np.diff(ndtr(edges))
    taps /= taps.sum()
    return ShiftKernel(offset=base - half, taps=taps)


def _convolve_zero_padded(src: np.ndarray, kernel: ShiftKernel, axis: int, out: np.ndarray) -> None:
    """Accumulate the shifted/weighted copies of ``src`` into ``out`` (zeroed here).

    Destination semantics: ``out[i] = sum_h taps[h] * src[i - offset - h]``
    with out-of-range sources treated as zero.
    """
    n = src.shape[axis]
    out.fill(0.0)
    for h in range(kernel.width):
        d = kernel.offset + h
        lo, hi = max(0, d), min(n, n + d)
        if lo >= hi:
            continue
        if axis == 0:
            out[lo:hi] += kernel.taps[h] * src[lo - d : hi - d]
        else:
            out[:, lo:hi] += kernel.taps[h] * src[:, lo - d : hi - d]


def _theta_transition_matrix(kernel: ShiftKernel, n_theta: int) -> np.ndarray:
    """Circulant matrix C with C[l, m] = mass moved from theta-bin l to bin m."""
    c = np.zeros((n_theta, n_theta))
    for h in range(kernel.width):
        d = kernel.offset + h
        for l in range(n_theta):
            c[l, (l + d) % n_theta] += kernel.taps[h]
    return c


def _xy_kernels(spec: GridSpec, u: OdometryMeasurement, sigma_xy: float):
    """Per-heading-slice x/y kernels, with width-vs-grid validation."""
    kernels = []
    for alpha in spec.theta_centers():
        dx, dy = global_shift(u, alpha)
        kx = build_kernel(dx, sigma_xy, spec.r_xy)
        ky = build_kernel(dy, sigma_xy, spec.r_xy)
        if kx.width > spec.n_x or ky.width > spec.n_y:
            raise ValueError(
                "translation kernel wider than the grid "
                f"({kx.width}x{ky.width} taps vs {spec.n_x}x{spec.n_y} cells): "
                "odometry noise too large for this map"
            )
        kernels.append((kx, ky))
    return kernels


def predict(belief: BeliefGrid, u: OdometryMeasurement, model: OdometryNoiseModel) -> BeliefGrid:
    """Propagate the belief through one odometry interval.

    Runs the x- then y-convolution per heading slice (kernel means from
    ``global_shift`` at the slice's heading center, stds from
    ``noise_at_distance``), then one wrapped convolution along heading.
    Returns a new grid; input is untouched.  Total mass can only decrease,
    and only through x/y edge leakage.

    Raises
    ------
    ValueError
        If any kernel is wider than its grid axis.
    """
    spec = belief.spec
    sigma_xy, sigma_theta = noise_at_distance(model, u.u_o)
    ktheta = build_kernel(u.u_theta, sigma_theta, spec.r_theta)
    if ktheta.width > spec.n_theta:
        raise ValueError(
            f"heading kernel ({ktheta.width} taps) wider than the heading axis "
            f"({spec.n_theta} bins): odometry noise too large for this map"
        )
    kernels = _xy_kernels(spec, u, sigma_xy)

    # Heading-slice-major copy so the per-slice x/y passes run on contiguous
    # planes; the final matmul writes straight back into [i][j][l] order.
    slices = np.ascontiguousarray(np.moveaxis(belief.mass, 2, 0))
    sx = np.empty((spec.n_x, spec.n_y))
    sy = np.empty((spec.n_x, spec.n_y))
    for l, (kx, ky) in enumerate(kernels):
        _convolve_zero_padded(slices[l], kx, 0, sx)
        _convolve_zero_padded(sx, ky, 1, sy)
        slices[l] = sy

    c = _theta_transition_matrix(ktheta, spec.n_theta)
    flat = slices.reshape(spec.n_theta, spec.n_x * spec.n_y)
    out = flat.T @ c
    return BeliefGrid(spec=spec, mass=out.reshape(spec.shape))


def predict_dense_oracle(
    belief: BeliefGrid,
    u: OdometryMeasurement,
    model: OdometryNoiseModel,
    voxel_limit: int = 200_000,
) -> BeliefGrid:
    """Brute-force transition by explicit per-voxel enumeration.

    For every source voxel, distributes its mass over destinations with the
    same separable CDF-difference kernels as :func:`predict`, summed
    directly.  Quadratic work; refuses grids above ``voxel_limit`` voxels.
    Exists as the test oracle for :func:`predict`.
    """
    spec = belief.spec
    if spec.n_voxels > voxel_limit:
        raise ValueError(
            f"oracle refuses {spec.n_voxels} voxels (limit {voxel_limit})"
        )
    sigma_xy, sigma_theta = noise_at_distance(model, u.u_o)
    ktheta = build_kernel(u.u_theta, sigma_theta, spec.r_theta)
    if ktheta.width > spec.n_theta:
        raise ValueError("heading kernel wider than the heading axis")
    kernels = _xy_kernels(spec, u, sigma_xy)

    out = np.zeros(spec.shape)
    dest_l_all = np.arange(ktheta.width)
    for l, (kx, ky) in enumerate(kernels):
        dest_l = (l + ktheta.offset + dest_l_all) % spec.n_theta
        for i in range(spec.n_x):
            xs = i + kx.offset + np.arange(kx.width)
            okx = (xs >= 0) & (xs < spec.n_x)
            if not okx.any():
                continue
            tx = kx.taps[okx]
            for j in range(spec.n_y):
                m = belief.mass[i, j, l]
                if m == 0.0:
                    continue
                ys = j + ky.offset + np.arange(ky.width)
                oky = (ys >= 0) & (ys < spec.n_y)
                if not oky.any():
                    continue
                ty = ky.taps[oky]
                block = m * tx[:, None, None] * ty[None, :, None] * ktheta.taps[None, None, :]
                out[np.ix_(xs[okx], ys[oky], dest_l)] += block
    return BeliefGrid(spec=spec, mass=out)
