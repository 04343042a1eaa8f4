"""Measurement weighting: heading (von Mises) and map matching (descriptor).

Each update multiplies the predicted belief by two weight fields:

* ``heading_weights`` — the compass likelihood.  The Gaussian heading error
  is approximated by a von Mises distribution with concentration
  ``kappa = 1 / sigma_v**2``; every heading bin receives its exact circular
  probability mass (CDF differences with wraparound), so the weights of the
  bins sum to one.
* ``linear_weights`` / ``bayesian_weights`` — the map-matching likelihood
  from descriptor distances ``c = ||w_k - M(i,j,l)||_2 in [0, 2]``, either as
  the affine map ``(2 - c)/2`` or as the posterior match probability under
  calibrated match/nonmatch distance histograms with equal class priors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import i0e

from ._util import TWO_PI, atomic_write_json
from .grid import GridSpec

__all__ = [
    "HeadingMeasurement",
    "WeightGrid",
    "CalibrationModel",
    "von_mises_cdf",
    "heading_weights",
    "linear_weights",
    "bayesian_weights",
    "calibrate",
    "save_calibration",
    "load_calibration",
]


@dataclass(frozen=True)
class HeadingMeasurement:
    """Compass heading ``v`` (radians, w.r.t. map East) with Gaussian std ``sigma_v``."""

    v: float
    sigma_v: float

    def __post_init__(self):
        if not self.sigma_v > 0.0:
            raise ValueError(f"sigma_v must be positive, got {self.sigma_v!r}")


@dataclass
class WeightGrid:
    """A per-voxel multiplicative weight field in [0, 1].

    ``w`` is broadcastable to ``spec.shape``; heading weights keep a
    broadcast view of a length-``n_theta`` vector since they do not vary
    over x and y.
    """

    spec: GridSpec
    w: np.ndarray


@dataclass
class CalibrationModel:
    """Histograms of descriptor distance for true and false matches.

    Both histograms are probability masses over ``bins`` equal-width bins on
    [0, 2], each bin at least ``floor`` (the smoothing floor that prevents
    zero-weight annihilation where calibration data is sparse).
    """

    bins: int
    floor: float
    match: np.ndarray
    nonmatch: np.ndarray


def _vm_density(kappa: float):
    """Overflow-safe von Mises density on [-pi, pi] centered at 0."""
    norm = TWO_PI * i0e(kappa)

    def f(w):
        return np.exp(kappa * (np.cos(w) - 1.0)) / norm

    return f


def _branch_delta(t, mu):
    """Signed angle from mu to t on the branch [mu - pi, mu + pi].

    Round-half-even ties make ``t = mu + pi`` map to +pi and ``t = mu - pi``
    to -pi, matching the CDF endpoint convention.
    """
    d = np.asarray(t, dtype=np.float64) - mu
    return float(d - TWO_PI * np.round(d / TWO_PI))


def _vm_mass_from_zero(delta: float, kappa: float) -> float:
    """Integral of the centered von Mises density over [0, delta], delta in [-pi, pi]."""
    if delta == 0.0:
        return 0.0
    val, _ = quad(_vm_density(kappa), 0.0, delta, epsabs=1e-12, limit=200)
    return val


def von_mises_cdf(t: float, mu: float, kappa: float) -> float:
    """CDF of the von Mises(mu, kappa) distribution on the branch [mu-pi, mu+pi].

    Computed by adaptive quadrature of the density (absolute error below
    1e-10); there is no closed form.  ``kappa = 0`` gives the circular
    uniform, whose CDF is linear in ``t``.
    """
    if kappa < 0.0:
        raise ValueError(f"kappa must be >= 0, got {kappa!r}")
    delta = _branch_delta(t, mu)
    return float(np.clip(0.5 + _vm_mass_from_zero(delta, kappa), 0.0, 1.0))


def heading_weights(spec: GridSpec, meas: HeadingMeasurement) -> WeightGrid:
    """Per-voxel heading likelihood; constant over x and y.

    Bin ``l`` covers headings ``[l*r_theta, (l+1)*r_theta)`` and receives the
    von Mises(v, 1/sigma_v^2) probability mass of that arc, with wraparound
    handled so every bin gets its full circular mass.  The returned field is
    a broadcast view of the length-``n_theta`` weight vector.
    """
    kappa = 1.0 / (meas.sigma_v * meas.sigma_v)
    r = spec.r_theta
    w = np.empty(spec.n_theta)
    for l in range(spec.n_theta):
        lo = _branch_delta(l * r, meas.v)
        hi = lo + r
        if hi <= np.pi:
            w[l] = _vm_mass_from_zero(hi, kappa) - _vm_mass_from_zero(lo, kappa)
        else:
            # The arc crosses the antipode of v; take both branch pieces.
            w[l] = (0.5 - _vm_mass_from_zero(lo, kappa)) + (
                0.5 + _vm_mass_from_zero(hi - TWO_PI, kappa)
            )
    np.clip(w, 0.0, 1.0, out=w)
    return WeightGrid(spec=spec, w=np.broadcast_to(w[None, None, :], spec.shape))


def _distances(w_vals: np.ndarray, data: np.ndarray) -> np.ndarray:
    """Descriptor distances c over all voxels via the unit-vector identity.

    For unit vectors ``||w - m||^2 = 2 - 2 w.m``; computing through the dot
    product streams the map once without materializing per-voxel difference
    vectors.  Output dtype follows the map dtype.
    """
    d = data.shape[-1]
    dots = data.reshape(-1, d) @ w_vals.astype(data.dtype)
    sq = 2.0 - 2.0 * dots
    np.clip(sq, 0.0, 4.0, out=sq)
    return np.sqrt(sq, out=sq).reshape(data.shape[:-1])


def _check_dims(w_k, dmap) -> np.ndarray:
    w_vals = np.asarray(w_k.values if hasattr(w_k, "values") else w_k, dtype=np.float64)
    if w_vals.shape != (dmap.data.shape[-1],):
        raise ValueError(
            f"descriptor dimension {w_vals.shape} does not match map D={dmap.data.shape[-1]}"
        )
    return w_vals


def linear_weights(w_k, dmap) -> WeightGrid:
    """Map-matching weights ``(2 - c)/2``: 1 at distance 0, 0 at distance 2."""
    w_vals = _check_dims(w_k, dmap)
    c = _distances(w_vals, dmap.data)
    c *= -0.5
    c += 1.0
    return WeightGrid(spec=dmap.spec, w=c)


def bayesian_weights(w_k, dmap, calib: CalibrationModel, prior_match: float = 0.5) -> WeightGrid:
    """Posterior probability that each voxel's map vector matches the observation.

    Reads ``p(c | match)`` and ``p(c | nonmatch)`` from the calibration
    histograms and combines them with the class priors (equal by default):
    ``w = P(match | c)``.  The smoothing floor keeps every weight strictly
    inside (0, 1).
    """
    if calib is None:
        raise ValueError("bayesian weighting requires a calibration model")
    w_vals = _check_dims(w_k, dmap)
    bins = int(calib.bins)
    if len(calib.match) != bins or len(calib.nonmatch) != bins:
        raise ValueError("calibration model histograms do not match its bin count")
    c = _distances(w_vals, dmap.data)
    idx = np.minimum((c * (bins / 2.0)).astype(np.intp), bins - 1)
    pm = prior_match * np.asarray(calib.match, dtype=np.float64)
    pn = (1.0 - prior_match) * np.asarray(calib.nonmatch, dtype=np.float64)
    w = (pm / (pm + pn)).astype(c.dtype)[idx]
    return WeightGrid(spec=dmap.spec, w=w)


def calibrate(match_distances, nonmatch_distances, bins: int = 64, floor: float = 1e-6) -> CalibrationModel:
    """Estimate the match/nonmatch distance histograms.

    Each histogram is the empirical bin frequency blended with the smoothing
    floor: ``mass = floor + (1 - bins*floor) * count/total``, which keeps
    every bin at least ``floor`` while summing exactly to one.

    Raises
    ------
    ValueError
        On empty inputs, distances outside [0, 2], or ``bins*floor >= 1``.
    """
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins!r}")
    if not 0.0 < floor:
        raise ValueError(f"floor must be positive, got {floor!r}")
    if bins * floor >= 1.0:
        raise ValueError(f"bins*floor must stay below 1, got {bins * floor!r}")

    def hist(values, label):
        values = np.asarray(values, dtype=np.float64)
        if values.size == 0:
            raise ValueError(f"{label} distance list is empty")
        if values.min() < 0.0 or values.max() > 2.0:
            raise ValueError(f"{label} distances must lie in [0, 2]")
        counts, _ = np.histogram(values, bins=bins, range=(0.0, 2.0))
        return floor + (1.0 - bins * floor) * counts / values.size

    return CalibrationModel(
        bins=bins,
        floor=floor,
        match=hist(match_distances, "match"),
        nonmatch=hist(nonmatch_distances, "nonmatch"),
    )


def save_calibration(calib: CalibrationModel, path) -> None:
    """Serialize a calibration model as JSON {bins, floor, match, nonmatch}."""
    atomic_write_json(
        path,
        {
            "bins": calib.bins,
            "floor": calib.floor,
            "match": [float(v) for v in calib.match],
            "nonmatch": [float(v) for v in calib.nonmatch],
        },
    )


def load_calibration(path) -> CalibrationModel:
    import json

    with open(path) as f:
        obj = json.load(f)
    model = CalibrationModel(
        bins=int(obj["bins"]),
        floor=float(obj["floor"]),
        match=np.asarray(obj["match"], dtype=np.float64),
        nonmatch=np.asarray(obj["nonmatch"], dtype=np.float64),
    )
    if len(model.match) != model.bins or len(model.nonmatch) != model.bins:
        raise ValueError(f"{path}: histogram lengths do not match bin count")
    return model
