"""Heading likelihood (circular CDF masses) and map-matching likelihoods."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import i0

from gridloc.grid import make_grid_spec
from gridloc.map_store import DescriptorMap
from gridloc.measurement import (
    CalibrationModel,
    HeadingMeasurement,
    bayesian_weights,
    calibrate,
    heading_weights,
    linear_weights,
    load_calibration,
    save_calibration,
    von_mises_cdf,
)

TWO_PI = 2.0 * np.pi


def _trapezoid_cdf(t, mu, kappa, n=400_001):
    """Independent fine-grained integration of the circular density."""
    lo = mu - np.pi
    xs = np.linspace(lo, t, n)
    dens = np.exp(kappa * np.cos(xs - mu)) / (TWO_PI * i0(kappa))
    return np.trapezoid(dens, xs)


# ---------------------------------------------------------------------------
# von_mises_cdf


def test_cdf_is_linear_for_zero_concentration():
    mu = 1.1
    assert von_mises_cdf(mu, mu, 0.0) == pytest.approx(0.5, abs=1e-10)
    assert von_mises_cdf(mu + np.pi / 2.0, mu, 0.0) == pytest.approx(0.75, abs=1e-10)
    assert von_mises_cdf(mu - np.pi / 4.0, mu, 0.0) == pytest.approx(0.375, abs=1e-10)


def test_cdf_branch_endpoints():
    for mu in (0.0, 1.3, -2.0, 5.9):
        for kappa in (0.0, 0.5, 4.0, 100.0):
            assert von_mises_cdf(mu + np.pi, mu, kappa) == pytest.approx(1.0, abs=1e-9)
            assert von_mises_cdf(mu - np.pi, mu, kappa) == pytest.approx(0.0, abs=1e-9)
            assert von_mises_cdf(mu, mu, kappa) == pytest.approx(0.5, abs=1e-10)


def test_cdf_matches_trapezoid_integration():
    mu = 0.9
    for t in (mu + 0.5, mu - 0.5, mu + 2.0, mu - 3.0):
        assert von_mises_cdf(t, mu, 4.0) == pytest.approx(_trapezoid_cdf(t, mu, 4.0), abs=1e-8)


def test_cdf_wraps_the_argument_onto_the_branch():
    mu = 0.4
    a = von_mises_cdf(mu + 1.0, mu, 2.0)
    b = von_mises_cdf(mu + 1.0 + TWO_PI, mu, 2.0)
    c = von_mises_cdf(mu + 1.0 - 3 * TWO_PI, mu, 2.0)
    assert a == pytest.approx(b, abs=1e-12)
    assert a == pytest.approx(c, abs=1e-12)


def test_cdf_rejects_negative_concentration():
    with pytest.raises(ValueError):
        von_mises_cdf(0.0, 0.0, -1.0)


@settings(max_examples=50, deadline=None)
@given(
    t=st.floats(-10.0, 10.0),
    mu=st.floats(-10.0, 10.0),
    kappa=st.floats(0.0, 500.0),
)
def test_cdf_stays_in_unit_interval(t, mu, kappa):
    assert 0.0 <= von_mises_cdf(t, mu, kappa) <= 1.0


# ---------------------------------------------------------------------------
# heading_weights

# Bin [0, 6) degrees mass for a 3-degree measurement with 3-degree sigma:
# the one-sigma-each-side interval around the mean.  Frozen from adaptive
# quadrature of the circular density; the trapezoid oracle reproduces it.
ONE_SIGMA_BIN_MASS = 0.6824680803921379


def _spec(n_theta=60):
    return make_grid_spec((0.0, 100.0, 0.0, 100.0), 10.0, n_theta)


def test_heading_weights_one_sigma_interval():
    spec = _spec(60)
    w = heading_weights(spec, HeadingMeasurement(v=np.deg2rad(3.0), sigma_v=np.deg2rad(3.0)))
    w0 = float(w.w[0, 0, 0])
    assert w0 == pytest.approx(ONE_SIGMA_BIN_MASS, abs=1e-9)
    assert w0 == pytest.approx(0.683, abs=1e-3)
    mu = np.deg2rad(3.0)
    kappa = 1.0 / np.deg2rad(3.0) ** 2
    oracle = _trapezoid_cdf(np.deg2rad(6.0), mu, kappa) - _trapezoid_cdf(0.0, mu, kappa)
    assert w0 == pytest.approx(oracle, abs=1e-8)


def test_heading_weights_uniform_limit():
    spec = _spec(60)
    w = heading_weights(spec, HeadingMeasurement(v=2.0, sigma_v=1e6))
    np.testing.assert_allclose(w.w[0, 0], 1.0 / 60.0, atol=1e-9)


def test_heading_weights_concentrate_on_the_measured_bin():
    spec = _spec(24)
    center = float(spec.theta_centers()[7])
    w = heading_weights(spec, HeadingMeasurement(v=center, sigma_v=spec.r_theta / 50.0))
    assert w.w[0, 0, 7] > 0.999


def test_heading_weights_constant_over_position():
    spec = _spec(12)
    w = heading_weights(spec, HeadingMeasurement(v=1.0, sigma_v=0.2))
    assert w.w.shape == spec.shape
    assert np.all(w.w == w.w[0:1, 0:1, :])


def test_heading_weights_shift_with_whole_bin_rotations():
    spec = _spec(24)
    base = heading_weights(spec, HeadingMeasurement(v=0.7, sigma_v=0.3)).w[0, 0]
    for bins in (1, 5, 11):
        rotated = heading_weights(
            spec, HeadingMeasurement(v=0.7 + bins * spec.r_theta, sigma_v=0.3)
        ).w[0, 0]
        np.testing.assert_allclose(rotated, np.roll(base, bins), atol=1e-12)


@pytest.mark.parametrize("sigma_deg", [3.0, 60.0])
def test_heading_weights_sum_to_one(sigma_deg):
    spec = _spec(60)
    for v in (0.0, 0.05, 1.0, 3.14, 6.0):
        w = heading_weights(spec, HeadingMeasurement(v=v, sigma_v=np.deg2rad(sigma_deg)))
        assert abs(w.w[0, 0].sum() - 1.0) <= 1e-9


@settings(max_examples=30, deadline=None)
@given(
    v=st.floats(0.0, TWO_PI),
    sigma=st.floats(0.01, 3.0),
    n_theta=st.integers(2, 40),
)
def test_heading_weights_properties(v, sigma, n_theta):
    spec = _spec(n_theta)
    w = heading_weights(spec, HeadingMeasurement(v=v, sigma_v=sigma))
    vec = w.w[0, 0]
    assert abs(vec.sum() - 1.0) <= 1e-9
    assert np.all(vec >= 0.0)
    assert np.all(vec <= 1.0)
    assert np.all(np.isfinite(vec))


def test_heading_measurement_rejects_nonpositive_sigma():
    with pytest.raises(ValueError):
        HeadingMeasurement(v=0.0, sigma_v=0.0)


# ---------------------------------------------------------------------------
# map-matching weights


def _tiny_map(vectors):
    """A map with one x-cell per provided descriptor vector."""
    vectors = np.asarray(vectors, dtype=np.float64)
    n, d = vectors.shape
    spec = make_grid_spec((0.0, n * 10.0, 0.0, 10.0), 10.0, 1)
    return DescriptorMap(spec=spec, D=d, data=vectors.reshape(n, 1, 1, d))


def _unit(v):
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v)


def test_linear_weights_distance_endpoints():
    e1 = np.r_[1.0, np.zeros(7)]
    e2 = np.r_[0.0, 1.0, np.zeros(6)]
    dmap = _tiny_map([e1, -e1, e2])
    w = linear_weights(e1, dmap).w[:, 0, 0]
    assert w[0] == pytest.approx(1.0, abs=1e-12)
    assert w[1] == pytest.approx(0.0, abs=1e-7)
    assert w[2] == pytest.approx((2.0 - np.sqrt(2.0)) / 2.0, abs=1e-12)


def test_linear_weights_decrease_with_distance():
    angles = np.linspace(0.0, np.pi, 12)
    vecs = [np.r_[np.cos(a), np.sin(a), np.zeros(6)] for a in angles]
    dmap = _tiny_map(vecs)
    w = linear_weights(np.r_[1.0, np.zeros(7)], dmap).w[:, 0, 0]
    assert np.all(np.diff(w) < 0.0)


def test_weights_reject_dimension_mismatch():
    dmap = _tiny_map([np.r_[1.0, np.zeros(7)]])
    with pytest.raises(ValueError, match="dimension"):
        linear_weights(np.r_[1.0, np.zeros(15)], dmap)
    calib = calibrate([0.1], [1.5])
    with pytest.raises(ValueError, match="dimension"):
        bayesian_weights(np.r_[1.0, np.zeros(15)], dmap, calib)


def test_bayesian_weights_half_when_classes_coincide():
    samples = [0.05, 0.3, 0.7, 1.1, 1.8]
    calib = calibrate(samples, samples)
    angles = np.linspace(0.0, np.pi, 7)
    dmap = _tiny_map([np.r_[np.cos(a), np.sin(a), np.zeros(6)] for a in angles])
    w = bayesian_weights(np.r_[1.0, np.zeros(7)], dmap, calib).w
    np.testing.assert_allclose(w, 0.5, atol=1e-12)


def test_bayesian_weights_match_the_counting_oracle():
    rng = np.random.default_rng(11)
    match = rng.uniform(0.0, 0.8, size=500)
    nonmatch = rng.uniform(0.9, 2.0, size=700)
    calib = calibrate(match, nonmatch, bins=64, floor=1e-6)
    c = 0.3
    # map vector at exactly distance c from the observation
    cos_a = 1.0 - c * c / 2.0
    m = np.r_[cos_a, np.sqrt(1.0 - cos_a**2), np.zeros(6)]
    dmap = _tiny_map([m])
    w = float(bayesian_weights(np.r_[1.0, np.zeros(7)], dmap, calib).w[0, 0, 0])
    # independent reconstruction straight from the sample counts
    k = int(c / 2.0 * 64)
    pm = 1e-6 + (1.0 - 64 * 1e-6) * np.sum((match >= k * 2 / 64) & (match < (k + 1) * 2 / 64)) / match.size
    pn = 1e-6 + (1.0 - 64 * 1e-6) * np.sum((nonmatch >= k * 2 / 64) & (nonmatch < (k + 1) * 2 / 64)) / nonmatch.size
    assert w == pytest.approx(pm / (pm + pn), abs=1e-9)


def test_bayesian_weights_floor_keeps_the_open_interval():
    calib = calibrate(np.full(50, 0.01), np.full(50, 1.99))
    dmap = _tiny_map([np.r_[1.0, np.zeros(7)], -np.r_[1.0, np.zeros(7)]])
    w = bayesian_weights(np.r_[1.0, np.zeros(7)], dmap, calib).w[:, 0, 0]
    assert 0.0 < w[1] < w[0] < 1.0
    assert w[0] > 0.99
    assert w[1] < 0.01


def test_bayesian_weights_invariant_to_joint_histogram_scaling():
    rng = np.random.default_rng(4)
    match = np.maximum(1e-9, rng.dirichlet(np.ones(64)))
    nonmatch = np.maximum(1e-9, rng.dirichlet(np.ones(64)))
    a = CalibrationModel(bins=64, floor=1e-9, match=match, nonmatch=nonmatch)
    b = CalibrationModel(bins=64, floor=1e-9, match=3.7 * match, nonmatch=3.7 * nonmatch)
    vecs = [_unit(rng.normal(size=8)) for _ in range(9)]
    dmap = _tiny_map(vecs)
    wk = _unit(rng.normal(size=8))
    np.testing.assert_allclose(
        bayesian_weights(wk, dmap, a).w, bayesian_weights(wk, dmap, b).w, atol=1e-12
    )


def test_bayesian_weights_require_a_model():
    dmap = _tiny_map([np.r_[1.0, np.zeros(7)]])
    with pytest.raises(ValueError, match="calibration"):
        bayesian_weights(np.r_[1.0, np.zeros(7)], dmap, None)
    broken = CalibrationModel(bins=64, floor=1e-6, match=np.ones(3), nonmatch=np.ones(3))
    with pytest.raises(ValueError, match="bin count"):
        bayesian_weights(np.r_[1.0, np.zeros(7)], dmap, broken)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_weight_grids_are_finite_and_bounded(seed):
    rng = np.random.default_rng(seed)
    vecs = [_unit(rng.normal(size=8)) for _ in range(6)]
    dmap = _tiny_map(vecs)
    wk = _unit(rng.normal(size=8))
    lin = linear_weights(wk, dmap).w
    assert np.all(np.isfinite(lin)) and np.all((lin >= 0.0) & (lin <= 1.0))
    calib = calibrate(rng.uniform(0, 2, 50), rng.uniform(0, 2, 50))
    bay = bayesian_weights(wk, dmap, calib).w
    assert np.all(np.isfinite(bay)) and np.all((bay > 0.0) & (bay < 1.0))


# ---------------------------------------------------------------------------
# calibrate


def test_calibrate_concentrates_all_mass_minus_the_floor():
    calib = calibrate(np.full(30, 0.5), np.full(30, 1.5), bins=64, floor=1e-6)
    k = int(0.5 / 2.0 * 64)
    assert calib.match[k] == pytest.approx(1.0 - 63 * 1e-6, abs=1e-15)
    assert np.all(np.delete(calib.match, k) == pytest.approx(1e-6, abs=1e-18))


def test_calibrate_histograms_match_independent_counting():
    rng = np.random.default_rng(8)
    match = rng.uniform(0.0, 2.0, size=10_000)
    nonmatch = rng.uniform(0.0, 2.0, size=10_000)
    calib = calibrate(match, nonmatch, bins=64, floor=1e-6)
    for samples, hist in ((match, calib.match), (nonmatch, calib.nonmatch)):
        counts = np.bincount(
            np.minimum((samples / 2.0 * 64).astype(int), 63), minlength=64
        )
        expected = 1e-6 + (1.0 - 64 * 1e-6) * counts / samples.size
        np.testing.assert_allclose(hist, expected, atol=1e-12)
    assert calib.match.sum() == pytest.approx(1.0, abs=1e-12)
    assert calib.nonmatch.sum() == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize(
    "match, nonmatch, kwargs",
    [
        ([], [0.5], {}),
        ([0.5], [], {}),
        ([-0.1], [0.5], {}),
        ([0.5], [2.1], {}),
        ([0.5], [0.5], {"bins": 0}),
        ([0.5], [0.5], {"floor": 0.0}),
        ([0.5], [0.5], {"bins": 64, "floor": 0.02}),  # bins*floor >= 1
    ],
)
def test_calibrate_rejects_bad_input(match, nonmatch, kwargs):
    with pytest.raises(ValueError):
        calibrate(match, nonmatch, **kwargs)


def test_calibration_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    calib = calibrate(rng.uniform(0, 1, 200), rng.uniform(1, 2, 200))
    path = tmp_path / "calib.json"
    save_calibration(calib, path)
    back = load_calibration(path)
    assert back.bins == calib.bins
    assert back.floor == calib.floor
    np.testing.assert_array_equal(back.match, calib.match)
    np.testing.assert_array_equal(back.nonmatch, calib.nonmatch)


def test_load_calibration_validates_lengths(tmp_path):
    path = tmp_path / "calib.json"
    path.write_text('{"bins": 8, "floor": 1e-6, "match": [1.0], "nonmatch": [1.0]}')
    with pytest.raises(ValueError, match="length"):
        load_calibration(path)
