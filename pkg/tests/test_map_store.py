"""Raster crops, descriptor-map precompute, and the on-disk map format."""

import os

import numpy as np
import pytest

from gridloc.descriptor import Patch, block_mean_descriptor
from gridloc.grid import grid_spec_hash, make_grid_spec
from gridloc.map_store import (
    DescriptorMap,
    RasterMap,
    crop_rotated_patch,
    load_map,
    load_map_manifest,
    load_raster,
    map_file_size,
    precompute,
    save_map,
    save_raster,
)

HEADER_BYTES = 64


def _random_raster(seed, h, w, origin=(0.0, 0.0), gsd=1.0):
    rng = np.random.default_rng(seed)
    return RasterMap(
        pixels=rng.uniform(0.0, 255.0, size=(h, w, 3)),
        origin_x=origin[0],
        origin_y=origin[1],
        gsd=gsd,
    )


# ---------------------------------------------------------------------------
# crop_rotated_patch


def test_axis_aligned_crop_reads_pixels_verbatim():
    # With gsd 1 and an integer center, every sample of a 10 m patch lands
    # exactly on a pixel center, so bilinear interpolation is a passthrough.
    raster = _random_raster(0, 40, 40)
    patch = crop_rotated_patch(raster, x=20.0, y=15.0, theta=0.0, w=10.0, out_res=1.0)
    np.testing.assert_array_equal(patch.pixels, raster.pixels[10:20, 15:25])


def test_quarter_turn_crop_is_an_image_rotation():
    raster = _random_raster(1, 50, 50)
    p0 = crop_rotated_patch(raster, 25.0, 25.0, 0.0, 16.0, 1.0)
    p90 = crop_rotated_patch(raster, 25.0, 25.0, np.pi / 2.0, 16.0, 1.0)
    np.testing.assert_allclose(p90.pixels, np.rot90(p0.pixels, 1), atol=1e-9)


def test_rotated_crop_of_a_linear_field_is_analytic():
    # Bilinear sampling reproduces an affine intensity field exactly, for
    # any rotation, which pins down the sample-point geometry.
    h, w = 80, 80
    rr, cc = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    a, b, d = 1.25, -0.75, 40.0
    pixels = np.stack([a * cc + b * rr + d] * 3, axis=-1).astype(np.float64)
    raster = RasterMap(pixels=pixels, origin_x=-3.0, origin_y=5.0, gsd=2.0)
    x0, y0, theta = 72.0, 88.0, np.deg2rad(30.0)
    patch = crop_rotated_patch(raster, x0, y0, theta, w=24.0, out_res=3.0)
    p = patch.pixels.shape[0]
    u = (np.arange(p) + 0.5) * 3.0 - 12.0
    ct, st = np.cos(theta), np.sin(theta)
    xs = x0 + u[None, :] * ct - u[:, None] * st
    ys = y0 + u[None, :] * st + u[:, None] * ct
    want = a * ((xs - raster.origin_x) / raster.gsd - 0.5) + b * (
        (ys - raster.origin_y) / raster.gsd - 0.5
    ) + d
    np.testing.assert_allclose(patch.pixels, np.stack([want] * 3, axis=-1), atol=1e-6)


def test_crop_out_of_bounds_raises():
    raster = _random_raster(2, 30, 30)
    with pytest.raises(ValueError, match="outside"):
        crop_rotated_patch(raster, 3.0, 15.0, 0.0, 10.0, 1.0)
    with pytest.raises(ValueError, match="outside"):
        crop_rotated_patch(raster, 15.0, 29.0, np.deg2rad(45.0), 10.0, 1.0)


def test_crop_rejects_subpixel_patches():
    raster = _random_raster(3, 30, 30)
    with pytest.raises(ValueError, match="below one pixel"):
        crop_rotated_patch(raster, 15.0, 15.0, 0.0, 1.0, 3.0)


# ---------------------------------------------------------------------------
# precompute


def test_precompute_single_voxel_equals_composition():
    raster = _random_raster(4, 90, 90, origin=(-40.0, -40.0))
    spec = make_grid_spec((0.0, 10.0, 0.0, 10.0), 10.0, 1)
    dmap = precompute(raster, spec, w=40.0, D=8, out_res=4.0)
    assert dmap.data.shape == (1, 1, 1, 8)
    patch = crop_rotated_patch(
        raster, spec.x_centers()[0], spec.y_centers()[0], spec.theta_centers()[0], 40.0, 4.0
    )
    want = block_mean_descriptor(patch, 8).values
    np.testing.assert_array_equal(dmap.data[0, 0, 0], want)


def test_precompute_spot_checks_match_the_composition_bitwise():
    raster = _random_raster(5, 112, 112, origin=(-25.0, -25.0))
    spec = make_grid_spec((0.0, 60.0, 0.0, 60.0), 20.0, 4)
    dmap = precompute(raster, spec, w=30.0, D=16, out_res=3.0)
    xc, yc, tc = spec.x_centers(), spec.y_centers(), spec.theta_centers()
    rng = np.random.default_rng(6)
    for _ in range(6):
        i, j, l = (int(rng.integers(n)) for n in spec.shape)
        patch = crop_rotated_patch(raster, xc[i], yc[j], tc[l], 30.0, 3.0)
        want = block_mean_descriptor(patch, 16).values
        np.testing.assert_array_equal(dmap.data[i, j, l], want)


def test_precompute_is_chunk_size_invariant():
    raster = _random_raster(7, 112, 112, origin=(-25.0, -25.0))
    spec = make_grid_spec((0.0, 60.0, 0.0, 60.0), 20.0, 2)
    a = precompute(raster, spec, w=30.0, D=8, out_res=5.0)
    b = precompute(raster, spec, w=30.0, D=8, out_res=5.0, chunk_voxels=1)
    np.testing.assert_array_equal(a.data, b.data)


def test_precompute_constant_raster_degenerates_to_e1():
    raster = RasterMap(
        pixels=np.full((112, 112, 3), 99.0), origin_x=-25.0, origin_y=-25.0, gsd=1.0
    )
    spec = make_grid_spec((0.0, 60.0, 0.0, 60.0), 20.0, 3)
    dmap = precompute(raster, spec, w=30.0, D=8, out_res=3.0)
    np.testing.assert_array_equal(dmap.data[..., 0], np.ones(spec.shape))
    np.testing.assert_array_equal(dmap.data[..., 1:], np.zeros(spec.shape + (7,)))


def test_precompute_without_margin_names_the_voxel():
    raster = _random_raster(8, 60, 60)  # no margin beyond the grid extent
    spec = make_grid_spec((0.0, 60.0, 0.0, 60.0), 20.0, 4)
    with pytest.raises(ValueError, match=r"voxel \(i=.*j=.*l=.*\)"):
        precompute(raster, spec, w=30.0, D=8, out_res=3.0)


# ---------------------------------------------------------------------------
# map files


@pytest.fixture(scope="module")
def small_map():
    raster = _random_raster(9, 112, 112, origin=(-25.0, -25.0))
    spec = make_grid_spec((0.0, 60.0, 0.0, 60.0), 20.0, 4)
    return precompute(raster, spec, w=30.0, D=8, out_res=3.0)


def test_map_round_trip_is_bitwise(tmp_path, small_map):
    path = tmp_path / "m.lsvlmap"
    save_map(small_map, path, provider="block_mean", w=30.0, out_res=3.0)
    back = load_map(path)
    assert back.D == small_map.D
    assert back.spec == small_map.spec
    np.testing.assert_array_equal(back.data, small_map.data)
    manifest = load_map_manifest(path)
    assert manifest == {"provider": "block_mean", "w": 30.0, "out_res": 3.0, "D": 8}


def test_map_file_size_formula_is_exact(tmp_path, small_map):
    path = tmp_path / "m.lsvlmap"
    save_map(small_map, path)
    spec = small_map.spec
    assert os.path.getsize(path) == map_file_size(spec.n_x, spec.n_y, spec.n_theta, 8)
    assert map_file_size(3, 3, 4, 8) == HEADER_BYTES + 3 * 3 * 4 * 8 * 8


def test_map_saves_are_byte_identical(tmp_path, small_map):
    p1, p2 = tmp_path / "a.lsvlmap", tmp_path / "b.lsvlmap"
    save_map(small_map, p1)
    save_map(small_map, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_map_float32_downcast(tmp_path, small_map):
    path = tmp_path / "m.lsvlmap"
    save_map(small_map, path)
    back = load_map(path, dtype=np.float32)
    assert back.data.dtype == np.float32
    np.testing.assert_allclose(back.data, small_map.data, atol=1e-6)


def test_map_load_rejects_bad_magic(tmp_path, small_map):
    path = tmp_path / "m.lsvlmap"
    save_map(small_map, path)
    blob = bytearray(path.read_bytes())
    blob[0] ^= 0xFF
    path.write_bytes(blob)
    with pytest.raises(ValueError, match="magic"):
        load_map(path)


def test_map_load_rejects_truncation(tmp_path, small_map):
    path = tmp_path / "m.lsvlmap"
    save_map(small_map, path)
    blob = path.read_bytes()
    path.write_bytes(blob[: HEADER_BYTES - 10])
    with pytest.raises(ValueError, match="truncated header"):
        load_map(path)
    path.write_bytes(blob[:-100])
    with pytest.raises(ValueError, match="truncated payload"):
        load_map(path)


def test_map_load_rejects_payload_corruption(tmp_path, small_map):
    path = tmp_path / "m.lsvlmap"
    save_map(small_map, path)
    blob = bytearray(path.read_bytes())
    blob[HEADER_BYTES + 5] ^= 0x01
    path.write_bytes(blob)
    with pytest.raises(ValueError, match="checksum"):
        load_map(path)
    # The checksum is an integrity feature, not a semantic one: a caller may
    # opt out (the corrupted byte here lands mid-mantissa, so the spot check
    # of descriptor norms still passes).
    load_map(path, verify_crc=False)


def test_map_load_rejects_header_corruption(tmp_path, small_map):
    path = tmp_path / "m.lsvlmap"
    save_map(small_map, path)
    blob = bytearray(path.read_bytes())
    blob[45] ^= 0x10  # inside the cell-size field; breaks the spec hash
    path.write_bytes(blob)
    with pytest.raises(ValueError, match="hash mismatch"):
        load_map(path)


def test_map_load_rejects_off_unit_descriptors(tmp_path, small_map):
    broken = DescriptorMap(
        spec=small_map.spec, D=small_map.D, data=small_map.data * 2.0
    )
    path = tmp_path / "m.lsvlmap"
    save_map(broken, path)
    with pytest.raises(ValueError, match="norms"):
        load_map(path)


def test_map_header_hash_matches_the_spec(tmp_path, small_map):
    path = tmp_path / "m.lsvlmap"
    save_map(small_map, path)
    blob = path.read_bytes()
    hashed = int.from_bytes(blob[48:56], "little")
    assert hashed == grid_spec_hash(small_map.spec)


# ---------------------------------------------------------------------------
# rasters


def test_raster_round_trip(tmp_path):
    rng = np.random.default_rng(10)
    raster = RasterMap(
        pixels=rng.integers(0, 256, size=(30, 40, 3)).astype(np.float32),
        origin_x=-12.5,
        origin_y=700.0,
        gsd=3.0,
    )
    path = tmp_path / "world.png"
    save_raster(raster, path)
    back = load_raster(path)
    assert back.pixels.dtype == np.float32
    np.testing.assert_array_equal(back.pixels, raster.pixels)
    assert (back.origin_x, back.origin_y, back.gsd) == (-12.5, 700.0, 3.0)
