"""Georeferenced rasters, rotated ground crops, and the descriptor map.

Raster convention: ``pixels[row, col, channel]`` with the center of pixel
``(row, col)`` at world coordinates
``(origin_x + (col + 0.5) * gsd, origin_y + (row + 0.5) * gsd)`` — columns
run along +x (East), rows along +y (North), row 0 at the southern edge.

Patch convention: ``crop_rotated_patch`` returns patches whose column axis
points along the query heading and whose row axis points to its left, so a
heading-0 crop of a raster at matching resolution is the identity.

The descriptor map is the dense per-voxel table ``M[i, j, l] in R^D`` of
descriptors of the crop at each voxel's centerpoint, stored on disk as
8-byte floats:

``LSVLMAP1`` | u32 n_x, n_y, n_theta, D | f64 x_min, y_min, r_xy |
u64 grid-spec hash | u32 CRC32(payload) | u32 reserved | payload f64
``[i][j][l][d]`` (all little-endian; 64-byte header).
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass

import numpy as np
from PIL import Image

from ._util import atomic_write_bytes, atomic_write_json
from .descriptor import Patch, describe_batch
from .grid import GridSpec, _spec_from_header, grid_spec_hash

__all__ = [
    "RasterMap",
    "DescriptorMap",
    "crop_rotated_patch",
    "precompute",
    "save_map",
    "load_map",
    "load_map_manifest",
    "map_file_size",
    "save_raster",
    "load_raster",
]

MAP_MAGIC = b"LSVLMAP1"
_HEADER = "<4I3dQII"
HEADER_BYTES = 8 + struct.calcsize(_HEADER)  # 64


@dataclass(frozen=True)
class RasterMap:
    """A georeferenced RGB raster (see module docstring for the convention)."""

    pixels: np.ndarray
    origin_x: float
    origin_y: float
    gsd: float

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])


@dataclass
class DescriptorMap:
    """Dense descriptor table aligned voxel-for-voxel with the belief grid."""

    spec: GridSpec
    D: int
    data: np.ndarray


def _to_pixel(raster: RasterMap, xs, ys):
    """World coordinates -> continuous pixel-center coordinates (rows, cols)."""
    cols = (xs - raster.origin_x) / raster.gsd - 0.5
    rows = (ys - raster.origin_y) / raster.gsd - 0.5
    return rows, cols


def _sample_bilinear(pixels: np.ndarray, rows, cols) -> np.ndarray:
    """Bilinear interpolation of an (H, W, C) image at float pixel coords.

    Coordinates must lie inside the pixel-center hull [0, H-1] x [0, W-1];
    the caller validates bounds.  Output shape is ``rows.shape + (C,)``.
    """
    h, w = pixels.shape[:2]
    r0 = np.minimum(np.floor(rows).astype(np.intp), h - 2)
    c0 = np.minimum(np.floor(cols).astype(np.intp), w - 2)
    np.maximum(r0, 0, out=r0)
    np.maximum(c0, 0, out=c0)
    fr = (rows - r0)[..., None]
    fc = (cols - c0)[..., None]
    v00 = pixels[r0, c0]
    v01 = pixels[r0, c0 + 1]
    v10 = pixels[r0 + 1, c0]
    v11 = pixels[r0 + 1, c0 + 1]
    return (
        (1.0 - fr) * (1.0 - fc) * v00
        + (1.0 - fr) * fc * v01
        + fr * (1.0 - fc) * v10
        + fr * fc * v11
    )


def _patch_pattern(theta: float, w: float, out_res: float):
    """Rotated sample-point offsets (dx, dy), each (P, P), around the center."""
    p = int(round(w / out_res))
    if p < 1:
        raise ValueError(f"patch side {w}/{out_res} below one pixel")
    u = (np.arange(p) + 0.5) * out_res - 0.5 * w  # along heading (columns)
    v = (np.arange(p) + 0.5) * out_res - 0.5 * w  # to the left (rows)
    ct, st = np.cos(theta), np.sin(theta)
    dx = u[None, :] * ct - v[:, None] * st
    dy = u[None, :] * st + v[:, None] * ct
    return dx, dy


def _require_inside(raster: RasterMap, rows, cols, what: str):
    h, w = raster.pixels.shape[:2]
    rmin, rmax = float(np.min(rows)), float(np.max(rows))
    cmin, cmax = float(np.min(cols)), float(np.max(cols))
    if rmin < 0.0 or cmin < 0.0 or rmax > h - 1 or cmax > w - 1:
        raise ValueError(
            f"{what} falls outside the raster (pixel rows {rmin:.1f}..{rmax:.1f}, "
            f"cols {cmin:.1f}..{cmax:.1f}, raster {h}x{w})"
        )


def crop_rotated_patch(raster: RasterMap, x: float, y: float, theta: float, w: float, out_res: float) -> Patch:
    """Bilinear crop of the w x w meter square centered at (x, y), heading ``theta``.

    The output has ``w / out_res`` pixels per side; its column axis points
    along ``theta`` and its row axis to the left of ``theta``.

    Raises
    ------
    ValueError
        If any sample point of the rotated square leaves the raster.
    """
    dx, dy = _patch_pattern(theta, w, out_res)
    rows, cols = _to_pixel(raster, x + dx, y + dy)
    _require_inside(raster, rows, cols, f"crop at ({x:.1f}, {y:.1f})")
    return Patch(pixels=_sample_bilinear(raster.pixels, rows, cols))


def precompute(
    raster: RasterMap,
    spec: GridSpec,
    w: float,
    D: int,
    out_res: float,
    chunk_voxels: int = 200_000,
) -> DescriptorMap:
    """Descriptor of the centerpoint crop of every voxel (i, j, l).

    Batches the crop + describe pipeline over many voxels at once but keeps
    the per-sample arithmetic identical to ``crop_rotated_patch`` followed by
    ``block_mean_descriptor``, so spot checks against the one-voxel
    composition are bitwise-equal.

    Raises
    ------
    ValueError
        If some voxel's rotated patch leaves the raster; the error names the
        first offending voxel.
    """
    xc = spec.x_centers()
    yc = spec.y_centers()
    data = np.empty((spec.n_x, spec.n_y, spec.n_theta, D))
    flat = data.reshape(-1, spec.n_theta, D)
    # All (i, j) voxel centers, i-major to match the data layout.
    gx = np.repeat(xc, spec.n_y)
    gy = np.tile(yc, spec.n_x)
    h, wd = raster.pixels.shape[:2]
    for l, theta in enumerate(spec.theta_centers()):
        dx, dy = _patch_pattern(theta, w, out_res)
        # Coverage check: sample extremes over every voxel center at once.
        rows, cols = _to_pixel(
            raster,
            np.array([xc[0] + dx.min(), xc[-1] + dx.max()]),
            np.array([yc[0] + dy.min(), yc[-1] + dy.max()]),
        )
        if rows.min() < 0 or cols.min() < 0 or rows.max() > h - 1 or cols.max() > wd - 1:
            bad_i = 0 if cols.min() < 0 else spec.n_x - 1
            bad_j = 0 if rows.min() < 0 else spec.n_y - 1
            raise ValueError(
                f"patch of voxel (i={bad_i}, j={bad_j}, l={l}) leaves the raster; "
                f"extend the raster margin"
            )
        chunk = max(1, chunk_voxels * 20 // dx.size)
        for start in range(0, gx.size, chunk):
            sel = slice(start, start + chunk)
            xs = gx[sel][:, None, None] + dx[None, :, :]
            ys = gy[sel][:, None, None] + dy[None, :, :]
            rows, cols = _to_pixel(raster, xs, ys)
            patches = _sample_bilinear(raster.pixels, rows, cols)
            flat[sel, l, :] = describe_batch(patches, D)
    return DescriptorMap(spec=spec, D=D, data=data)


def map_file_size(n_x: int, n_y: int, n_theta: int, D: int) -> int:
    """Exact on-disk size in bytes of a saved map with these dimensions."""
    return HEADER_BYTES + n_x * n_y * n_theta * D * 8


def save_map(dmap: DescriptorMap, path, provider: str = "block_mean", w: float | None = None, out_res: float | None = None) -> None:
    """Write the descriptor map plus a JSON sidecar manifest (``path + '.json'``).

    The header embeds the grid-spec hash so a consumer can verify that map
    indices and belief indices refer to the same voxels.
    """
    spec = dmap.spec
    payload = np.ascontiguousarray(dmap.data, dtype="<f8").tobytes()
    header = MAP_MAGIC + struct.pack(
        _HEADER,
        spec.n_x,
        spec.n_y,
        spec.n_theta,
        dmap.D,
        spec.x_min,
        spec.y_min,
        spec.r_xy,
        grid_spec_hash(spec),
        zlib.crc32(payload),
        0,
    )
    atomic_write_bytes(path, header + payload)
    atomic_write_json(
        str(path) + ".json",
        {"provider": provider, "w": w, "out_res": out_res, "D": dmap.D},
    )


def load_map(path, dtype=np.float64, verify_crc: bool = True) -> DescriptorMap:
    """Read a descriptor map; validates magic, sizes, checksum, and norms.

    ``dtype=np.float32`` downcasts in memory (halves the footprint at a
    bounded <= 1e-6 distance perturbation); the file itself always holds
    8-byte floats.
    """
    with open(path, "rb") as f:
        head = f.read(HEADER_BYTES)
        if len(head) < HEADER_BYTES:
            raise ValueError(f"{path}: truncated header")
        if head[:8] != MAP_MAGIC:
            raise ValueError(f"{path}: bad magic {head[:8]!r}")
        n_x, n_y, n_theta, d, x_min, y_min, r_xy, spec_hash, crc, _ = struct.unpack(
            _HEADER, head[8:]
        )
        spec = _spec_from_header(n_x, n_y, n_theta, x_min, y_min, r_xy)
        if grid_spec_hash(spec) != spec_hash:
            raise ValueError(f"{path}: grid-spec hash mismatch (corrupt header)")
        n_vals = n_x * n_y * n_theta * d
        raw = f.read(n_vals * 8)
    if len(raw) != n_vals * 8:
        raise ValueError(
            f"{path}: truncated payload ({len(raw)} of {n_vals * 8} bytes)"
        )
    if verify_crc and zlib.crc32(raw) != crc:
        raise ValueError(f"{path}: payload checksum mismatch")
    data = np.frombuffer(raw, dtype="<f8").reshape(n_x, n_y, n_theta, d)
    data = data.astype(dtype) if dtype != np.float64 else data.copy()
    flat = data.reshape(-1, d)
    picks = np.linspace(0, flat.shape[0] - 1, min(64, flat.shape[0])).astype(np.intp)
    norms = np.linalg.norm(flat[picks].astype(np.float64), axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-4):
        raise ValueError(f"{path}: descriptor norms off unit (corrupt payload?)")
    return DescriptorMap(spec=spec, D=int(d), data=data)


def load_map_manifest(path) -> dict:
    with open(str(path) + ".json") as f:
        return json.load(f)


def save_raster(raster: RasterMap, path) -> None:
    """Write a raster as 8-bit PNG plus a georeferencing sidecar JSON."""
    arr = np.clip(np.rint(raster.pixels), 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="RGB").save(str(path), format="PNG")
    atomic_write_json(
        str(path) + ".json",
        {"origin_x": raster.origin_x, "origin_y": raster.origin_y, "gsd": raster.gsd},
    )


def load_raster(path) -> RasterMap:
    with Image.open(str(path)) as im:
        pixels = np.asarray(im.convert("RGB"), dtype=np.float32)
    with open(str(path) + ".json") as f:
        side = json.load(f)
    return RasterMap(
        pixels=pixels,
        origin_x=float(side["origin_x"]),
        origin_y=float(side["origin_y"]),
        gsd=float(side["gsd"]),
    )
