"""Ground-patch descriptors: L2-normalized vectors in R^D.

The engine only ever consumes unit vectors and distances between them, so
any provider (including an external neural embedding) can be plugged in
through the descriptor-map file format.  The built-in reference provider is
a deliberately simple handcrafted embedding: per-channel block means over a
g x g partition of the patch, mean-subtracted per channel and L2-normalized.
Mean subtraction makes it invariant to global brightness and channel offsets
(a weak stand-in for appearance/season invariance) while block structure
keeps it sensitive to layout and rotation.

Partition table (g x g blocks, features ordered channel-major and truncated
to the first D):

====  ===  ==================================
D     g    kept components (of g*g*3)
====  ===  ==================================
8     2    8 of 12   (R all 4 blocks, G all 4)
16    3    16 of 27  (R all 9, G first 7)
32    4    32 of 48  (R all 16, G all 16)
128   7    128 of 147 (R, G all 49; B first 30)
====  ===  ==================================
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Descriptor",
    "Patch",
    "SUPPORTED_D",
    "block_mean_descriptor",
    "describe_batch",
    "descriptor_distance",
]

# D -> side of the block partition grid.
_PARTITION = {8: 2, 16: 3, 32: 4, 128: 7}
SUPPORTED_D = tuple(sorted(_PARTITION))


@dataclass(frozen=True)
class Descriptor:
    """A unit-norm embedding vector (float64, ||values|| = 1 within 1e-6)."""

    values: np.ndarray

    @property
    def D(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class Patch:
    """A square ground image patch, H x W x 3 intensities in [0, 255]."""

    pixels: np.ndarray

    @property
    def side(self) -> int:
        return int(self.pixels.shape[0])


def _block_edges(n: int, g: int) -> np.ndarray:
    """Integer block boundaries partitioning ``n`` pixels into ``g`` runs."""
    return np.array([(k * n) // g for k in range(g + 1)], dtype=np.intp)


def _batch_features(pixels: np.ndarray, D: int) -> np.ndarray:
    """Raw (pre-normalization) feature matrix for a (B, H, W, 3) pixel stack.

    The reduction order is fixed (per-block contiguous sums, then channel
    mean subtraction) and independent of the batch size, so describing a
    stack of patches is bitwise-identical to describing them one at a time.
    """
    if D not in _PARTITION:
        raise ValueError(f"unsupported descriptor dimension D={D}; supported: {SUPPORTED_D}")
    if pixels.ndim != 4 or pixels.shape[-1] != 3:
        raise ValueError(f"expected a (B, H, W, 3) pixel stack, got {pixels.shape}")
    g = _PARTITION[D]
    b, h, w, _ = pixels.shape
    if h != w:
        raise ValueError(f"patch must be square, got {h}x{w}")
    if h < g:
        raise ValueError(f"patch side {h} smaller than partition {g}")
    pixels = pixels.astype(np.float64, copy=False)
    re = _block_edges(h, g)
    ce = _block_edges(w, g)
    means = np.empty((b, 3, g, g))
    for r in range(g):
        for c in range(g):
            block = pixels[:, re[r] : re[r + 1], ce[c] : ce[c + 1], :]
            area = float(block.shape[1] * block.shape[2])
            means[:, :, r, c] = block.sum(axis=(1, 2)) / area
    # Per-channel zero-mean over the block grid: invariant to global
    # brightness and to per-channel (hue/white-balance) offsets.
    means -= means.mean(axis=(2, 3), keepdims=True)
    return means.reshape(b, 3 * g * g)[:, :D]


def describe_batch(pixels: np.ndarray, D: int) -> np.ndarray:
    """Descriptors for a (B, H, W, 3) stack of patches; returns (B, D) float64.

    Rows with no contrast at all (zero feature vector) map to the canonical
    basis vector e1 rather than dividing by zero.
    """
    feats = _batch_features(pixels, D)
    norms = np.sqrt(np.einsum("bd,bd->b", feats, feats))
    degenerate = norms < 1e-12
    if degenerate.any():
        feats[degenerate] = 0.0
        feats[degenerate, 0] = 1.0
        norms = np.where(degenerate, 1.0, norms)
    feats /= norms[:, None]
    return feats


def block_mean_descriptor(patch: Patch, D: int) -> Descriptor:
    """Reference descriptor of one patch (see the module partition table).

    Block means per channel over a g x g partition, per-channel mean
    subtraction, channel-major flattening truncated to D components, then L2
    normalization.  An all-constant patch degenerates to the canonical unit
    vector e1.
    """
    return Descriptor(values=describe_batch(patch.pixels[None], D)[0])


def descriptor_distance(a: Descriptor, b: Descriptor) -> float:
    """Euclidean distance between two descriptors, clamped into [0, 2]."""
    av, bv = a.values, b.values
    if av.size != bv.size:
        raise ValueError(f"descriptor dimensions differ: {av.size} vs {bv.size}")
    return float(np.clip(np.linalg.norm(av - bv), 0.0, 2.0))
