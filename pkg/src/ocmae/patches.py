"""Patch pipeline: image <-> token conversion, positional tables, masking.

Patch order is row-major over the patch grid; each token flattens its
(P, P, C) pixel block in row-major order. Positional encodings are fixed
2-D sine-cosine tables (per-axis [sin | cos] halves, row/col concatenated),
never learned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .tensor import Tensor, gather_rows

__all__ = ["PatchState", "patchify", "unpatchify", "positional_encoding", "random_mask"]


@dataclass
class PatchState:
    """Masking outcome for one batch.

    Invariants: for every row, ``unmasked_ids`` and ``masked_ids`` together
    are a permutation of 0..n_total-1; both are sorted ascending; the kept
    count is shared across the batch.

    Attributes:
        tokens_unmasked: (B, N_unmasked, D) tokens that stay visible.
        unmasked_ids: (B, N_unmasked) int positions of the visible tokens.
        masked_ids: (B, N_masked) int positions that were dropped.
        n_total: N, the full sequence length.
    """

    tokens_unmasked: Tensor
    unmasked_ids: np.ndarray
    masked_ids: np.ndarray
    n_total: int


def patchify(images: np.ndarray, patch_size: int) -> np.ndarray:
    """Cut (B, H, W, C) images into (B, N, P*P*C) flat patch rows.

    H and W must be divisible by the patch size.
    """
    b, h, w, c = images.shape
    p = patch_size
    if h % p or w % p:
        raise ConfigError(f"image size {h}x{w} not divisible by patch size {p}")
    gh, gw = h // p, w // p
    x = images.reshape(b, gh, p, gw, p, c)
    x = x.transpose(0, 1, 3, 2, 4, 5)
    return x.reshape(b, gh * gw, p * p * c)


def unpatchify(patches: np.ndarray, patch_size: int, height: int, width: int) -> np.ndarray:
    """Inverse of :func:`patchify`: (B, N, P*P*C) back to (B, H, W, C)."""
    b, n, flat = patches.shape
    p = patch_size
    gh, gw = height // p, width // p
    if n != gh * gw or flat % (p * p) != 0:
        raise ConfigError(f"patch array {patches.shape} inconsistent with "
                          f"{height}x{width} at patch size {p}")
    c = flat // (p * p)
    x = patches.reshape(b, gh, gw, p, p, c)
    x = x.transpose(0, 1, 3, 2, 4, 5)
    return x.reshape(b, height, width, c)


def _sincos_1d(positions: np.ndarray, dim: int) -> np.ndarray:
    """(len(positions), dim) table laid out as [sin block | cos block]."""
    half = dim // 2
    omega = 1.0 / (10000.0 ** (np.arange(half, dtype=np.float64) / half))
    ang = np.outer(positions.astype(np.float64), omega)
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=1)


def positional_encoding(grid_h: int, grid_w: int, dim: int) -> np.ndarray:
    """Fixed 2-D sine-cosine table for a patch grid, row-major order.

    The first dim/2 channels encode the row index, the rest the column
    index; each half is itself a [sin | cos] pair over dim/4 frequencies.

    Args:
        grid_h, grid_w: patch-grid extents.
        dim: embedding width; must be divisible by 4.

    Returns:
        (grid_h * grid_w, dim) float32; all rows distinct for grids with
        at most 64 positions.
    """
    if dim % 4 != 0:
        raise ConfigError(f"positional encoding dim {dim} must be divisible by 4")
    rows = np.repeat(np.arange(grid_h), grid_w)
    cols = np.tile(np.arange(grid_w), grid_h)
    emb = np.concatenate([_sincos_1d(rows, dim // 2), _sincos_1d(cols, dim // 2)], axis=1)
    return emb.astype(np.float32)


def random_mask(tokens: Tensor, ratio: float, rng: np.random.Generator) -> PatchState:
    """Uniformly mask a fraction of the tokens, independently per batch row.

    The kept count is round(N * (1 - ratio)) with round-half-up, shared by
    the whole batch, and clamped to at least 1 token. Index arrays come out
    sorted so downstream code sees tokens in original order.

    Args:
        tokens: (B, N, D) full token sequences (positions already added).
        ratio: fraction to mask, in [0, 1).
        rng: generator driving the per-row permutations.
    """
    if not 0.0 <= ratio < 1.0:
        raise ValueError(f"mask ratio must be in [0, 1), got {ratio}")
    b, n, _ = tokens.shape
    n_keep = max(1, int(np.floor(n * (1.0 - ratio) + 0.5)))
    perms = rng.permuted(np.tile(np.arange(n), (b, 1)), axis=1)
    unmasked = np.sort(perms[:, :n_keep], axis=1)
    masked = np.sort(perms[:, n_keep:], axis=1)
    return PatchState(gather_rows(tokens, unmasked), unmasked, masked, n)
