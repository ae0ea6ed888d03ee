"""Qualitative visualization grids.

One grid per image, 6 rows by max(3, K) cells, each cell H x W with a
2-pixel frame:

    row 0: input image
    row 1: composed reconstruction
    row 2: argmax slot segmentation, colorized with the fixed palette
    row 3: per-slot reconstruction weighted by its mask (one cell per slot)
    row 4: per-slot reconstruction without the mask
    row 5: per-slot patch attention, nearest-neighbor upsampled by the
           patch size

Rows 0..2 use only the first cell. Output PNGs are byte-stable.
"""

from __future__ import annotations

import os

import numpy as np

from .model import ObjectCentricMAE
from .pngio import write_png

__all__ = ["SEG_PALETTE", "colorize_labels", "render_grid", "save_grids"]

# fixed slot colors, index = slot id (supports up to 12 slots)
SEG_PALETTE = np.array([
    (230, 25, 75), (60, 180, 75), (67, 99, 216), (255, 225, 25),
    (245, 130, 48), (145, 30, 180), (70, 240, 240), (240, 50, 230),
    (188, 246, 12), (250, 190, 190), (0, 128, 128), (230, 190, 255),
], dtype=np.uint8)

_PAD = 2
_BG = 24


def colorize_labels(labels: np.ndarray) -> np.ndarray:
    """(H, W) int labels -> (H, W, 3) uint8 using the fixed palette."""
    return SEG_PALETTE[labels % len(SEG_PALETTE)]


def _to_u8(img: np.ndarray) -> np.ndarray:
    return np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def render_grid(model: ObjectCentricMAE, image: np.ndarray) -> np.ndarray:
    """Render the 6-row grid for one (H, W, C) image, returned as uint8."""
    cfg = model.cfg
    k = cfg.num_slots
    h, w, p = cfg.height, cfg.width, cfg.patch_size
    gh, gw = cfg.grid
    scene, slot_state, _ = model.forward(image[None], 0.0, np.random.default_rng(0))

    rgb = scene.per_slot_rgb.data[0]          # (K, H, W, C)
    masks = scene.masks.data[0]               # (K, H, W)
    composed = scene.composed.data[0]
    attn = slot_state.attn.data[0]            # (N, K), ratio 0 keeps all patches
    labels = np.argmax(masks, axis=0)

    cols = max(3, k)
    canvas = np.full((6 * h + 7 * _PAD, cols * w + (cols + 1) * _PAD, 3),
                     _BG, dtype=np.uint8)

    def put(row: int, col: int, cell: np.ndarray):
        y = _PAD + row * (h + _PAD)
        x = _PAD + col * (w + _PAD)
        canvas[y:y + h, x:x + w] = cell

    put(0, 0, _to_u8(image))
    put(1, 0, _to_u8(composed))
    put(2, 0, colorize_labels(labels))
    for s in range(k):
        put(3, s, _to_u8(rgb[s] * masks[s][..., None]))
        put(4, s, _to_u8(rgb[s]))
        amap = attn[:, s].reshape(gh, gw)
        amap = np.repeat(np.repeat(amap, p, axis=0), p, axis=1)
        put(5, s, _to_u8(np.repeat(amap[..., None], 3, axis=2)))
    return canvas


def save_grids(model: ObjectCentricMAE, images: np.ndarray, out_dir,
               prefix: str = "grid") -> list[str]:
    """Write one grid PNG per image; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for i in range(images.shape[0]):
        path = os.path.join(out_dir, f"{prefix}_{i:03d}.png")
        write_png(path, render_grid(model, images[i]))
        paths.append(path)
    return paths
