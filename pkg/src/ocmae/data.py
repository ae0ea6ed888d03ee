"""Synthetic multi-object scene generation and dataset io.

Scenes are flat-colored shapes on a plain background. Every sample is a
pure function of (scene seed, sample index), so datasets regenerate
byte-identically. Images are written as RGB PNGs, segmentation masks as
grayscale PNGs whose pixel value is the object label (0 = background),
listed side by side in a tab-separated ``manifest.txt``.

Object labels in a mask are consecutive 0..n with every label present:
objects fully hidden by later draws (overlap mode) are renumbered away.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError
from .pngio import read_png, write_png

__all__ = ["SHAPE_NAMES", "SceneSpec", "Sample", "DataSplit", "ImageBatch",
           "render_sample", "generate", "load", "load_manifest"]

SHAPE_NAMES = ("square", "circle", "triangle", "tetromino-L", "tetromino-T", "bar")

# saturated, mutually distant colors; black background keeps them distinct
DEFAULT_PALETTE = ((230, 25, 75), (60, 180, 75), (67, 99, 216),
                   (255, 225, 25), (245, 130, 48), (145, 30, 180))

_SAMPLE_STREAM = 1001


@dataclass
class SceneSpec:
    """Everything that determines a generated dataset.

    Attributes:
        height, width: canvas size in pixels.
        shapes: subset of SHAPE_NAMES to draw from.
        min_objects, max_objects: object count range, inclusive.
        palette: RGB tuples; colors per scene are drawn without replacement
            when the palette is large enough.
        background: RGB tuple, or "gray-random" for a per-scene gray level.
        allow_overlap: if False, placements are rejection-sampled until
            objects are disjoint.
        seed: generator seed; samples depend only on (seed, index).
    """

    height: int = 35
    width: int = 35
    shapes: tuple = SHAPE_NAMES
    min_objects: int = 3
    max_objects: int = 3
    palette: tuple = DEFAULT_PALETTE
    background: tuple | str = (0, 0, 0)
    allow_overlap: bool = False
    seed: int = 0

    def validate(self):
        if self.height < 16 or self.width < 16:
            raise ConfigError(f"canvas {self.height}x{self.width} too small (min 16)")
        if not 1 <= self.min_objects <= self.max_objects:
            raise ConfigError(f"bad object count range "
                              f"[{self.min_objects}, {self.max_objects}]")
        unknown = [s for s in self.shapes if s not in SHAPE_NAMES]
        if unknown:
            raise ConfigError(f"unknown shape names: {unknown}")
        if not self.shapes:
            raise ConfigError("shape list is empty")
        if not self.palette:
            raise ConfigError("palette is empty")
        if isinstance(self.background, str) and self.background != "gray-random":
            raise ConfigError(f"background must be an RGB tuple or 'gray-random', "
                              f"got {self.background!r}")
        return self


@dataclass
class Sample:
    """One scene: image in [0, 1] float32 (H, W, 3), int32 label mask (H, W)."""

    image: np.ndarray
    mask: np.ndarray


@dataclass
class DataSplit:
    """A loaded dataset slice: (N, H, W, 3) float32 images, (N, H, W) int32 masks."""

    images: np.ndarray
    masks: np.ndarray

    def __len__(self):
        return self.images.shape[0]

    def batch(self, indices) -> "ImageBatch":
        return ImageBatch(self.images[indices], self.masks[indices])


@dataclass
class ImageBatch:
    images: np.ndarray
    masks: np.ndarray | None = None


# -- rasterizers ----------------------------------------------------------------
# Each returns a boolean coverage map with at least one pixel, placed fully
# inside the canvas. Sizes scale with the smaller canvas edge.


def _raster_square(rng, h, w):
    base = min(h, w)
    half = int(rng.integers(max(2, base // 12), max(3, base // 6) + 1))
    cy = int(rng.integers(half, h - half))
    cx = int(rng.integers(half, w - half))
    yy, xx = np.ogrid[:h, :w]
    return (np.abs(yy - cy) <= half) & (np.abs(xx - cx) <= half)


def _raster_circle(rng, h, w):
    base = min(h, w)
    r = float(rng.uniform(base * 0.09, base * 0.17))
    m = int(np.ceil(r))
    cy = int(rng.integers(m, h - m))
    cx = int(rng.integers(m, w - m))
    yy, xx = np.ogrid[:h, :w]
    return (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r


def _rot90(points: np.ndarray, k: int) -> np.ndarray:
    for _ in range(k):
        points = np.stack([points[:, 1], -points[:, 0]], axis=1)
    return points


def _raster_triangle(rng, h, w):
    base = min(h, w)
    half_base = int(rng.integers(max(2, base // 11), max(3, base // 6) + 1))
    height = int(rng.integers(max(3, base // 8), max(4, base // 4) + 1))
    verts = _rot90(np.array([[0, 0], [height, -half_base], [height, half_base]]),
                   int(rng.integers(4))).astype(np.float64)
    oy = int(rng.integers(int(-verts[:, 0].min()), int(h - verts[:, 0].max())))
    ox = int(rng.integers(int(-verts[:, 1].min()), int(w - verts[:, 1].max())))
    v = verts + (oy, ox)
    yy, xx = np.mgrid[:h, :w]

    def side(a, b):
        return (b[1] - a[1]) * (yy - a[0]) - (b[0] - a[0]) * (xx - a[1])

    s1, s2, s3 = side(v[0], v[1]), side(v[1], v[2]), side(v[2], v[0])
    return ((s1 >= 0) & (s2 >= 0) & (s3 >= 0)) | ((s1 <= 0) & (s2 <= 0) & (s3 <= 0))


_TETROMINO_CELLS = {
    "tetromino-L": np.array([[0, 0], [1, 0], [2, 0], [2, 1]]),
    "tetromino-T": np.array([[0, 0], [0, 1], [0, 2], [1, 1]]),
}


def _raster_tetromino(rng, h, w, name):
    base = min(h, w)
    cell = int(rng.integers(2, max(3, base // 9) + 1))
    cells = _rot90(_TETROMINO_CELLS[name].copy(), int(rng.integers(4)))
    cells = cells - cells.min(axis=0)
    rows = (cells[:, 0].max() + 1) * cell
    cols = (cells[:, 1].max() + 1) * cell
    oy = int(rng.integers(0, h - rows + 1))
    ox = int(rng.integers(0, w - cols + 1))
    m = np.zeros((h, w), dtype=bool)
    for r, c in cells:
        m[oy + r * cell:oy + (r + 1) * cell, ox + c * cell:ox + (c + 1) * cell] = True
    return m


def _raster_bar(rng, h, w):
    base = min(h, w)
    thick = int(rng.integers(2, 4))
    length = int(rng.integers(base // 3, base // 2 + 1))
    m = np.zeros((h, w), dtype=bool)
    if rng.integers(2):
        oy = int(rng.integers(0, h - thick + 1))
        ox = int(rng.integers(0, w - length + 1))
        m[oy:oy + thick, ox:ox + length] = True
    else:
        oy = int(rng.integers(0, h - length + 1))
        ox = int(rng.integers(0, w - thick + 1))
        m[oy:oy + length, ox:ox + thick] = True
    return m


def _raster(rng, h, w, name):
    if name == "square":
        return _raster_square(rng, h, w)
    if name == "circle":
        return _raster_circle(rng, h, w)
    if name == "triangle":
        return _raster_triangle(rng, h, w)
    if name in _TETROMINO_CELLS:
        return _raster_tetromino(rng, h, w, name)
    if name == "bar":
        return _raster_bar(rng, h, w)
    raise ConfigError(f"unknown shape name: {name}")


def _renumber(mask: np.ndarray) -> np.ndarray:
    """Map labels to consecutive 0..n, dropping fully occluded ones."""
    present = np.unique(mask)
    lut = np.zeros(int(mask.max()) + 1, dtype=np.int32)
    nxt = 0
    for lab in present:
        if lab == 0:
            continue
        nxt += 1
        lut[lab] = nxt
    return lut[mask]


def render_sample(spec: SceneSpec, index: int) -> Sample:
    """Render a single scene deterministically from (spec.seed, index).

    Later objects occlude earlier ones (draw order is depth order). Raises
    DataError when no valid placement is found in 100 attempts.
    """
    rng = np.random.default_rng((spec.seed, _SAMPLE_STREAM, index))
    h, w = spec.height, spec.width
    n_obj = int(rng.integers(spec.min_objects, spec.max_objects + 1))
    if spec.background == "gray-random":
        bg = int(rng.integers(0, 256))
        bg_rgb = (bg, bg, bg)
    else:
        bg_rgb = tuple(spec.background)
    image = np.empty((h, w, 3), dtype=np.uint8)
    image[:] = bg_rgb
    mask = np.zeros((h, w), dtype=np.int32)

    palette = np.array(spec.palette, dtype=np.uint8)
    replace = n_obj > len(palette)
    color_ids = rng.choice(len(palette), size=n_obj, replace=replace)

    for obj in range(n_obj):
        name = spec.shapes[int(rng.integers(len(spec.shapes)))]
        for _attempt in range(100):
            cov = _raster(rng, h, w, name)
            if not cov.any():
                continue
            if not spec.allow_overlap and (cov & (mask > 0)).any():
                continue
            break
        else:
            raise DataError(f"no valid placement for object {obj} of sample {index} "
                            f"after 100 attempts")
        image[cov] = palette[color_ids[obj]]
        mask[cov] = obj + 1

    return Sample(image=image.astype(np.float32) / 255.0, mask=_renumber(mask))


# -- dataset io -------------------------------------------------------------------


def generate(spec: SceneSpec, count: int, out_dir) -> str:
    """Write ``count`` samples plus ``manifest.txt`` into ``out_dir``.

    Returns the manifest path. Output bytes depend only on (spec, count).
    """
    spec.validate()
    os.makedirs(out_dir, exist_ok=True)
    lines = []
    for i in range(count):
        sample = render_sample(spec, i)
        img_name = f"img_{i:06d}.png"
        mask_name = f"mask_{i:06d}.png"
        write_png(os.path.join(out_dir, img_name),
                  np.round(sample.image * 255.0).astype(np.uint8))
        write_png(os.path.join(out_dir, mask_name), sample.mask.astype(np.uint8))
        lines.append(f"{img_name}\t{mask_name}\n")
    manifest = os.path.join(out_dir, "manifest.txt")
    with open(manifest, "w") as fh:
        fh.writelines(lines)
    return manifest


def load_manifest(dataset_dir) -> list[tuple[str, str]]:
    path = os.path.join(dataset_dir, "manifest.txt")
    if not os.path.isfile(path):
        raise DataError(f"manifest not found: {path}")
    pairs = []
    with open(path) as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError(f"{path}:{ln}: expected 'image<TAB>mask', got {line!r}")
            pairs.append((parts[0], parts[1]))
    return pairs


def load(dataset_dir, split_fraction: float = 0.9) -> tuple[DataSplit, DataSplit]:
    """Load a generated dataset and split it by manifest order.

    The first floor(n * split_fraction) pairs become the training split, the
    rest the evaluation split. Images come back as float32 in [0, 1].

    Raises:
        DataError: missing/corrupt file, or inconsistent shapes across the
            dataset (message names the offending file).
    """
    if not 0.0 < split_fraction <= 1.0:
        raise ConfigError(f"split fraction must be in (0, 1], got {split_fraction}")
    pairs = load_manifest(dataset_dir)
    images, masks = [], []
    shape = None
    for img_name, mask_name in pairs:
        img = read_png(os.path.join(dataset_dir, img_name))
        msk = read_png(os.path.join(dataset_dir, mask_name))
        if img.ndim != 3:
            raise DataError(f"{img_name}: expected an RGB image, got shape {img.shape}")
        if msk.shape != img.shape[:2]:
            raise DataError(f"{mask_name}: mask shape {msk.shape} does not match "
                            f"image shape {img.shape[:2]}")
        if shape is None:
            shape = img.shape
        elif img.shape != shape:
            raise DataError(f"{img_name}: shape {img.shape} differs from first "
                            f"image shape {shape}")
        images.append(img)
        masks.append(msk)
    imgs = np.stack(images).astype(np.float32) / 255.0 if images else \
        np.zeros((0, 0, 0, 3), dtype=np.float32)
    msks = np.stack(masks).astype(np.int32) if masks else np.zeros((0, 0, 0), np.int32)
    n_train = int(len(pairs) * split_fraction)
    return (DataSplit(imgs[:n_train], msks[:n_train]),
            DataSplit(imgs[n_train:], msks[n_train:]))
