"""Minimal PNG io with byte-stable output.

Writing is implemented directly on zlib/struct with a fixed chunk layout
(IHDR, one IDAT, IEND), filter type 0 on every row, compression level 6:
the same array always produces the same bytes, on any platform. Reading
goes through Pillow, which tolerates any valid PNG.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np
from PIL import Image

from .errors import DataError

__all__ = ["png_bytes", "write_png", "read_png"]

_SIGNATURE = b"\x89PNG\r\n\x1a\n"


def _chunk(tag: bytes, payload: bytes) -> bytes:
    return (struct.pack(">I", len(payload)) + tag + payload
            + struct.pack(">I", zlib.crc32(tag + payload) & 0xFFFFFFFF))


def png_bytes(array: np.ndarray) -> bytes:
    """Encode a uint8 array as PNG bytes.

    Args:
        array: (H, W) grayscale or (H, W, 3) RGB, dtype uint8.
    """
    if array.dtype != np.uint8:
        raise ValueError(f"png encoder expects uint8, got {array.dtype}")
    if array.ndim == 2:
        color_type = 0
        rows = array
    elif array.ndim == 3 and array.shape[2] == 3:
        color_type = 2
        rows = array
    else:
        raise ValueError(f"png encoder expects (H, W) or (H, W, 3), got {array.shape}")
    h, w = array.shape[:2]
    ihdr = struct.pack(">IIBBBBB", w, h, 8, color_type, 0, 0, 0)
    raw = b"".join(b"\x00" + rows[y].tobytes() for y in range(h))
    idat = zlib.compress(raw, 6)
    return _SIGNATURE + _chunk(b"IHDR", ihdr) + _chunk(b"IDAT", idat) + _chunk(b"IEND", b"")


def write_png(path, array: np.ndarray):
    with open(path, "wb") as fh:
        fh.write(png_bytes(array))


def read_png(path) -> np.ndarray:
    """Decode a PNG into uint8 (H, W) for grayscale or (H, W, 3) for color.

    Raises:
        DataError: naming the file when it is missing or not decodable.
    """
    try:
        with Image.open(path) as img:
            if img.mode == "L":
                return np.asarray(img, dtype=np.uint8)
            return np.asarray(img.convert("RGB"), dtype=np.uint8)
    except FileNotFoundError:
        raise DataError(f"image file not found: {path}") from None
    except Exception as exc:
        raise DataError(f"cannot decode image {path}: {exc}") from None
