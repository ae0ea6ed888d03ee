"""Checkpoint container.

Layout (all integers little-endian):

    bytes 0..3   magic ``OCKP``
    bytes 4..7   format version (uint32)
    bytes 8..11  header length L (uint32)
    bytes 12..   UTF-8 JSON header of L bytes
    then         raw float32 little-endian array payloads, C-order,
                 concatenated in header order

The JSON header holds three objects: ``config`` (full run configuration
echo), ``arrays`` (list of {name, shape} in payload order; model parameters
plus optimizer moments), and ``meta`` (scalars: epoch, optimizer step,
seed, schedule position). Loading verifies magic, version, and payload
length, and returns the three parts.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import DataError

__all__ = ["save_checkpoint", "load_checkpoint", "FORMAT_VERSION"]

MAGIC = b"OCKP"
FORMAT_VERSION = 1


def save_checkpoint(path, config: dict, arrays: dict[str, np.ndarray], meta: dict):
    manifest = [{"name": name, "shape": list(arr.shape)} for name, arr in arrays.items()]
    header = json.dumps({"config": config, "arrays": manifest, "meta": meta},
                        sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(header)))
        fh.write(header)
        for arr in arrays.values():
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_checkpoint(path) -> tuple[dict, dict[str, np.ndarray], dict]:
    """Read a checkpoint; returns (config, arrays, meta).

    Raises:
        DataError: missing file, bad magic/version, or truncated payload.
    """
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except FileNotFoundError:
        raise DataError(f"checkpoint not found: {path}") from None
    if len(blob) < 12 or blob[:4] != MAGIC:
        raise DataError(f"not a checkpoint file: {path}")
    version, hlen = struct.unpack("<II", blob[4:12])
    if version != FORMAT_VERSION:
        raise DataError(f"unsupported checkpoint version {version} in {path}")
    try:
        header = json.loads(blob[12:12 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"corrupt checkpoint header in {path}: {exc}") from None
    arrays: dict[str, np.ndarray] = {}
    offset = 12 + hlen
    for entry in header["arrays"]:
        shape = tuple(int(s) for s in entry["shape"])
        nbytes = int(np.prod(shape)) * 4 if shape else 4
        chunk = blob[offset:offset + nbytes]
        if len(chunk) != nbytes:
            raise DataError(f"truncated checkpoint payload in {path} "
                            f"(array {entry['name']})")
        arrays[entry["name"]] = np.frombuffer(chunk, dtype="<f4").reshape(shape).copy()
        offset += nbytes
    if offset != len(blob):
        raise DataError(f"trailing bytes in checkpoint {path}")
    return header["config"], arrays, header["meta"]
