"""Shared test helpers."""

import numpy as np

from ocmae.nn import Module


def cast_params(module: Module, dtype=np.float64):
    """Cast every parameter of a module in place (for float64 grad checks)."""
    for p in module.named_parameters().values():
        p.data = p.data.astype(dtype)
    return module


def rng_for(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)
