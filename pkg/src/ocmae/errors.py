"""Exception types shared across the package.

Kept in one module so the CLI can map them to exit codes without importing
the heavier modules that raise them.
"""

from __future__ import annotations

__all__ = ["ConfigError", "DataError", "NumericalAbort"]


class ConfigError(Exception):
    """Invalid or inconsistent configuration (unknown key, bad value, ...)."""


class DataError(Exception):
    """Dataset problem: missing file, corrupt image, shape mismatch."""


class NumericalAbort(Exception):
    """Non-finite loss or gradient encountered during training."""

    def __init__(self, message: str, *, epoch: int | None = None,
                 step: int | None = None, batch_index: int | None = None):
        super().__init__(message)
        self.epoch = epoch
        self.step = step
        self.batch_index = batch_index
