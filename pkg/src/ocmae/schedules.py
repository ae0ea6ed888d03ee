"""Per-step training schedules: masking ratio, loss weights, learning rate.

All three are functions of the fractional epoch ``e = global_step /
steps_per_epoch``. With total epochs T, warmup W, cooldown C, a run lasts
T + C epochs:

* mask ratio: held at its initial value through warmup, then linearly
  decreased to 0 at e = T, 0 during cooldown;
* loss weights: held at their initial values through warmup, then linearly
  ramped to their finals at e = T, constant during cooldown;
* learning rate: linear warmup from lr_start to lr_base over W epochs, then
  half-cycle cosine down to lr_min at e = T, constant lr_min in cooldown.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

__all__ = ["ScheduleConfig", "ScheduleState", "mask_ratio_at",
           "loss_weights_at", "lr_at", "schedule_at"]


@dataclass
class ScheduleConfig:
    total_epochs: int = 300
    warmup_epochs: int = 10
    cooldown_epochs: int = 30
    mask_ratio_init: float = 0.75
    lambda_pixel_init: float = 1e-4
    lambda_pixel_final: float = 3e-3
    lambda_object_init: float = 1e-4
    lambda_object_final: float = 1e-2
    lr_start: float = 1e-5
    lr_base: float = 5e-4
    lr_min: float = 1e-5

    def validate(self):
        if self.total_epochs < 1:
            raise ConfigError(f"total_epochs must be >= 1, got {self.total_epochs}")
        if not 0 <= self.warmup_epochs <= self.total_epochs:
            raise ConfigError(f"warmup_epochs {self.warmup_epochs} outside "
                              f"[0, {self.total_epochs}]")
        if self.cooldown_epochs < 0:
            raise ConfigError(f"cooldown_epochs must be >= 0, got {self.cooldown_epochs}")
        if not 0.0 <= self.mask_ratio_init < 1.0:
            raise ConfigError(f"mask_ratio_init must be in [0, 1), got {self.mask_ratio_init}")
        for name in ("lambda_pixel_init", "lambda_pixel_final",
                     "lambda_object_init", "lambda_object_final"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        for name in ("lr_start", "lr_base", "lr_min"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0")
        return self

    @property
    def run_epochs(self) -> int:
        return self.total_epochs + self.cooldown_epochs


@dataclass
class ScheduleState:
    """All schedule values at one fractional epoch."""

    epoch_frac: float
    mask_ratio: float
    lambda_pixel: float
    lambda_object: float
    lr: float
    in_warmup: bool


def _ramp(e: float, start: float, end: float, v0: float, v1: float) -> float:
    """Linear interpolation of v0 -> v1 as e goes start -> end."""
    t = (e - start) / (end - start)
    return v0 + (v1 - v0) * t


def mask_ratio_at(cfg: ScheduleConfig, e: float) -> float:
    if e < cfg.warmup_epochs:
        return cfg.mask_ratio_init
    if e >= cfg.total_epochs:
        return 0.0
    return _ramp(e, cfg.warmup_epochs, cfg.total_epochs, cfg.mask_ratio_init, 0.0)


def loss_weights_at(cfg: ScheduleConfig, e: float) -> tuple[float, float]:
    if e < cfg.warmup_epochs:
        return cfg.lambda_pixel_init, cfg.lambda_object_init
    if e >= cfg.total_epochs:
        return cfg.lambda_pixel_final, cfg.lambda_object_final
    return (_ramp(e, cfg.warmup_epochs, cfg.total_epochs,
                  cfg.lambda_pixel_init, cfg.lambda_pixel_final),
            _ramp(e, cfg.warmup_epochs, cfg.total_epochs,
                  cfg.lambda_object_init, cfg.lambda_object_final))


def lr_at(cfg: ScheduleConfig, e: float) -> float:
    if e < cfg.warmup_epochs:
        if cfg.warmup_epochs == 0:
            return cfg.lr_base
        return _ramp(e, 0.0, cfg.warmup_epochs, cfg.lr_start, cfg.lr_base)
    if e >= cfg.total_epochs:
        return cfg.lr_min
    t = (e - cfg.warmup_epochs) / (cfg.total_epochs - cfg.warmup_epochs)
    return cfg.lr_min + (cfg.lr_base - cfg.lr_min) * 0.5 * (1.0 + np.cos(np.pi * t))


def schedule_at(cfg: ScheduleConfig, e: float) -> ScheduleState:
    lp, lo = loss_weights_at(cfg, e)
    return ScheduleState(epoch_frac=e,
                         mask_ratio=mask_ratio_at(cfg, e),
                         lambda_pixel=lp,
                         lambda_object=lo,
                         lr=lr_at(cfg, e),
                         in_warmup=e < cfg.warmup_epochs)
