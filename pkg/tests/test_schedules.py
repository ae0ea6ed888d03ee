"""Schedule curves: pinned values, boundaries, monotonicity."""

import numpy as np
import pytest

from ocmae.errors import ConfigError
from ocmae.schedules import (ScheduleConfig, loss_weights_at, lr_at,
                             mask_ratio_at, schedule_at)


def full_scale():
    return ScheduleConfig()  # 300 + 30, warmup 10, defaults


class TestPinnedValues:
    """Midpoint values recomputed by hand for the full-scale config.

    At epoch 155 the ramp position is (155 - 10) / (300 - 10) = 0.5:
    ratio 0.75 * (1 - 0.5) = 0.375; lambda_pixel 1e-4 + 2.9e-3 * 0.5 =
    1.55e-3; lambda_object 1e-4 + 9.9e-3 * 0.5 = 5.05e-3; lr at cosine
    midpoint = 1e-5 + 4.9e-4 * 0.5 = 2.55e-4.
    """

    def test_mask_ratio_midpoint(self):
        assert mask_ratio_at(full_scale(), 155.0) == pytest.approx(0.375, abs=1e-9)

    def test_loss_weight_midpoint(self):
        lp, lo = loss_weights_at(full_scale(), 155.0)
        assert lp == pytest.approx(1.55e-3, rel=1e-9)
        assert lo == pytest.approx(5.05e-3, rel=1e-9)

    def test_lr_cosine_midpoint(self):
        assert lr_at(full_scale(), 155.0) == pytest.approx(2.55e-4, rel=1e-9)


class TestBoundaries:
    def test_warmup_holds_initial_values(self):
        cfg = full_scale()
        for e in (0.0, 3.7, 9.999):
            assert mask_ratio_at(cfg, e) == 0.75
            assert loss_weights_at(cfg, e) == (1e-4, 1e-4)
        assert lr_at(cfg, 0.0) == pytest.approx(1e-5)
        assert lr_at(cfg, 10.0) == pytest.approx(5e-4)

    def test_lr_warmup_is_linear(self):
        cfg = full_scale()
        assert lr_at(cfg, 5.0) == pytest.approx((1e-5 + 5e-4) / 2)

    def test_ramp_ends_at_total_epochs(self):
        cfg = full_scale()
        assert mask_ratio_at(cfg, 300.0) == 0.0
        assert loss_weights_at(cfg, 300.0) == (3e-3, 1e-2)
        assert lr_at(cfg, 300.0) == pytest.approx(1e-5)

    def test_cooldown_holds_finals(self):
        cfg = full_scale()
        for e in (300.0, 315.5, 330.0):
            assert mask_ratio_at(cfg, e) == 0.0
            assert loss_weights_at(cfg, e) == (3e-3, 1e-2)
            assert lr_at(cfg, e) == pytest.approx(1e-5)

    def test_in_warmup_flag(self):
        cfg = full_scale()
        assert schedule_at(cfg, 9.99).in_warmup
        assert not schedule_at(cfg, 10.0).in_warmup

    def test_zero_warmup(self):
        cfg = ScheduleConfig(total_epochs=10, warmup_epochs=0, cooldown_epochs=0)
        assert lr_at(cfg, 0.0) == pytest.approx(5e-4)
        assert mask_ratio_at(cfg, 0.0) == 0.75


class TestShape:
    def test_mask_ratio_nonincreasing(self):
        cfg = full_scale()
        grid = np.linspace(0, 330, 661)
        vals = [mask_ratio_at(cfg, e) for e in grid]
        assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))

    def test_weights_nondecreasing(self):
        cfg = full_scale()
        grid = np.linspace(0, 330, 661)
        vals = [loss_weights_at(cfg, e) for e in grid]
        for (a1, a2), (b1, b2) in zip(vals, vals[1:]):
            assert b1 >= a1 - 1e-15 and b2 >= a2 - 1e-15

    def test_ratio_ramp_is_linear(self):
        cfg = full_scale()
        e1, e2, e3 = 100.0, 150.0, 200.0
        r1, r2, r3 = (mask_ratio_at(cfg, e) for e in (e1, e2, e3))
        assert r2 == pytest.approx((r1 + r3) / 2, rel=1e-12)

    def test_lr_between_min_and_base(self):
        cfg = full_scale()
        for e in np.linspace(0, 330, 331):
            assert 1e-5 - 1e-12 <= lr_at(cfg, e) <= 5e-4 + 1e-12


class TestValidation:
    def test_rejects_bad_configs(self):
        with pytest.raises(ConfigError):
            ScheduleConfig(total_epochs=0).validate()
        with pytest.raises(ConfigError):
            ScheduleConfig(warmup_epochs=500).validate()
        with pytest.raises(ConfigError):
            ScheduleConfig(cooldown_epochs=-1).validate()
        with pytest.raises(ConfigError):
            ScheduleConfig(mask_ratio_init=1.0).validate()
        with pytest.raises(ConfigError):
            ScheduleConfig(lr_base=0.0).validate()
        with pytest.raises(ConfigError):
            ScheduleConfig(lambda_pixel_init=-1.0).validate()

    def test_run_epochs(self):
        assert full_scale().run_epochs == 330
