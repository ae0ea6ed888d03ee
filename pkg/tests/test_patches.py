"""Patch pipeline: tokenization, positional tables, random masking."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ocmae.errors import ConfigError
from ocmae.patches import patchify, positional_encoding, random_mask, unpatchify
from ocmae.tensor import Tensor


class TestPatchify:
    def test_roundtrip(self):
        rng = np.random.default_rng(0)
        imgs = rng.random((3, 20, 15, 3)).astype(np.float32)
        tokens = patchify(imgs, 5)
        assert tokens.shape == (3, 4 * 3, 75)
        np.testing.assert_array_equal(unpatchify(tokens, 5, 20, 15), imgs)

    def test_token_layout_loop_oracle(self):
        rng = np.random.default_rng(1)
        img = rng.random((1, 4, 6, 2)).astype(np.float32)
        tokens = patchify(img, 2)
        gw = 3
        for gy in range(2):
            for gx in range(3):
                block = img[0, gy * 2:(gy + 1) * 2, gx * 2:(gx + 1) * 2, :]
                np.testing.assert_array_equal(tokens[0, gy * gw + gx],
                                              block.reshape(-1))

    def test_divisibility_checked(self):
        with pytest.raises(ConfigError, match="divisible"):
            patchify(np.zeros((1, 10, 10, 3), dtype=np.float32), 3)


class TestPositionalEncoding:
    def test_shape_and_dtype(self):
        table = positional_encoding(7, 7, 64)
        assert table.shape == (49, 64)
        assert table.dtype == np.float32

    def test_rows_distinct_up_to_64_positions(self):
        for gh, gw, dim in ((7, 7, 64), (8, 8, 32), (1, 64, 16), (4, 3, 8)):
            table = positional_encoding(gh, gw, dim).astype(np.float64)
            dists = np.linalg.norm(table[:, None] - table[None, :], axis=-1)
            dists[np.diag_indices_from(dists)] = np.inf
            assert dists.min() > 1e-4, (gh, gw, dim)

    def test_against_loop_oracle(self):
        # independent recomputation: row/col halves, each [sin | cos] over
        # quarter-width frequencies 1/10000^(i/(dim/4))
        gh, gw, dim = 3, 4, 8
        q = dim // 4
        table = positional_encoding(gh, gw, dim)
        for pos in range(gh * gw):
            row, col = divmod(pos, gw)
            expect = []
            for axis_val in (row, col):
                angles = [axis_val / 10000.0 ** (i / q) for i in range(q)]
                expect.extend(np.sin(angles))
                expect.extend(np.cos(angles))
            np.testing.assert_allclose(table[pos], expect, rtol=1e-5, atol=1e-6)

    def test_dim_divisibility_checked(self):
        with pytest.raises(ConfigError, match="divisible by 4"):
            positional_encoding(2, 2, 6)


class TestRandomMask:
    def tokens(self, b, n, d=4, seed=0):
        return Tensor(np.random.default_rng(seed).random((b, n, d)).astype(np.float32))

    def test_partition_invariant(self):
        state = random_mask(self.tokens(5, 49), 0.75, np.random.default_rng(0))
        for b in range(5):
            both = np.concatenate([state.unmasked_ids[b], state.masked_ids[b]])
            np.testing.assert_array_equal(np.sort(both), np.arange(49))
            assert (np.diff(state.unmasked_ids[b]) > 0).all()
            assert (np.diff(state.masked_ids[b]) > 0).all()

    def test_keep_count_round_half_up(self):
        # 49 * 0.25 = 12.25 -> 12; 49 * 0.5 = 24.5 -> 25 (round half up)
        s = random_mask(self.tokens(1, 49), 0.75, np.random.default_rng(0))
        assert s.unmasked_ids.shape[1] == 12
        s = random_mask(self.tokens(1, 49), 0.5, np.random.default_rng(0))
        assert s.unmasked_ids.shape[1] == 25

    def test_keep_count_clamped_to_one(self):
        s = random_mask(self.tokens(1, 49), 0.995, np.random.default_rng(0))
        assert s.unmasked_ids.shape[1] == 1

    def test_ratio_zero_keeps_all_in_order(self):
        t = self.tokens(2, 12)
        s = random_mask(t, 0.0, np.random.default_rng(3))
        np.testing.assert_array_equal(s.unmasked_ids,
                                      np.tile(np.arange(12), (2, 1)))
        np.testing.assert_array_equal(s.tokens_unmasked.data, t.data)
        assert s.masked_ids.shape == (2, 0)

    def test_gathered_tokens_match_ids(self):
        t = self.tokens(3, 16)
        s = random_mask(t, 0.5, np.random.default_rng(4))
        for b in range(3):
            np.testing.assert_array_equal(s.tokens_unmasked.data[b],
                                          t.data[b][s.unmasked_ids[b]])

    def test_ratio_bounds(self):
        for bad in (-0.1, 1.0, 1.5):
            with pytest.raises(ValueError, match="ratio"):
                random_mask(self.tokens(1, 8), bad, np.random.default_rng(0))

    def test_same_rng_seed_same_mask(self):
        t = self.tokens(4, 20)
        a = random_mask(t, 0.6, np.random.default_rng(7))
        b = random_mask(t, 0.6, np.random.default_rng(7))
        np.testing.assert_array_equal(a.unmasked_ids, b.unmasked_ids)

    def test_mask_frequency_uniform(self):
        # 10k draws at ratio 0.5 over 16 tokens: each index masked 50% +- 2%
        n = 16
        t = Tensor(np.zeros((10000, n, 1), dtype=np.float32))
        s = random_mask(t, 0.5, np.random.default_rng(123))
        counts = np.bincount(s.masked_ids.reshape(-1), minlength=n)
        freq = counts / 10000.0
        assert np.all(np.abs(freq - 0.5) < 0.02), freq

    @settings(max_examples=60, deadline=None)
    @given(st.integers(2, 64), st.integers(1, 6),
           st.floats(0.0, 0.99), st.integers(0, 10_000))
    def test_partition_property(self, n, b, ratio, seed):
        t = Tensor(np.zeros((b, n, 2), dtype=np.float32))
        s = random_mask(t, ratio, np.random.default_rng(seed))
        expect_keep = max(1, int(np.floor(n * (1.0 - ratio) + 0.5)))
        assert s.unmasked_ids.shape == (b, expect_keep)
        for i in range(b):
            both = np.concatenate([s.unmasked_ids[i], s.masked_ids[i]])
            np.testing.assert_array_equal(np.sort(both), np.arange(n))
