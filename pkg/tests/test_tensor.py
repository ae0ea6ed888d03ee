"""Autodiff core: forward semantics vs numpy, gradients vs finite differences."""

import numpy as np
import pytest

from ocmae import tensor as T
from ocmae.gradcheck import grad_check
from ocmae.tensor import Tensor


def leaf(rng, *shape):
    return Tensor(rng.standard_normal(shape), requires_grad=True)


class TestTensorBasics:
    def test_element_count_matches_shape(self):
        t = Tensor(np.zeros((3, 4, 5)))
        assert t.size == 60 == int(np.prod(t.shape))

    def test_default_dtype_is_float32(self):
        assert Tensor([1, 2, 3]).dtype == np.float32
        assert Tensor(np.zeros(3, dtype=np.int64)).dtype == np.float32

    def test_float64_preserved_through_ops(self):
        a = Tensor(np.ones((2, 2), dtype=np.float64), requires_grad=True)
        out = T.mul(T.add(a, a), a).sum()
        assert out.dtype == np.float64
        out.backward()
        assert a.grad.dtype == np.float64

    def test_grad_shape_matches_data_shape(self):
        rng = np.random.default_rng(0)
        a = leaf(rng, 3, 4)
        b = leaf(rng, 4)
        out = (a * 2.0 + b).sum()
        out.backward()
        assert a.grad.shape == a.shape
        assert b.grad.shape == b.shape

    def test_backward_requires_scalar(self):
        a = leaf(np.random.default_rng(0), 2, 2)
        with pytest.raises(ValueError):
            (a * 1.0).backward()

    def test_detach_blocks_gradient(self):
        a = leaf(np.random.default_rng(0), 3)
        out = (a.detach() * 2.0).sum()
        assert not out.requires_grad

    def test_grad_accumulates_across_uses(self):
        a = Tensor(np.array([2.0]), requires_grad=True)
        out = (a * 3.0 + a * 5.0).sum()
        out.backward()
        np.testing.assert_allclose(a.grad, [8.0])


class TestForwardSemantics:
    """Each op against the plain-numpy computation."""

    def setup_method(self):
        self.rng = np.random.default_rng(42)

    def test_add_mul_broadcast(self):
        a = self.rng.standard_normal((2, 3, 4))
        b = self.rng.standard_normal((4,))
        np.testing.assert_allclose(T.add(Tensor(a), Tensor(b)).data, a + b, rtol=1e-6)
        np.testing.assert_allclose(T.mul(Tensor(a), Tensor(b)).data, a * b, rtol=1e-6)

    def test_matmul_batched(self):
        a = self.rng.standard_normal((2, 3, 4, 5))
        b = self.rng.standard_normal((2, 3, 5, 6))
        np.testing.assert_allclose(T.matmul(Tensor(a), Tensor(b)).data, a @ b, rtol=1e-5)

    def test_matmul_rejects_vectors(self):
        with pytest.raises(ValueError):
            T.matmul(Tensor(np.zeros(3)), Tensor(np.zeros((3, 2))))

    def test_reductions(self):
        a = self.rng.standard_normal((3, 4, 5))
        t = Tensor(a)
        np.testing.assert_allclose(t.sum(axis=1).data, a.sum(axis=1), rtol=1e-5)
        np.testing.assert_allclose(t.mean(axis=(0, 2)).data, a.mean(axis=(0, 2)), rtol=1e-5)
        np.testing.assert_allclose(t.sum().data, a.sum(), rtol=1e-5)

    def test_shape_ops(self):
        a = self.rng.standard_normal((2, 3, 4))
        t = Tensor(a)
        np.testing.assert_array_equal(t.reshape(6, 4).data, a.reshape(6, 4))
        np.testing.assert_array_equal(t.transpose(2, 0, 1).data, a.transpose(2, 0, 1))
        np.testing.assert_array_equal(t[1, :, 2:].data, a[1, :, 2:])
        np.testing.assert_array_equal(
            T.broadcast_to(Tensor(a[:, :1, :]), (2, 3, 4)).data,
            np.broadcast_to(a[:, :1, :], (2, 3, 4)))

    def test_concat(self):
        parts = [self.rng.standard_normal((2, k, 3)) for k in (1, 2, 3)]
        out = T.concat([Tensor(p) for p in parts], axis=1)
        np.testing.assert_array_equal(out.data, np.concatenate(parts, axis=1))

    def test_gather_rows_loop_oracle(self):
        x = self.rng.standard_normal((3, 7, 4))
        ids = np.stack([self.rng.permutation(7)[:5] for _ in range(3)])
        out = T.gather_rows(Tensor(x), ids).data
        for r in range(3):
            for m in range(5):
                np.testing.assert_array_equal(out[r, m], x[r, ids[r, m]])

    def test_scatter_rows_loop_oracle(self):
        vals = self.rng.standard_normal((2, 3, 4))
        fill = self.rng.standard_normal(4)
        ids = np.array([[0, 2, 5], [1, 3, 4]])
        out = T.scatter_rows(Tensor(vals), ids, Tensor(fill), 6).data
        for r in range(2):
            for pos in range(6):
                hits = np.where(ids[r] == pos)[0]
                expect = vals[r, hits[0]] if hits.size else fill
                np.testing.assert_array_equal(out[r, pos], expect)


class TestGradients:
    """Finite-difference checks for every op, float64 graphs."""

    def check(self, f, shape, seed=0, tol=1e-6):
        rng = np.random.default_rng(seed)
        p = Tensor(rng.standard_normal(shape).astype(np.float64), requires_grad=True)
        report = grad_check(f, p, step=1e-5, tol=tol)
        assert report.passed, f"max rel err {report.max_rel_error} at {report.worst_coord}"

    def test_add_broadcast_grad(self):
        rng = np.random.default_rng(1)
        other = Tensor(rng.standard_normal((3, 1, 4)))
        w = Tensor(rng.standard_normal((3, 5, 4)))
        self.check(lambda p: (T.mul(T.add(p, other), w)).sum(), (4,))

    def test_mul_grad(self):
        other = Tensor(np.random.default_rng(2).standard_normal((2, 3)))
        self.check(lambda p: T.mul(p, other).sum(), (2, 3))

    def test_div_and_pow_grad(self):
        self.check(lambda p: (p / 3.0 + T.power(p, 2.0)).sum(), (5,))

    def test_matmul_grad_both_sides(self):
        rng = np.random.default_rng(3)
        b = Tensor(rng.standard_normal((4, 2)).astype(np.float64), requires_grad=True)
        w = Tensor(rng.standard_normal((3, 2)))
        self.check(lambda p: T.mul(T.matmul(p, b), w).sum(), (3, 4))
        a = Tensor(rng.standard_normal((3, 4)))
        self.check(lambda p: T.mul(T.matmul(a, p), w).sum(), (4, 2))

    def test_matmul_grad_broadcast_weight(self):
        rng = np.random.default_rng(4)
        x = Tensor(rng.standard_normal((2, 3, 4)))
        w = Tensor(rng.standard_normal((2, 3, 5)))
        self.check(lambda p: T.mul(T.matmul(x, p), w).sum(), (4, 5))

    def test_exp_log_grad(self):
        rng = np.random.default_rng(5)
        p = Tensor(rng.uniform(0.5, 2.0, size=(3, 3)).astype(np.float64), requires_grad=True)
        report = grad_check(lambda q: (T.log(q) + T.exp(q)).sum(), p, step=1e-6, tol=1e-6)
        assert report.passed

    def test_reduction_grads(self):
        w = Tensor(np.random.default_rng(6).standard_normal((3, 1, 5)))
        self.check(lambda p: T.mul(p.sum(axis=1, keepdims=True), w).sum(), (3, 4, 5))
        self.check(lambda p: T.mul(p.mean(axis=(0, 2)), Tensor(np.arange(4.0))).sum(), (3, 4, 5))

    def test_shape_op_grads(self):
        w = Tensor(np.random.default_rng(7).standard_normal((4, 6)))
        self.check(lambda p: T.mul(p.transpose(2, 0, 1).reshape(4, 6), w).sum(), (2, 3, 4))
        w2 = Tensor(np.random.default_rng(8).standard_normal((2, 3)))
        self.check(lambda p: T.mul(p[1:3, ::2], w2).sum(), (4, 5))

    def test_concat_grad(self):
        rng = np.random.default_rng(9)
        other = Tensor(rng.standard_normal((2, 3)).astype(np.float64), requires_grad=True)
        w = Tensor(rng.standard_normal((2, 5)))
        self.check(lambda p: T.mul(T.concat([p, other], axis=1), w).sum(), (2, 2))

    def test_broadcast_to_grad(self):
        w = Tensor(np.random.default_rng(10).standard_normal((4, 3, 2)))
        self.check(lambda p: T.mul(T.broadcast_to(p, (4, 3, 2)), w).sum(), (1, 3, 1))

    def test_gather_rows_grad(self):
        ids = np.array([[0, 3, 1], [2, 4, 0]])
        w = Tensor(np.random.default_rng(11).standard_normal((2, 3, 4)))
        self.check(lambda p: T.mul(T.gather_rows(p, ids), w).sum(), (2, 5, 4))

    def test_scatter_rows_values_grad(self):
        ids = np.array([[0, 2], [1, 3]])
        fill = Tensor(np.random.default_rng(12).standard_normal(3))
        w = Tensor(np.random.default_rng(13).standard_normal((2, 4, 3)))
        self.check(lambda p: T.mul(T.scatter_rows(p, ids, fill, 4), w).sum(), (2, 2, 3))

    def test_scatter_rows_fill_grad(self):
        ids = np.array([[0, 2], [1, 3]])
        vals = Tensor(np.random.default_rng(14).standard_normal((2, 2, 3)))
        w = Tensor(np.random.default_rng(15).standard_normal((2, 4, 3)))
        self.check(lambda p: T.mul(T.scatter_rows(vals, ids, p, 4), w).sum(), (3,))
