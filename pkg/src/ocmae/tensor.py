"""Dense float tensors with reverse-mode automatic differentiation.

The whole training stack runs on numpy arrays wrapped in :class:`Tensor`
nodes. Every operation records its parents and a backward closure; calling
``backward()`` on a scalar output walks the recorded graph once in reverse
topological order and accumulates gradients into ``.grad``.

Conventions:

* arrays are float32 by default; every op keeps the dtype of its inputs, so
  gradient checks can run whole graphs in float64,
* forward values are treated as immutable once created -- mutating ``.data``
  of an intermediate node invalidates the recorded closures,
* ``.grad`` is ``None`` until ``backward()`` reaches the node, then an array
  of exactly the node's shape,
* gradients are never updated in place (closures always allocate), so shared
  upstream grads cannot alias each other.

Token-level gather/scatter (used for masking and for re-inserting mask
tokens at their original positions) are first-class ops here because their
backward passes must route gradients through per-row index maps.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor",
    "add", "mul", "matmul", "concat", "broadcast_to",
    "gather_rows", "scatter_rows",
]


class Tensor:
    """A dense float array plus the bookkeeping for reverse-mode autodiff.

    The element count always equals the product of the shape extents (dense,
    no strides tricks are exposed), and after ``backward()`` the ``grad``
    array of every reached node has exactly the node's shape.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data)
        if arr.dtype.kind != "f":
            arr = arr.astype(np.float32)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    # -- basic introspection -------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else self._item_err()

    def _item_err(self):
        raise ValueError(f"item() on non-scalar tensor of shape {self.shape}")

    def detach(self) -> "Tensor":
        """Same data, no graph connection, no gradient tracking."""
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}, grad={self.requires_grad})"

    # -- autodiff ------------------------------------------------------------

    def backward(self, grad=None):
        """Accumulate gradients of this scalar into every reachable parent."""
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without an explicit gradient "
                                 f"needs a scalar output, got shape {self.shape}")
            grad = np.ones_like(self.data)
        else:
            grad = np.asarray(grad, dtype=self.data.dtype)

        # Iterative post-order walk; graphs can be a few hundred nodes deep.
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen and p.requires_grad:
                    stack.append((p, False))

        _accum(self, grad)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- operator sugar --------------------------------------------------------

    def __add__(self, other):
        return add(self, _wrap(other, self))

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, mul(_wrap(other, self), -1.0))

    def __rsub__(self, other):
        return add(_wrap(other, self), mul(self, -1.0))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return mul(self, power(other, -1.0))
        return mul(self, 1.0 / float(other))

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 and isinstance(shape[0], (tuple, list)) else shape)

    def transpose(self, *axes):
        return transpose(self, axes[0] if len(axes) == 1 and isinstance(axes[0], (tuple, list)) else axes)

    def sum(self, axis=None, keepdims: bool = False):
        return reduce_sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        return reduce_mean(self, axis, keepdims)

    def exp(self):
        return exp(self)

    def log(self):
        return log(self)


# -- graph plumbing ----------------------------------------------------------


def _result(data: np.ndarray, parents: tuple, backward) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    req = any(p.requires_grad for p in parents)
    out.requires_grad = req
    out._parents = parents if req else ()
    out._backward = backward if req else None
    return out


def _accum(t: Tensor, g: np.ndarray):
    if not t.requires_grad:
        return
    t.grad = g if t.grad is None else t.grad + g


def _wrap(x, like: Tensor) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=like.data.dtype))


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient down to the shape the operand had before broadcasting."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# -- elementwise and linear-algebra ops ---------------------------------------


def add(a: Tensor, b) -> Tensor:
    b = _wrap(b, a)
    data = a.data + b.data

    def backward(g):
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, _unbroadcast(g, b.shape))

    return _result(data, (a, b), backward)


def mul(a: Tensor, b) -> Tensor:
    b = _wrap(b, a)
    data = a.data * b.data

    def backward(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(g * a.data, b.shape))

    return _result(data, (a, b), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError(f"matmul needs >=2-d operands, got {a.shape} @ {b.shape}")
    data = np.matmul(a.data, b.data)

    def backward(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape))

    return _result(data, (a, b), backward)


def power(a: Tensor, p: float) -> Tensor:
    data = a.data ** p

    def backward(g):
        _accum(a, g * (p * a.data ** (p - 1.0)))

    return _result(data, (a,), backward)


def exp(a: Tensor) -> Tensor:
    data = np.exp(a.data)

    def backward(g):
        _accum(a, g * data)

    return _result(data, (a,), backward)


def log(a: Tensor) -> Tensor:
    data = np.log(a.data)

    def backward(g):
        _accum(a, g / a.data)

    return _result(data, (a,), backward)


# -- shape ops -----------------------------------------------------------------


def reshape(a: Tensor, shape) -> Tensor:
    orig = a.shape
    data = a.data.reshape(shape)

    def backward(g):
        _accum(a, g.reshape(orig))

    return _result(data, (a,), backward)


def transpose(a: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    inv = tuple(int(i) for i in np.argsort(axes))
    data = a.data.transpose(axes)

    def backward(g):
        _accum(a, g.transpose(inv))

    return _result(data, (a,), backward)


def broadcast_to(a: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    data = np.broadcast_to(a.data, shape)

    def backward(g):
        _accum(a, _unbroadcast(g, a.shape))

    return _result(data, (a,), backward)


def reduce_sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    data = a.data.sum(axis=axis, keepdims=keepdims)
    norm_axis = _normalize_axis(axis, a.ndim)

    def backward(g):
        _accum(a, _expand_like(g, a.shape, norm_axis, keepdims))

    return _result(data, (a,), backward)


def reduce_mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    data = a.data.mean(axis=axis, keepdims=keepdims)
    norm_axis = _normalize_axis(axis, a.ndim)
    count = a.data.size if axis is None else int(np.prod([a.shape[i] for i in norm_axis]))

    def backward(g):
        _accum(a, _expand_like(g, a.shape, norm_axis, keepdims) / count)

    return _result(data, (a,), backward)


def _normalize_axis(axis, ndim: int) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(ax % ndim for ax in axis)


def _expand_like(g: np.ndarray, shape, axes, keepdims: bool) -> np.ndarray:
    if not keepdims:
        for ax in sorted(axes):
            g = np.expand_dims(g, ax)
    return np.broadcast_to(g, shape).copy()


def getitem(a: Tensor, idx) -> Tensor:
    """Basic indexing only (ints, slices, tuples thereof); grads scatter back."""
    data = a.data[idx]

    def backward(g):
        ga = np.zeros_like(a.data)
        ga[idx] = g
        _accum(a, ga)

    return _result(data, (a,), backward)


def concat(parts: list[Tensor], axis: int) -> Tensor:
    data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.shape[axis] for p in parts]

    def backward(g):
        offset = 0
        for p, n in zip(parts, sizes):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(offset, offset + n)
            _accum(p, g[tuple(sl)].copy())
            offset += n

    return _result(data, tuple(parts), backward)


# -- token gather / scatter ----------------------------------------------------


def gather_rows(x: Tensor, ids: np.ndarray) -> Tensor:
    """Select tokens per row: ``out[r, m] = x[r, ids[r, m]]``.

    Args:
        x: (R, N, D) token sequences.
        ids: (R, M) int indices into the N axis, unique within each row.

    Returns:
        (R, M, D) gathered tokens; gradients scatter back to the source rows.
    """
    rows = np.arange(x.shape[0])[:, None]
    data = x.data[rows, ids]

    def backward(g):
        gx = np.zeros_like(x.data)
        np.add.at(gx, (rows, ids), g)
        _accum(x, gx)

    return _result(data, (x,), backward)


def scatter_rows(values: Tensor, ids: np.ndarray, fill: Tensor, n_total: int) -> Tensor:
    """Place tokens back at their original positions, filling the rest.

    Args:
        values: (R, M, D) tokens to place.
        ids: (R, M) destination indices, unique within each row.
        fill: (D,) token written at every position not covered by ``ids``.
        n_total: output sequence length N.

    Returns:
        (R, N, D) sequences; ``out[r, ids[r, m]] = values[r, m]`` and every
        other position holds ``fill``. Gradients flow to both inputs.
    """
    r, m, d = values.shape
    rows = np.arange(r)[:, None]
    data = np.broadcast_to(fill.data, (r, n_total, d)).copy()
    data[rows, ids] = values.data

    def backward(g):
        if values.requires_grad:
            _accum(values, g[rows, ids].copy())
        if fill.requires_grad:
            taken = g[rows, ids].sum(axis=(0, 1))
            _accum(fill, g.sum(axis=(0, 1)) - taken)

    return _result(data, (values, fill), backward)
