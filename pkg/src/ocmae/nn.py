"""Neural-net building blocks on top of the autodiff tensors.

Fused forward/backward implementations for the hot ops (linear, softmax,
layernorm, gelu, attention) plus a minimal ``Module`` base that collects
named parameters in declaration order. No dropout anywhere; the model this
package trains does not use it.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

from .errors import ConfigError
from .tensor import Tensor, _accum, _result

__all__ = [
    "Module", "LinearLayer", "LayerNorm", "MultiHeadAttention",
    "TransformerBlock", "linear", "softmax", "layernorm", "gelu",
    "xavier_uniform",
]

LAYERNORM_EPS = 1e-6
# plain Python floats: np.float64 scalars would silently promote float32
# activations to float64 under NEP 50
_INV_SQRT2 = float(1.0 / np.sqrt(2.0))
_INV_SQRT2PI = float(1.0 / np.sqrt(2.0 * np.pi))


# -- fused functional ops ------------------------------------------------------


def linear(x: Tensor, weight: Tensor, bias: Tensor | None) -> Tensor:
    """``x @ weight + bias`` over the last axis.

    Args:
        x: (..., D_in).
        weight: (D_in, D_out).
        bias: (D_out,) or None.

    Raises:
        ValueError: naming both shapes when the inner dimensions differ.
    """
    if x.shape[-1] != weight.shape[0]:
        raise ValueError(f"linear: input shape {x.shape} incompatible with "
                         f"weight shape {weight.shape}")
    if bias is not None and bias.shape != (weight.shape[1],):
        raise ValueError(f"linear: bias shape {bias.shape} incompatible with "
                         f"weight shape {weight.shape}")
    data = np.matmul(x.data, weight.data)
    if bias is not None:
        data = data + bias.data
    d_in, d_out = weight.shape

    def backward(g):
        if x.requires_grad:
            _accum(x, np.matmul(g, weight.data.T))
        if weight.requires_grad:
            _accum(weight, np.matmul(x.data.reshape(-1, d_in).T, g.reshape(-1, d_out)))
        if bias is not None and bias.requires_grad:
            _accum(bias, g.reshape(-1, d_out).sum(axis=0))

    parents = (x, weight) if bias is None else (x, weight, bias)
    return _result(data, parents, backward)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Numerically stable softmax along ``axis`` (max-subtracted)."""
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        inner = (g * out).sum(axis=axis, keepdims=True)
        _accum(x, out * (g - inner))

    return _result(out, (x,), backward)


def layernorm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = LAYERNORM_EPS) -> Tensor:
    """Layer normalization over the last axis with affine parameters.

    A constant input vector normalizes to zeros before the affine map (the
    eps keeps the division finite).
    """
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gamma.data + beta.data

    def backward(g):
        if gamma.requires_grad:
            _accum(gamma, (g * xhat).reshape(-1, x.shape[-1]).sum(axis=0))
        if beta.requires_grad:
            _accum(beta, g.reshape(-1, x.shape[-1]).sum(axis=0))
        if x.requires_grad:
            gx = g * gamma.data
            term = gx - gx.mean(axis=-1, keepdims=True) \
                - xhat * (gx * xhat).mean(axis=-1, keepdims=True)
            _accum(x, inv * term)

    return _result(out, (x, gamma, beta), backward)


def gelu(x: Tensor) -> Tensor:
    """Exact-erf GELU: ``x * Phi(x)`` with the standard normal CDF."""
    cdf = 0.5 * (1.0 + erf(x.data * _INV_SQRT2))

    def backward(g):
        pdf = _INV_SQRT2PI * np.exp(-0.5 * x.data * x.data)
        _accum(x, g * (cdf + x.data * pdf))

    return _result(x.data * cdf, (x,), backward)


# -- parameter containers --------------------------------------------------------


class Module:
    """Base class whose subclasses expose parameters via attributes.

    ``named_parameters`` walks attributes in declaration order, recursing
    into sub-modules and lists of sub-modules, so the name->tensor map is
    stable across runs (checkpoints rely on this).
    """

    def named_parameters(self, prefix: str = "") -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for name, val in vars(self).items():
            if isinstance(val, Tensor) and val.requires_grad:
                out[prefix + name] = val
            elif isinstance(val, Module):
                out.update(val.named_parameters(f"{prefix}{name}."))
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        out.update(item.named_parameters(f"{prefix}{name}.{i}."))
        return out

    def zero_grad(self):
        for p in self.named_parameters().values():
            p.grad = None


def xavier_uniform(rng: np.random.Generator, d_in: int, d_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (d_in + d_out))
    return rng.uniform(-limit, limit, size=(d_in, d_out)).astype(np.float32)


class LinearLayer(Module):
    """Affine map with xavier-uniform weight and zero bias."""

    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator):
        self.weight = Tensor(xavier_uniform(rng, d_in, d_out), requires_grad=True)
        self.bias = Tensor(np.zeros(d_out, dtype=np.float32), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return linear(x, self.weight, self.bias)


class LayerNorm(Module):
    def __init__(self, dim: int):
        self.gamma = Tensor(np.ones(dim, dtype=np.float32), requires_grad=True)
        self.beta = Tensor(np.zeros(dim, dtype=np.float32), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return layernorm(x, self.gamma, self.beta)


class MultiHeadAttention(Module):
    """Standard multi-head self-attention with a fused qkv projection.

    Scores are scaled by 1/sqrt(head_dim); softmax over the key axis.
    """

    def __init__(self, dim: int, heads: int, rng: np.random.Generator):
        if dim % heads != 0:
            raise ConfigError(f"attention dim {dim} not divisible by heads {heads}")
        self.heads = heads
        self.qkv = LinearLayer(dim, 3 * dim, rng)
        self.proj = LinearLayer(dim, dim, rng)

    def __call__(self, x: Tensor) -> Tensor:
        b, n, d = x.shape
        h = self.heads
        dh = d // h
        qkv = self.qkv(x).reshape(b, n, 3, h, dh).transpose(2, 0, 3, 1, 4)
        q, k, v = qkv[0], qkv[1], qkv[2]          # each (b, h, n, dh)
        scores = (q @ k.transpose(0, 1, 3, 2)) * float(1.0 / np.sqrt(dh))
        attn = softmax(scores, axis=-1)
        ctx = (attn @ v).transpose(0, 2, 1, 3).reshape(b, n, d)
        return self.proj(ctx)


class TransformerBlock(Module):
    """Pre-norm block: ``x + attn(ln(x))`` then ``x + mlp(ln(x))``.

    The MLP hidden width is 4x with exact-erf GELU. With zero-initialized
    output projections the block is the identity (residual path only).
    """

    def __init__(self, dim: int, heads: int, rng: np.random.Generator):
        self.ln1 = LayerNorm(dim)
        self.attn = MultiHeadAttention(dim, heads, rng)
        self.ln2 = LayerNorm(dim)
        self.fc1 = LinearLayer(dim, 4 * dim, rng)
        self.fc2 = LinearLayer(4 * dim, dim, rng)

    def __call__(self, x: Tensor) -> Tensor:
        x = x + self.attn(self.ln1(x))
        return x + self.fc2(gelu(self.fc1(self.ln2(x))))
