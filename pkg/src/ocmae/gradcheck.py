"""Finite-difference verification of reverse-mode gradients.

``grad_check`` compares the analytic gradient of a scalar function against
central finite differences, coordinate by coordinate, and reports the worst
relative error. Checks are most reliable on float64 graphs; every op in this
package keeps the dtype of its inputs, so casting the leaf tensors to
float64 is enough.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .tensor import Tensor

__all__ = ["GradCheckReport", "grad_check"]


@dataclass
class GradCheckReport:
    """Outcome of one gradient check.

    Attributes:
        passed: True when every checked coordinate is within tolerance and
            all values were finite.
        max_rel_error: worst relative error over the checked coordinates.
        worst_coord: multi-index of that coordinate (None if nothing ran).
        checked: number of coordinates compared.
        failure: human-readable description of a non-finite value, naming
            the offending coordinate; None when all values were finite.
    """

    passed: bool
    max_rel_error: float
    worst_coord: tuple | None
    checked: int
    failure: str | None = None


def grad_check(f: Callable[[Tensor], Tensor], point: Tensor, *,
               step: float = 1e-3, tol: float = 1e-3,
               coords: int | None = None,
               rng: np.random.Generator | None = None) -> GradCheckReport:
    """Compare reverse-mode gradients of ``f`` at ``point`` against central
    finite differences.

    Args:
        f: maps the point tensor to a scalar Tensor; re-evaluated many times,
            so it must be pure in ``point.data``.
        point: leaf tensor with ``requires_grad=True``; its data is perturbed
            in place during the check and restored afterwards.
        step: finite-difference half-step.
        tol: pass threshold on the max relative error.
        coords: if given, check only this many randomly chosen coordinates
            (needed for large points where 2 evaluations per coordinate is
            too slow); None checks all of them.
        rng: source for the coordinate subsample.

    Returns:
        GradCheckReport; non-finite analytic or numeric values fail the check
        with a message naming the coordinate.

    The relative error per coordinate is |a - n| / max(|a|, |n|, 1e-3), which
    keeps near-zero gradients from blowing up the ratio.
    """
    point.grad = None
    out = f(point)
    if out.data.size != 1:
        raise ValueError(f"grad_check needs a scalar function, got shape {out.shape}")
    if not np.isfinite(out.data).all():
        return GradCheckReport(False, np.inf, None, 0,
                               failure="non-finite forward value")
    out.backward()
    if point.grad is None:
        analytic = np.zeros_like(point.data)
    else:
        analytic = np.array(point.grad, copy=True)

    flat = point.data.reshape(-1)
    n = flat.size
    if coords is None or coords >= n:
        index_list = np.arange(n)
    else:
        gen = rng if rng is not None else np.random.default_rng(0)
        index_list = gen.choice(n, size=coords, replace=False)

    analytic_flat = analytic.reshape(-1)
    max_err = 0.0
    worst = None
    for i in index_list:
        a = float(analytic_flat[i])
        coord = np.unravel_index(int(i), point.shape)
        if not np.isfinite(a):
            return GradCheckReport(False, np.inf, coord, 0,
                                   failure=f"non-finite analytic gradient at {coord}")
        orig = float(flat[i])
        flat[i] = orig + step
        plus = float(f(point).data.reshape(-1)[0])
        flat[i] = orig - step
        minus = float(f(point).data.reshape(-1)[0])
        flat[i] = orig
        if not (np.isfinite(plus) and np.isfinite(minus)):
            return GradCheckReport(False, np.inf, coord, 0,
                                   failure=f"non-finite finite-difference value at {coord}")
        numeric = (plus - minus) / (2.0 * step)
        err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-3)
        if err > max_err:
            max_err = err
            worst = coord
    return GradCheckReport(max_err <= tol, max_err, worst, len(index_list))
