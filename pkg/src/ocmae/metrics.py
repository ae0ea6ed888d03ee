"""Segmentation quality metrics.

All metrics compare a predicted labeling against a ground-truth labeling
of the same pixels. ARI is computed from the contingency table in closed
form; the foreground variant drops every pixel whose ground-truth label is
background (label 0) before comparing. mIoU matches predicted segments to
truth segments with the Hungarian algorithm on IoU and averages over truth
segments (background included), counting unmatched truth segments as 0.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .tensor import Tensor

__all__ = ["adjusted_rand_index", "foreground_adjusted_rand_index",
           "mean_iou", "hungarian_match", "labeling_from_masks"]


def labeling_from_masks(masks) -> np.ndarray:
    """Hard labels from mixture masks: argmax over slots per pixel.

    Args:
        masks: (K, H, W) array or Tensor of mixture weights.

    Returns:
        (H, W) int labels in 0..K-1; ties go to the lowest slot index.
    """
    arr = masks.data if isinstance(masks, Tensor) else np.asarray(masks)
    return np.argmax(arr, axis=0).astype(np.int64)


def _contingency(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Dense contingency table between two int labelings, minlength-safe."""
    a_ids, a_inv = np.unique(a, return_inverse=True)
    b_ids, b_inv = np.unique(b, return_inverse=True)
    table = np.zeros((a_ids.size, b_ids.size), dtype=np.int64)
    np.add.at(table, (a_inv, b_inv), 1)
    return table


def _comb2(x: np.ndarray) -> np.ndarray:
    return x * (x - 1) // 2


def adjusted_rand_index(truth: np.ndarray, pred: np.ndarray) -> float:
    """Adjusted Rand index between two labelings of the same pixels.

    Invariant under any relabeling of either side. Degenerate comparisons
    where the expected and maximum index coincide (both labelings a single
    cluster, or both all singletons) return 1.0 by convention.
    """
    truth = np.asarray(truth).reshape(-1)
    pred = np.asarray(pred).reshape(-1)
    if truth.shape != pred.shape:
        raise ValueError(f"labelings differ in length: {truth.shape} vs {pred.shape}")
    n = truth.size
    if n == 0:
        raise ValueError("empty labelings")
    table = _contingency(truth, pred)
    sum_comb = _comb2(table).sum()
    a = _comb2(table.sum(axis=1)).sum()
    b = _comb2(table.sum(axis=0)).sum()
    total = _comb2(np.int64(n))
    if total == 0:
        return 1.0
    expected = a * b / total
    max_index = (a + b) / 2.0
    if max_index == expected:
        return 1.0
    return float((sum_comb - expected) / (max_index - expected))


def foreground_adjusted_rand_index(truth: np.ndarray, pred: np.ndarray,
                                   background: int = 0) -> float:
    """ARI restricted to pixels whose ground-truth label is not background.

    Returns 1.0 when the image has no foreground pixels (nothing to get
    wrong).
    """
    truth = np.asarray(truth).reshape(-1)
    pred = np.asarray(pred).reshape(-1)
    keep = truth != background
    if not keep.any():
        return 1.0
    return adjusted_rand_index(truth[keep], pred[keep])


def hungarian_match(iou: np.ndarray) -> list[tuple[int, int]]:
    """Max-total-IoU one-to-one matching between truth rows and pred columns.

    Args:
        iou: (n_truth, n_pred) pairwise IoU matrix.

    Returns:
        list of (truth_index, pred_index) pairs; min(n_truth, n_pred) pairs.
    """
    rows, cols = linear_sum_assignment(-np.asarray(iou, dtype=np.float64))
    return list(zip(rows.tolist(), cols.tolist()))


def mean_iou(truth: np.ndarray, pred: np.ndarray) -> float:
    """Truth-side mean IoU under the optimal segment matching.

    Every ground-truth segment (background included) contributes its IoU
    with its matched predicted segment, or 0 when there are fewer predicted
    segments than truth segments. The mean is over truth segments.
    """
    truth = np.asarray(truth).reshape(-1)
    pred = np.asarray(pred).reshape(-1)
    if truth.shape != pred.shape:
        raise ValueError(f"labelings differ in length: {truth.shape} vs {pred.shape}")
    t_ids = np.unique(truth)
    p_ids = np.unique(pred)
    table = _contingency(truth, pred).astype(np.float64)
    t_sizes = table.sum(axis=1)
    p_sizes = table.sum(axis=0)
    union = t_sizes[:, None] + p_sizes[None, :] - table
    iou = np.where(union > 0, table / np.maximum(union, 1.0), 0.0)
    matched = dict(hungarian_match(iou))
    total = 0.0
    for ti in range(t_ids.size):
        pi = matched.get(ti)
        total += float(iou[ti, pi]) if pi is not None else 0.0
    return total / t_ids.size
