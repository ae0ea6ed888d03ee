"""Training losses: reconstruction plus two entropy regularizers.

The entropy terms both act on the per-slot mixture masks (which sum to 1
over slots at every pixel):

* pixel entropy: mean over pixels of the slot-assignment entropy, pushing
  each pixel toward a single slot;
* object entropy: entropy of the spatially averaged slot masses, kept as a
  penalty against one slot absorbing the whole image.

``0 * log 0`` is treated as 0; implemented by adding 1e-12 inside the log,
which keeps the corner cases exact within 1e-6 and every gradient finite.
Both entropies are bounded by [0, log K] for normalized masks.
"""

from __future__ import annotations

from .tensor import Tensor

__all__ = ["ENTROPY_EPS", "mse_reconstruction", "pixel_entropy", "object_entropy"]

ENTROPY_EPS = 1e-12


def mse_reconstruction(composed: Tensor, target: Tensor) -> Tensor:
    """Mean squared error over every pixel and channel of the batch."""
    diff = composed - target
    return (diff * diff).mean()


def _entropy_last_removed(p: Tensor, axis: int) -> Tensor:
    return -(p * (p + ENTROPY_EPS).log()).sum(axis=axis)


def pixel_entropy(masks: Tensor) -> Tensor:
    """Mean per-pixel entropy of the slot assignment.

    Args:
        masks: (B, K, H, W) mixture weights, summing to 1 over K.
    """
    return _entropy_last_removed(masks, axis=1).mean()


def object_entropy(masks: Tensor) -> Tensor:
    """Entropy of the spatially averaged slot masses, batch mean.

    Args:
        masks: (B, K, H, W) mixture weights, summing to 1 over K.
    """
    mean_mass = masks.mean(axis=(2, 3))           # (B, K), sums to 1 over K
    return _entropy_last_removed(mean_mass, axis=1).mean()
