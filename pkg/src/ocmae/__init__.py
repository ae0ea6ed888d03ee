"""Unsupervised multi-object segmentation with a masked autoencoder.

A ViT-style masked autoencoder whose decoder is forced through a small set
of slot vectors; per-slot reconstructions compete through a pixelwise
mixture, and the mixture masks are the segmentation. Pure numpy, including
the autodiff engine.
"""

from .data import SceneSpec, generate, load, render_sample
from .metrics import (adjusted_rand_index, foreground_adjusted_rand_index,
                      labeling_from_masks, mean_iou)
from .model import DecodedScene, ModelConfig, ObjectCentricMAE, SlotState
from .schedules import ScheduleConfig
from .train import AblationFlags, RunConfig, evaluate, fit

__version__ = "0.1.0"

__all__ = [
    "SceneSpec", "generate", "load", "render_sample",
    "adjusted_rand_index", "foreground_adjusted_rand_index",
    "labeling_from_masks", "mean_iou",
    "ModelConfig", "ObjectCentricMAE", "SlotState", "DecodedScene",
    "ScheduleConfig", "AblationFlags", "RunConfig", "evaluate", "fit",
    "__version__",
]
