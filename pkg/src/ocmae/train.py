"""Training loop: AdamW, per-step schedules, CSV logging, checkpoints.

Determinism contract: every random draw comes from a generator keyed by
(seed, stream tag, epoch[, step]), so a run interrupted at an epoch
boundary and resumed from its checkpoint produces bit-identical parameters
and log rows from that point on. Log rows contain no wall-clock fields;
timing goes to the console logger only.

CSV layout (fixed):

    epoch,loss_total,loss_rec,loss_pixel,loss_object,lr,mask_ratio,
    lambda_pixel,lambda_object,ari,ari_fg,miou

Loss columns are epoch means of the per-step values; the two entropy
columns hold the raw term values (the lambda columns carry the weights).
lr/ratio/lambda are the schedule values at the epoch start; metric cells
are empty except on evaluation epochs. Ablation-disabled loss terms are
logged as exactly 0.
"""

from __future__ import annotations

import logging
import os
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .data import DataSplit, load
from .errors import ConfigError, DataError, NumericalAbort
from .losses import mse_reconstruction, object_entropy, pixel_entropy
from .metrics import (adjusted_rand_index, foreground_adjusted_rand_index,
                      labeling_from_masks, mean_iou)
from .model import ModelConfig, ObjectCentricMAE
from .schedules import ScheduleConfig, schedule_at
from .tensor import Tensor

__all__ = ["AdamW", "AblationFlags", "RunConfig", "FitResult", "train_step",
           "fit", "evaluate", "CSV_HEADER"]

log = logging.getLogger("ocmae.train")

CSV_HEADER = ("epoch,loss_total,loss_rec,loss_pixel,loss_object,"
              "lr,mask_ratio,lambda_pixel,lambda_object,ari,ari_fg,miou")

STREAM_SHUFFLE = 11
STREAM_MASK = 12
STREAM_NOISE = 13

EVAL_BATCH = 64


class AdamW:
    """AdamW with decoupled weight decay scaled by the learning rate.

    The update per parameter is ``p -= lr * (mhat / (sqrt(vhat) + eps)
    + wd * p)``; at lr = 0 parameters are bit-identical afterwards. Decay
    is skipped for the names in ``no_decay`` (class tokens, mask token,
    normalization parameters by default).
    """

    def __init__(self, params: dict[str, Tensor], beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8,
                 weight_decay: float = 0.05,
                 no_decay: frozenset | None = None):
        self.params = dict(params)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.weight_decay = weight_decay
        self.no_decay = default_no_decay(self.params) if no_decay is None else no_decay
        self.m = {n: np.zeros_like(p.data) for n, p in self.params.items()}
        self.v = {n: np.zeros_like(p.data) for n, p in self.params.items()}
        self.t = 0

    def step(self, lr: float):
        self.t += 1
        bias1 = 1.0 - self.beta1 ** self.t
        bias2 = 1.0 - self.beta2 ** self.t
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            m = self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            v = self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * (g * g)
            update = (m / bias1) / (np.sqrt(v / bias2) + self.eps)
            if name not in self.no_decay:
                update = update + self.weight_decay * p.data
            p.data = p.data - np.asarray(lr * update, dtype=p.data.dtype)

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {}
        for name in self.params:
            out[f"opt.m.{name}"] = self.m[name]
            out[f"opt.v.{name}"] = self.v[name]
        return out

    def load_state_arrays(self, arrays: dict[str, np.ndarray], t: int):
        for name in self.params:
            for prefix, store in (("opt.m.", self.m), ("opt.v.", self.v)):
                key = prefix + name
                if key not in arrays:
                    raise DataError(f"checkpoint missing optimizer state {key}")
                if arrays[key].shape != store[name].shape:
                    raise DataError(f"optimizer state {key} has shape "
                                    f"{arrays[key].shape}, expected {store[name].shape}")
                store[name] = arrays[key].astype(store[name].dtype)
        self.t = int(t)


def default_no_decay(params: dict[str, Tensor]) -> frozenset:
    """Parameters excluded from weight decay: class tokens, mask token,
    and all normalization affine parameters."""
    skip = set()
    for name in params:
        leaf = name.rsplit(".", 1)[-1]
        if name in ("class_tokens", "mask_token") or leaf in ("gamma", "beta"):
            skip.add(name)
    return frozenset(skip)


@dataclass
class AblationFlags:
    """Switches that disable individual training ingredients."""

    no_object_entropy: bool = False
    no_pixel_entropy: bool = False
    no_masking: bool = False
    no_class_token_noise: bool = False


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    ablation: AblationFlags = field(default_factory=AblationFlags)
    data_path: str = ""
    out_dir: str = "runs/out"
    batch_size: int = 32
    seed: int = 0
    eval_every: int = 5
    split_fraction: float = 0.9
    stop_after_epoch: int | None = None

    def validate(self):
        self.model.validate()
        self.schedule.validate()
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.eval_every < 1:
            raise ConfigError(f"eval_every must be >= 1, got {self.eval_every}")
        if not self.data_path:
            raise ConfigError("data_path is required")
        return self

    def to_dict(self) -> dict:
        """Config echo for checkpoints.

        Deliberately excludes output plumbing (out_dir, stop_after_epoch):
        those say where and how long a particular process ran, not what is
        being trained, and keeping them out makes the checkpoints of an
        interrupted-and-resumed run byte-identical to an uninterrupted one.
        """
        return {"model": asdict(self.model), "schedule": asdict(self.schedule),
                "ablation": asdict(self.ablation),
                "run": {"data_path": self.data_path,
                        "batch_size": self.batch_size, "seed": self.seed,
                        "eval_every": self.eval_every,
                        "split_fraction": self.split_fraction}}

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        run = d.get("run", {})
        return cls(model=ModelConfig(**d["model"]),
                   schedule=ScheduleConfig(**d["schedule"]),
                   ablation=AblationFlags(**d.get("ablation", {})),
                   **run)


@dataclass
class FitResult:
    model: ObjectCentricMAE
    csv_path: str
    checkpoint_path: str
    final_checkpoint_path: str | None
    rows: list
    final_metrics: dict | None


def train_step(model: ObjectCentricMAE, opt: AdamW, images: np.ndarray,
               sched, mask_rng, noise_rng,
               ablation: AblationFlags) -> dict:
    """One optimization step; returns the detached loss terms.

    Raises:
        NumericalAbort: when the total loss is non-finite.
    """
    model.zero_grad()
    ratio = 0.0 if ablation.no_masking else sched.mask_ratio
    noise_std = model.cfg.cls_noise_std \
        if (sched.in_warmup and not ablation.no_class_token_noise) else 0.0
    scene, _, _ = model.forward(images, ratio, mask_rng,
                                noise_std=noise_std, noise_rng=noise_rng)
    rec = mse_reconstruction(scene.composed, Tensor(images))
    loss = rec
    pix_val = 0.0
    obj_val = 0.0
    if not ablation.no_pixel_entropy:
        pix = pixel_entropy(scene.masks)
        loss = loss + pix * sched.lambda_pixel
        pix_val = pix.item()
    if not ablation.no_object_entropy:
        obj = object_entropy(scene.masks)
        loss = loss + obj * sched.lambda_object
        obj_val = obj.item()
    total = loss.item()
    if not np.isfinite(total):
        raise NumericalAbort(f"non-finite loss {total}")
    loss.backward()
    opt.step(sched.lr)
    return {"loss_total": total, "loss_rec": rec.item(),
            "loss_pixel": pix_val, "loss_object": obj_val}


def evaluate(model: ObjectCentricMAE, split: DataSplit,
             batch_size: int = EVAL_BATCH) -> dict:
    """Segmentation metrics on a split at masking ratio 0, image means."""
    n = len(split)
    if n == 0:
        raise DataError("evaluation split is empty")
    ari_sum = ari_fg_sum = miou_sum = 0.0
    rng = np.random.default_rng(0)          # unused at ratio 0; masking keeps all
    for start in range(0, n, batch_size):
        batch = split.images[start:start + batch_size]
        scene, _, _ = model.forward(batch, 0.0, rng)
        masks = scene.masks.data
        for i in range(batch.shape[0]):
            pred = labeling_from_masks(masks[i]).reshape(-1)
            truth = split.masks[start + i].reshape(-1)
            ari_sum += adjusted_rand_index(truth, pred)
            ari_fg_sum += foreground_adjusted_rand_index(truth, pred)
            miou_sum += mean_iou(truth, pred)
    return {"ari": float(ari_sum / n), "ari_fg": float(ari_fg_sum / n),
            "miou": float(miou_sum / n), "n_images": n}


def _fmt(x: float) -> str:
    return repr(float(x))


def _csv_row(epoch: int, means: dict, sched, metrics: dict | None) -> str:
    cells = [str(epoch), _fmt(means["loss_total"]), _fmt(means["loss_rec"]),
             _fmt(means["loss_pixel"]), _fmt(means["loss_object"]),
             _fmt(sched.lr), _fmt(sched.mask_ratio),
             _fmt(sched.lambda_pixel), _fmt(sched.lambda_object)]
    if metrics is None:
        cells += ["", "", ""]
    else:
        cells += [_fmt(metrics["ari"]), _fmt(metrics["ari_fg"]), _fmt(metrics["miou"])]
    return ",".join(cells)


def _model_state(model: ObjectCentricMAE) -> dict[str, np.ndarray]:
    return {name: p.data for name, p in model.named_parameters().items()}


def _restore_model(model: ObjectCentricMAE, arrays: dict[str, np.ndarray]):
    for name, p in model.named_parameters().items():
        if name not in arrays:
            raise DataError(f"checkpoint missing parameter {name}")
        if arrays[name].shape != p.data.shape:
            raise DataError(f"parameter {name} has shape {arrays[name].shape} "
                            f"in checkpoint, expected {p.data.shape}")
        p.data = arrays[name].astype(p.data.dtype)


def _is_eval_epoch(epoch: int, run: RunConfig) -> bool:
    return epoch % run.eval_every == 0 or epoch == run.schedule.run_epochs - 1


def fit(run: RunConfig, resume_from: str | None = None) -> FitResult:
    """Train a model per the run configuration.

    Writes ``log.csv``, ``checkpoint_last.bin`` (every epoch) and
    ``checkpoint_final.bin`` (after the last scheduled epoch) into
    ``run.out_dir``. With ``resume_from``, training continues after the
    checkpoint's epoch and reproduces exactly the rows an uninterrupted
    run would have written.

    Raises:
        NumericalAbort: re-raised after dumping ``checkpoint_abort.bin``
            with the offending epoch/step/batch indices.
    """
    run.validate()
    os.makedirs(run.out_dir, exist_ok=True)
    train_split, eval_split = load(run.data_path, run.split_fraction)
    if len(train_split) < run.batch_size:
        raise ConfigError(f"batch_size {run.batch_size} exceeds training split "
                          f"of {len(train_split)} images")
    steps_per_epoch = len(train_split) // run.batch_size

    model = ObjectCentricMAE(run.model, seed=run.seed)
    opt = AdamW(model.named_parameters())
    csv_path = os.path.join(run.out_dir, "log.csv")
    last_path = os.path.join(run.out_dir, "checkpoint_last.bin")
    final_path = os.path.join(run.out_dir, "checkpoint_final.bin")

    start_epoch = 0
    rows: list[str] = []
    if resume_from is not None:
        cfg_echo, arrays, meta = load_checkpoint(resume_from)
        _restore_model(model, arrays)
        opt.load_state_arrays(arrays, meta["adam_step"])
        start_epoch = int(meta["epoch"]) + 1
        if os.path.isfile(csv_path):
            with open(csv_path) as fh:
                kept = [line.rstrip("\n") for line in fh][1:]
            rows = [r for r in kept if r and int(r.split(",", 1)[0]) < start_epoch]

    run_epochs = run.schedule.run_epochs
    last_epoch = run_epochs - 1
    if run.stop_after_epoch is not None:
        last_epoch = min(last_epoch, run.stop_after_epoch)

    def write_csv():
        with open(csv_path, "w") as fh:
            fh.write(CSV_HEADER + "\n")
            for r in rows:
                fh.write(r + "\n")

    def dump(path: str, epoch: int, extra: dict | None = None):
        meta = {"epoch": epoch, "adam_step": opt.t, "seed": run.seed,
                "steps_per_epoch": steps_per_epoch}
        if extra:
            meta.update(extra)
        arrays = dict(_model_state(model))
        arrays.update(opt.state_arrays())
        save_checkpoint(path, run.to_dict(), arrays, meta)

    write_csv()
    final_metrics = None
    reached_end = False
    for epoch in range(start_epoch, last_epoch + 1):
        t0 = time.monotonic()
        shuffle_rng = np.random.default_rng((run.seed, STREAM_SHUFFLE, epoch))
        order = shuffle_rng.permutation(len(train_split))
        order = order[:steps_per_epoch * run.batch_size] \
            .reshape(steps_per_epoch, run.batch_size)
        sums = {"loss_total": 0.0, "loss_rec": 0.0,
                "loss_pixel": 0.0, "loss_object": 0.0}
        for step in range(steps_per_epoch):
            sched = schedule_at(run.schedule, epoch + step / steps_per_epoch)
            mask_rng = np.random.default_rng((run.seed, STREAM_MASK, epoch, step))
            noise_rng = np.random.default_rng((run.seed, STREAM_NOISE, epoch, step))
            batch = train_split.images[order[step]]
            try:
                vals = train_step(model, opt, batch, sched, mask_rng, noise_rng,
                                  run.ablation)
            except NumericalAbort as abort:
                dump(os.path.join(run.out_dir, "checkpoint_abort.bin"), epoch,
                     extra={"abort_step": step,
                            "abort_batch_indices": order[step].tolist(),
                            "abort_rng_key": [run.seed, STREAM_MASK, epoch, step]})
                raise NumericalAbort(str(abort), epoch=epoch, step=step,
                                     batch_index=step) from None
            for key in sums:
                sums[key] += vals[key]
        means = {k: v / steps_per_epoch for k, v in sums.items()}

        metrics = None
        if _is_eval_epoch(epoch, run):
            metrics = evaluate(model, eval_split)
            final_metrics = metrics
        rows.append(_csv_row(epoch, means, schedule_at(run.schedule, float(epoch)),
                             metrics))
        write_csv()
        dump(last_path, epoch)
        if epoch == run_epochs - 1:
            reached_end = True
        extra = "" if metrics is None else (f" ari={metrics['ari']:.4f}"
                                            f" ari_fg={metrics['ari_fg']:.4f}"
                                            f" miou={metrics['miou']:.4f}")
        log.info("epoch %d/%d loss=%.6f rec=%.6f (%.1fs)%s", epoch, run_epochs - 1,
                 means["loss_total"], means["loss_rec"],
                 time.monotonic() - t0, extra)

    final_ckpt = None
    if reached_end:
        dump(final_path, run_epochs - 1)
        final_ckpt = final_path
    return FitResult(model=model, csv_path=csv_path, checkpoint_path=last_path,
                     final_checkpoint_path=final_ckpt, rows=rows,
                     final_metrics=final_metrics)


def load_model_for_eval(checkpoint_path: str) -> tuple[ObjectCentricMAE, RunConfig]:
    """Rebuild a model (and its run config) from a checkpoint file."""
    cfg_echo, arrays, _meta = load_checkpoint(checkpoint_path)
    run = RunConfig.from_dict(cfg_echo)
    model = ObjectCentricMAE(run.model, seed=run.seed)
    _restore_model(model, arrays)
    return model, run
