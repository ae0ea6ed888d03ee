"""Object-centric masked autoencoder.

Pipeline per batch:

1. patchify + linear embed + fixed positional encodings,
2. random masking (a schedule-driven fraction of tokens is dropped),
3. ViT encoder over [K class tokens | unmasked patch tokens],
4. slot pooling: dot-product scores between encoded patches and encoded
   class tokens, softmax over slots per patch, column-normalized weights,
   weighted sum of patch embeddings -> one vector per slot,
5. slot broadcast: each slot vector is repeated per unmasked position,
   concatenated with the log of its attention scalar, linearly embedded
   into decoder width; a shared learnable mask token fills the masked
   positions; fixed decoder positional encodings are added,
6. a shallow ViT decoder (shared weights) decodes each slot's sequence
   independently; a linear head emits P*P*C rgb values and P*P alpha
   logits per token,
7. alpha logits compete in a softmax over slots per pixel; the composed
   image is the mask-weighted sum of the per-slot rgb canvases.

The log-attention scalar in step 5 stays inside the autodiff graph, so
gradient flows from the reconstruction back into the slot assignment.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .errors import ConfigError
from .nn import LayerNorm, LinearLayer, Module, TransformerBlock, softmax
from .patches import PatchState, patchify, positional_encoding, random_mask
from .tensor import Tensor, broadcast_to, concat, power, scatter_rows

__all__ = ["ModelConfig", "SlotState", "DecodedScene", "ObjectCentricMAE",
           "init_class_tokens"]

MAX_PATCHES = 64


@dataclass
class ModelConfig:
    """Architecture hyperparameters.

    ``num_slots`` should be the maximum object count plus one, so the
    background has a slot of its own.
    """

    num_slots: int = 4
    enc_dim: int = 64
    dec_dim: int = 32
    enc_depth: int = 4
    dec_depth: int = 2
    enc_heads: int = 4
    dec_heads: int = 4
    patch_size: int = 5
    height: int = 35
    width: int = 35
    channels: int = 3
    cls_init_std: float = 0.002
    cls_noise_std: float = 0.1
    pool_epsilon: float = 1e-8
    log_epsilon: float = 1e-12

    def validate(self):
        if self.num_slots < 2:
            raise ConfigError(f"num_slots must be >= 2, got {self.num_slots}")
        if self.height % self.patch_size or self.width % self.patch_size:
            raise ConfigError(f"image {self.height}x{self.width} not divisible by "
                              f"patch size {self.patch_size}")
        if self.n_patches > MAX_PATCHES:
            raise ConfigError(f"{self.n_patches} patches exceeds the supported "
                              f"maximum of {MAX_PATCHES}")
        for dim, heads, tag in ((self.enc_dim, self.enc_heads, "enc"),
                                (self.dec_dim, self.dec_heads, "dec")):
            if dim % heads:
                raise ConfigError(f"{tag}_dim {dim} not divisible by {tag}_heads {heads}")
            if dim % 4:
                raise ConfigError(f"{tag}_dim {dim} must be divisible by 4 "
                                  f"(positional encoding layout)")
        for name in ("enc_depth", "dec_depth", "channels", "patch_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.pool_epsilon <= 0 or self.log_epsilon <= 0:
            raise ConfigError("pool_epsilon and log_epsilon must be > 0")
        return self

    @property
    def grid(self) -> tuple[int, int]:
        return self.height // self.patch_size, self.width // self.patch_size

    @property
    def n_patches(self) -> int:
        gh, gw = self.grid
        return gh * gw

    @property
    def patch_dim(self) -> int:
        return self.patch_size * self.patch_size * self.channels

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SlotState:
    """Slot pooling outcome.

    Invariants: ``attn`` rows sum to 1 over slots; ``weights`` columns sum
    to 1 over patches whenever the column's attention mass is well above
    the pooling epsilon.

    Attributes:
        slots: (B, K, D_enc) pooled slot vectors.
        attn: (B, M, K) patch-to-slot assignment, softmax over K.
        weights: (B, M, K) column-normalized pooling weights.
    """

    slots: Tensor
    attn: Tensor
    weights: Tensor


@dataclass
class DecodedScene:
    """Per-slot reconstructions and their mixture.

    Invariants: ``masks`` sums to 1 over slots at every pixel; ``composed``
    equals the mask-weighted sum of ``per_slot_rgb``.

    Attributes:
        per_slot_rgb: (B, K, H, W, C) unbounded rgb canvases.
        alpha_logits: (B, K, H, W) pre-softmax mixture logits.
        masks: (B, K, H, W) softmax of the alpha logits over K.
        composed: (B, H, W, C) mixture reconstruction.
    """

    per_slot_rgb: Tensor
    alpha_logits: Tensor
    masks: Tensor
    composed: Tensor


def init_class_tokens(num_slots: int, dim: int, std: float,
                      rng: np.random.Generator) -> Tensor:
    """K learnable query tokens, zero-mean normal with small std.

    The small scale keeps initial slot assignments near-uniform, so slots
    specialize through training rather than through the initial draw.
    """
    return Tensor(rng.normal(0.0, std, size=(num_slots, dim)).astype(np.float32),
                  requires_grad=True)


_INIT_STREAM = 17


class ObjectCentricMAE(Module):
    """See the module docstring for the end-to-end dataflow."""

    def __init__(self, cfg: ModelConfig, seed: int = 0):
        cfg.validate()
        self.cfg = cfg
        rng = np.random.default_rng((seed, _INIT_STREAM))
        d, dd = cfg.enc_dim, cfg.dec_dim
        self.patch_embed = LinearLayer(cfg.patch_dim, d, rng)
        self.class_tokens = init_class_tokens(cfg.num_slots, d, cfg.cls_init_std, rng)
        self.enc_blocks = [TransformerBlock(d, cfg.enc_heads, rng)
                           for _ in range(cfg.enc_depth)]
        self.enc_norm = LayerNorm(d)
        self.slot_embed = LinearLayer(d + 1, dd, rng)
        self.mask_token = Tensor(rng.normal(0.0, 0.02, size=dd).astype(np.float32),
                                 requires_grad=True)
        self.dec_blocks = [TransformerBlock(dd, cfg.dec_heads, rng)
                           for _ in range(cfg.dec_depth)]
        self.dec_norm = LayerNorm(dd)
        self.head = LinearLayer(dd, cfg.patch_size ** 2 * (cfg.channels + 1), rng)
        gh, gw = cfg.grid
        self._enc_pos = Tensor(positional_encoding(gh, gw, d))
        self._dec_pos = Tensor(positional_encoding(gh, gw, dd))

    # -- pipeline stages ---------------------------------------------------

    def embed(self, images: np.ndarray) -> Tensor:
        """(B, H, W, C) images -> (B, N, D_enc) position-tagged patch tokens."""
        tokens = Tensor(patchify(np.asarray(images, dtype=np.float32),
                                 self.cfg.patch_size))
        return self.patch_embed(tokens) + self._enc_pos

    def encode(self, state: PatchState,
               cls_noise: np.ndarray | None = None) -> tuple[Tensor, Tensor]:
        """Run the encoder over [class tokens | unmasked patch tokens].

        Args:
            state: masking outcome; only its visible tokens are encoded.
            cls_noise: optional (K, D_enc) perturbation added to the class
                tokens before concatenation (warmup regularization).

        Returns:
            (B, K, D_enc) encoded class tokens and (B, M, D_enc) encoded
            patch tokens, both past the final layernorm. Token order is
            preserved: patch outputs stay aligned with ``unmasked_ids``.
        """
        k = self.cfg.num_slots
        cls = self.class_tokens
        if cls_noise is not None:
            cls = cls + Tensor(cls_noise.astype(cls.data.dtype))
        b = state.tokens_unmasked.shape[0]
        cls_batch = broadcast_to(cls.reshape(1, k, self.cfg.enc_dim),
                                 (b, k, self.cfg.enc_dim))
        x = concat([cls_batch, state.tokens_unmasked], axis=1)
        for block in self.enc_blocks:
            x = block(x)
        x = self.enc_norm(x)
        return x[:, :k], x[:, k:]

    def object_function(self, cls_out: Tensor, patch_out: Tensor) -> SlotState:
        """Pool encoded patches into slots via dot-product assignment.

        Scores between each patch and each class token are scaled by
        1/sqrt(D_enc) and softmaxed over slots, so every patch distributes
        its mass across slots. Columns are then normalized (epsilon-guarded)
        so each slot is a convex combination of patch embeddings.
        """
        d = self.cfg.enc_dim
        scores = (patch_out @ cls_out.transpose(0, 2, 1)) * float(1.0 / np.sqrt(d))
        attn = softmax(scores, axis=-1)                       # (B, M, K)
        col_mass = attn.sum(axis=1, keepdims=True)            # (B, 1, K)
        weights = attn * power(col_mass + self.cfg.pool_epsilon, -1.0)
        slots = weights.transpose(0, 2, 1) @ patch_out        # (B, K, D)
        return SlotState(slots=slots, attn=attn, weights=weights)

    def broadcast_slots(self, slot_state: SlotState, state: PatchState) -> Tensor:
        """Expand slots into per-slot decoder sequences of full length N.

        Each slot vector is repeated once per visible position and
        concatenated with the log of that position's attention scalar (the
        log stays differentiable, tying decoding strength to assignment).
        After the linear embed to decoder width, the shared mask token
        fills every masked position, original patch order is restored, and
        fixed decoder positional encodings are added.

        Returns:
            (B * K, N, D_dec), slots of one batch item adjacent.
        """
        cfg = self.cfg
        b, m = state.unmasked_ids.shape
        k, d = cfg.num_slots, cfg.enc_dim
        slots_rep = broadcast_to(slot_state.slots.reshape(b, k, 1, d), (b, k, m, d))
        log_attn = (slot_state.attn + cfg.log_epsilon).log() \
            .transpose(0, 2, 1).reshape(b, k, m, 1)
        x = concat([slots_rep, log_attn], axis=3)             # (B, K, M, D+1)
        x = self.slot_embed(x).reshape(b * k, m, cfg.dec_dim)
        ids = np.repeat(state.unmasked_ids, k, axis=0)        # rows match reshape order
        full = scatter_rows(x, ids, self.mask_token, state.n_total)
        return full + self._dec_pos

    def decode(self, dec_tokens: Tensor, batch_size: int) -> DecodedScene:
        """Decode every slot sequence and compose the mixture."""
        cfg = self.cfg
        b, k, p, c = batch_size, cfg.num_slots, cfg.patch_size, cfg.channels
        gh, gw = cfg.grid
        x = dec_tokens
        for block in self.dec_blocks:
            x = block(x)
        x = self.dec_norm(x)
        out = self.head(x)                                    # (B*K, N, P*P*(C+1))
        rgb_flat = out[:, :, :p * p * c]
        alpha_flat = out[:, :, p * p * c:]
        rgb = rgb_flat.reshape(b, k, gh, gw, p, p, c) \
            .transpose(0, 1, 2, 4, 3, 5, 6).reshape(b, k, cfg.height, cfg.width, c)
        alpha = alpha_flat.reshape(b, k, gh, gw, p, p) \
            .transpose(0, 1, 2, 4, 3, 5).reshape(b, k, cfg.height, cfg.width)
        masks = softmax(alpha, axis=1)
        composed = (masks.reshape(b, k, cfg.height, cfg.width, 1) * rgb).sum(axis=1)
        return DecodedScene(per_slot_rgb=rgb, alpha_logits=alpha,
                            masks=masks, composed=composed)

    # -- end to end ----------------------------------------------------------

    def forward(self, images: np.ndarray, mask_ratio: float,
                mask_rng: np.random.Generator,
                noise_std: float = 0.0,
                noise_rng: np.random.Generator | None = None
                ) -> tuple[DecodedScene, SlotState, PatchState]:
        """Full pass: embed, mask, encode, pool, broadcast, decode."""
        tokens = self.embed(images)
        state = random_mask(tokens, mask_ratio, mask_rng)
        cls_noise = None
        if noise_std > 0.0:
            gen = noise_rng if noise_rng is not None else mask_rng
            cls_noise = gen.normal(0.0, noise_std,
                                   size=(self.cfg.num_slots, self.cfg.enc_dim))
        cls_out, patch_out = self.encode(state, cls_noise)
        slot_state = self.object_function(cls_out, patch_out)
        dec_in = self.broadcast_slots(slot_state, state)
        scene = self.decode(dec_in, images.shape[0])
        return scene, slot_state, state
