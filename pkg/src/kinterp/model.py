"""Masked k-space autoencoder with three-plane refinement, losses, checkpoints.

Every (ky, t) point of a 2D+t k-space volume becomes one token whose channels
are the interleaved re/im values along kx.  An encoder sees only the sampled
tokens; a decoder of the same width fills the unsampled positions from a
single shared (zero-initialized) mask token plus fixed sinusoidal position
embeddings and projects back to k-space.  Three sequential refinement blocks
then re-tokenize the estimate along the ky-t, kx-t and (patched) kx-ky planes
and add residual corrections; their output projections start at zero, so at
initialization refinement is the exact identity.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import numcore as nc
from .errors import (
    CheckpointError,
    ConfigError,
    DegenerateInputError,
    DimensionError,
    DomainError,
    PartitionError,
)
from .kspace import DOMAIN_KSPACE, ComplexVolume
from .numcore import Tensor
from .sampling import SamplingMask

PLANE_KY_T = "ky-t"
PLANE_KX_T = "kx-t"
PLANE_KX_KY = "kx-ky"
ALL_PLANES = (PLANE_KY_T, PLANE_KX_T, PLANE_KX_KY)

_INIT_STD = 0.02

_CKPT_MAGIC = b"KGIN"
_CKPT_VERSION = 1
_CKPT_HEAD = struct.Struct("<4sI")
_CKPT_CONFIG = struct.Struct("<9Idd")


@dataclass(frozen=True)
class ModelConfig:
    """Architecture and loss hyperparameters; validated on construction."""

    x_dim: int
    y_dim: int
    t_dim: int
    embed_dim: int = 32
    n_heads: int = 4
    n_layers: int = 2
    mlp_ratio: int = 4
    kirm_patch: int = 4
    kirm_planes: tuple[str, ...] = ALL_PLANES
    loss_weight_hdr: float = 1.0
    hdr_eps: float = 0.5

    def __post_init__(self):
        if min(self.x_dim, self.y_dim, self.t_dim) < 1:
            raise ConfigError("volume extents must be positive")
        if self.embed_dim < 4 or self.embed_dim % 4 != 0:
            raise ConfigError("embed_dim must be a positive multiple of 4")
        if self.n_heads < 1 or self.embed_dim % self.n_heads != 0:
            raise ConfigError(
                f"embed_dim {self.embed_dim} not divisible by n_heads {self.n_heads}"
            )
        if self.n_layers < 1:
            raise ConfigError("n_layers must be at least 1")
        if self.mlp_ratio < 1:
            raise ConfigError("mlp_ratio must be at least 1")
        unknown = set(self.kirm_planes) - set(ALL_PLANES)
        if unknown or len(set(self.kirm_planes)) != len(self.kirm_planes):
            raise ConfigError(f"bad refinement plane list {self.kirm_planes}")
        ordered = tuple(p for p in ALL_PLANES if p in self.kirm_planes)
        object.__setattr__(self, "kirm_planes", ordered)
        if PLANE_KX_KY in self.kirm_planes:
            if self.kirm_patch < 1 or self.x_dim % self.kirm_patch or self.y_dim % self.kirm_patch:
                raise ConfigError(
                    f"patch size {self.kirm_patch} must divide X={self.x_dim} "
                    f"and Y={self.y_dim}"
                )
        if self.hdr_eps <= 0:
            raise ConfigError("hdr_eps must be positive")
        if self.loss_weight_hdr < 0:
            raise ConfigError("loss_weight_hdr cannot be negative")


def tiny_config(x_dim: int, y_dim: int, t_dim: int, **overrides) -> ModelConfig:
    """Desk-scale preset: 32-dim embeddings, 2 layers, 4 heads."""
    base = dict(embed_dim=32, n_heads=4, n_layers=2)
    base.update(overrides)
    return ModelConfig(x_dim, y_dim, t_dim, **base)


def full_config(x_dim: int, y_dim: int, t_dim: int, **overrides) -> ModelConfig:
    """Full-size preset: 512-dim embeddings, 8 layers, 8 heads."""
    base = dict(embed_dim=512, n_heads=8, n_layers=8)
    base.update(overrides)
    return ModelConfig(x_dim, y_dim, t_dim, **base)


@dataclass
class TokenBatch:
    """Tokens plus their integer plane coordinates (one (a, b) pair per row)."""

    tokens: Tensor
    coords: np.ndarray
    plane: str


@dataclass
class ForwardResult:
    """Interpolator output and the three refinement stages (as [T,Y,X,2] tensors)."""

    interpolated: Tensor
    stages: tuple[Tensor, Tensor, Tensor]


def volume_to_array(v: ComplexVolume) -> np.ndarray:
    """Repack an (X, Y, T) complex volume as a real [T, Y, X, 2] array."""
    return np.ascontiguousarray(np.stack([v.re, v.im], axis=-1).transpose(2, 1, 0, 3))


def array_to_volume(arr: np.ndarray, domain: str, scale: float = 1.0) -> ComplexVolume:
    if arr.ndim != 4 or arr.shape[-1] != 2:
        raise DimensionError("expected a [T, Y, X, 2] array")
    re = np.ascontiguousarray(arr[..., 0].transpose(2, 1, 0), dtype=np.float64)
    im = np.ascontiguousarray(arr[..., 1].transpose(2, 1, 0), dtype=np.float64)
    return ComplexVolume(re, im, domain, scale)


# Wavelength ceiling of the sinusoidal tables.  The classic 10000 suits
# thousand-token sequences; on desk-scale grids (tens of positions) it would
# leave most frequency channels near-constant, so keep it proportionate.
POS_EMBED_BASE = 256.0


def _sincos_table(n_positions: int, dim: int) -> np.ndarray:
    half = dim // 2
    freqs = 1.0 / (POS_EMBED_BASE ** (np.arange(half) / half))
    args = np.outer(np.arange(n_positions), freqs)
    return np.concatenate([np.sin(args), np.cos(args)], axis=1)


def _plane_pos_table(n_inner: int, n_outer: int, dim: int) -> np.ndarray:
    """Fixed embeddings for a plane flattened with the first coordinate innermost."""
    inner = _sincos_table(n_inner, dim // 2)
    outer = _sincos_table(n_outer, dim // 2)
    return np.concatenate(
        [np.tile(inner, (n_outer, 1)), np.repeat(outer, n_inner, axis=0)], axis=1
    )


class KSpaceInterpolator:
    """The full interpolation model: tokenizer, encoder/decoder, refinement."""

    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        self.params: dict[str, Tensor] = {}
        self.attention_records: list[np.ndarray] | None = None
        self._rng = np.random.default_rng(seed)
        c = config
        # Normalized k-space entries are O(1/sqrt(XY)) away from the center;
        # lift them so projected features and position codes share magnitude.
        self._token_scale = float(math.sqrt(c.x_dim * c.y_dim))
        self._pos_tables = {
            PLANE_KY_T: _plane_pos_table(c.y_dim, c.t_dim, c.embed_dim),
            PLANE_KX_T: _plane_pos_table(c.x_dim, c.t_dim, c.embed_dim),
        }
        if PLANE_KX_KY in c.kirm_planes:
            self._pos_tables[PLANE_KX_KY] = _plane_pos_table(
                c.x_dim // c.kirm_patch, c.y_dim // c.kirm_patch, c.embed_dim
            )
        d = c.embed_dim
        chan = self.plane_channels(PLANE_KY_T)
        self._param("kgin.proj_in.w", self._draw((chan, d)))
        self._param("kgin.proj_in.b", np.zeros(d))
        self._param("kgin.mask_token", np.zeros(d))
        self._stack_params("kgin.enc")
        self._stack_params("kgin.dec")
        self._param("kgin.proj_out.w", self._draw((d, chan)))
        self._param("kgin.proj_out.b", np.zeros(chan))
        for plane in c.kirm_planes:
            chan = self.plane_channels(plane)
            prefix = f"kirm.{plane}"
            self._param(f"{prefix}.proj_in.w", self._draw((chan, d)))
            self._param(f"{prefix}.proj_in.b", np.zeros(d))
            self._stack_params(prefix)
            self._param(f"{prefix}.proj_out.w", np.zeros((d, chan)))
            self._param(f"{prefix}.proj_out.b", np.zeros(chan))

    def _draw(self, shape: tuple[int, ...]) -> np.ndarray:
        draw = self._rng.normal(0.0, _INIT_STD, size=shape)
        return np.clip(draw, -2 * _INIT_STD, 2 * _INIT_STD)

    def _param(self, name: str, value: np.ndarray) -> Tensor:
        t = Tensor(value, requires_grad=True, name=name)
        self.params[name] = t
        return t

    def _stack_params(self, prefix: str) -> None:
        d = self.config.embed_dim
        hidden = d * self.config.mlp_ratio
        for i in range(self.config.n_layers):
            base = f"{prefix}.{i}"
            for ln in ("ln1", "ln2"):
                self._param(f"{base}.{ln}.gain", np.ones(d))
                self._param(f"{base}.{ln}.bias", np.zeros(d))
            for proj in ("wq", "wk", "wv", "wo"):
                self._param(f"{base}.attn.{proj}", self._draw((d, d)))
            for bias in ("bq", "bk", "bv", "bo"):
                self._param(f"{base}.attn.{bias}", np.zeros(d))
            self._param(f"{base}.mlp.w1", self._draw((d, hidden)))
            self._param(f"{base}.mlp.b1", np.zeros(hidden))
            self._param(f"{base}.mlp.w2", self._draw((hidden, d)))
            self._param(f"{base}.mlp.b2", np.zeros(d))
        self._param(f"{prefix}.norm.gain", np.ones(d))
        self._param(f"{prefix}.norm.bias", np.zeros(d))

    # ---- introspection -------------------------------------------------

    def parameters(self) -> list[tuple[str, Tensor]]:
        return list(self.params.items())

    def zero_grads(self) -> None:
        for p in self.params.values():
            p.grad = None

    def record_attention(self, enabled: bool) -> None:
        self.attention_records = [] if enabled else None

    def position_table(self, plane: str) -> np.ndarray:
        return self._pos_tables[plane].copy()

    def plane_channels(self, plane: str) -> int:
        c = self.config
        if plane == PLANE_KY_T:
            return 2 * c.x_dim
        if plane == PLANE_KX_T:
            return 2 * c.y_dim
        if plane == PLANE_KX_KY:
            return 2 * c.kirm_patch**2 * c.t_dim
        raise ConfigError(f"unknown plane {plane!r}")

    def plane_coords(self, plane: str) -> np.ndarray:
        c = self.config
        if plane == PLANE_KY_T:
            inner, outer = c.y_dim, c.t_dim
        elif plane == PLANE_KX_T:
            inner, outer = c.x_dim, c.t_dim
        else:
            inner, outer = c.x_dim // c.kirm_patch, c.y_dim // c.kirm_patch
        n = np.arange(inner * outer)
        return np.stack([n % inner, n // inner], axis=1)

    # ---- transformer plumbing ------------------------------------------

    def _attention(self, h: Tensor, base: str) -> Tensor:
        p = self.params
        n, d = h.shape
        heads = self.config.n_heads
        dh = d // heads

        def split(x):
            return nc.transpose(nc.reshape(x, (n, heads, dh)), (1, 0, 2))

        q = split(h @ p[f"{base}.attn.wq"] + p[f"{base}.attn.bq"])
        k = split(h @ p[f"{base}.attn.wk"] + p[f"{base}.attn.bk"])
        v = split(h @ p[f"{base}.attn.wv"] + p[f"{base}.attn.bv"])
        scores = (q @ nc.transpose(k, (0, 2, 1))) * (1.0 / np.sqrt(dh))
        attn = nc.softmax_lastaxis(scores)
        if self.attention_records is not None:
            self.attention_records.append(attn.data.copy())
        out = nc.reshape(nc.transpose(attn @ v, (1, 0, 2)), (n, d))
        return out @ p[f"{base}.attn.wo"] + p[f"{base}.attn.bo"]

    def _stack(self, x: Tensor, prefix: str) -> Tensor:
        p = self.params
        for i in range(self.config.n_layers):
            base = f"{prefix}.{i}"
            h = nc.layernorm(x, p[f"{base}.ln1.gain"], p[f"{base}.ln1.bias"])
            x = x + self._attention(h, base)
            h = nc.layernorm(x, p[f"{base}.ln2.gain"], p[f"{base}.ln2.bias"])
            u = nc.gelu(h @ p[f"{base}.mlp.w1"] + p[f"{base}.mlp.b1"])
            x = x + (u @ p[f"{base}.mlp.w2"] + p[f"{base}.mlp.b2"])
        return nc.layernorm(x, p[f"{prefix}.norm.gain"], p[f"{prefix}.norm.bias"])

    # ---- tokenization ---------------------------------------------------

    def _check_volume(self, v: ComplexVolume) -> None:
        c = self.config
        if (v.x_dim, v.y_dim, v.t_dim) != (c.x_dim, c.y_dim, c.t_dim):
            raise DimensionError(
                f"volume ({v.x_dim}, {v.y_dim}, {v.t_dim}) does not match the "
                f"configured ({c.x_dim}, {c.y_dim}, {c.t_dim})"
            )

    def _plane_raw(self, y: Tensor, plane: str) -> Tensor:
        c = self.config
        x_d, y_d, t_d, p = c.x_dim, c.y_dim, c.t_dim, c.kirm_patch
        if plane == PLANE_KY_T:
            return nc.reshape(y, (t_d * y_d, x_d * 2))
        if plane == PLANE_KX_T:
            return nc.reshape(nc.transpose(y, (0, 2, 1, 3)), (t_d * x_d, y_d * 2))
        tiles = nc.reshape(
            nc.transpose(y, (1, 2, 0, 3)), (y_d // p, p, x_d // p, p, t_d, 2)
        )
        tiles = nc.transpose(tiles, (0, 2, 1, 3, 4, 5))
        return nc.reshape(tiles, ((y_d // p) * (x_d // p), p * p * t_d * 2))

    def _plane_restore(self, tokens: Tensor, plane: str) -> Tensor:
        c = self.config
        x_d, y_d, t_d, p = c.x_dim, c.y_dim, c.t_dim, c.kirm_patch
        if plane == PLANE_KY_T:
            return nc.reshape(tokens, (t_d, y_d, x_d, 2))
        if plane == PLANE_KX_T:
            return nc.transpose(nc.reshape(tokens, (t_d, x_d, y_d, 2)), (0, 2, 1, 3))
        tiles = nc.reshape(tokens, (y_d // p, x_d // p, p, p, t_d, 2))
        tiles = nc.transpose(tiles, (0, 2, 1, 3, 4, 5))
        return nc.transpose(nc.reshape(tiles, (y_d, x_d, t_d, 2)), (2, 0, 1, 3))

    def tokenize_kyt(self, k: ComplexVolume) -> TokenBatch:
        """Project each (ky, t) line onto an embedding and add its position code."""
        if k.domain != DOMAIN_KSPACE:
            raise DomainError("tokenization expects a k-space volume")
        self._check_volume(k)
        raw = Tensor(volume_to_array(k).reshape(-1, self.plane_channels(PLANE_KY_T)))
        tokens = (raw * self._token_scale) @ self.params["kgin.proj_in.w"]
        tokens = tokens + self.params["kgin.proj_in.b"]
        tokens = tokens + Tensor(self._pos_tables[PLANE_KY_T])
        return TokenBatch(tokens, self.plane_coords(PLANE_KY_T), PLANE_KY_T)

    def split_by_mask(
        self, batch: TokenBatch, mask: SamplingMask
    ) -> tuple[TokenBatch, np.ndarray]:
        """Restrict a full ky-t batch to sampled tokens; also return the rest."""
        c = self.config
        if (mask.y_dim, mask.t_dim) != (c.y_dim, c.t_dim):
            raise DimensionError("mask extents do not match the model configuration")
        flags = mask.bits.T.reshape(-1).astype(bool)
        sampled_idx = np.flatnonzero(flags)
        unsampled_idx = np.flatnonzero(~flags)
        sampled = TokenBatch(
            nc.take_rows(batch.tokens, sampled_idx),
            batch.coords[sampled_idx],
            batch.plane,
        )
        return sampled, batch.coords[unsampled_idx]

    # ---- the interpolation network --------------------------------------

    def encode(self, sampled: TokenBatch) -> TokenBatch:
        if sampled.tokens.shape[0] == 0:
            raise DegenerateInputError("encoder needs at least one sampled token")
        feats = self._stack(sampled.tokens, "kgin.enc")
        return TokenBatch(feats, sampled.coords, sampled.plane)

    def decode(self, feats: TokenBatch, unsampled_coords: np.ndarray) -> Tensor:
        """Fill unsampled positions with the mask token and decode to k-space."""
        c = self.config
        n_grid = c.y_dim * c.t_dim
        sampled_n = feats.coords[:, 1] * c.y_dim + feats.coords[:, 0]
        unsampled_n = unsampled_coords[:, 1] * c.y_dim + unsampled_coords[:, 0]
        combined = np.concatenate([sampled_n, unsampled_n])
        if (
            len(combined) != n_grid
            or len(np.unique(combined)) != n_grid
            or combined.min() < 0
            or combined.max() >= n_grid
        ):
            raise PartitionError("sampled and unsampled coords must partition the grid")
        pos = self._pos_tables[PLANE_KY_T]
        mask_rows = nc.take_rows(
            nc.reshape(self.params["kgin.mask_token"], (1, c.embed_dim)),
            np.zeros(len(unsampled_n), dtype=np.intp),
        )
        mask_rows = mask_rows + Tensor(pos[unsampled_n])
        order = np.empty(n_grid, dtype=np.intp)
        order[sampled_n] = np.arange(len(sampled_n))
        order[unsampled_n] = len(sampled_n) + np.arange(len(unsampled_n))
        seq = nc.take_rows(nc.concat_rows([feats.tokens, mask_rows]), order)
        seq = self._stack(seq, "kgin.dec")
        out = seq @ self.params["kgin.proj_out.w"] + self.params["kgin.proj_out.b"]
        return self._plane_restore(out, PLANE_KY_T)

    def refine(self, interpolated: Tensor) -> tuple[Tensor, Tensor, Tensor]:
        """Apply the three residual refinement blocks (disabled planes: identity)."""
        current = interpolated
        stages = []
        for plane in ALL_PLANES:
            if plane in self.config.kirm_planes:
                prefix = f"kirm.{plane}"
                tokens = self._plane_raw(current, plane) * self._token_scale
                tokens = tokens @ self.params[f"{prefix}.proj_in.w"]
                tokens = tokens + self.params[f"{prefix}.proj_in.b"]
                tokens = tokens + Tensor(self._pos_tables[plane])
                feats = self._stack(tokens, prefix)
                res = feats @ self.params[f"{prefix}.proj_out.w"]
                res = res + self.params[f"{prefix}.proj_out.b"]
                current = current + self._plane_restore(res, plane)
            stages.append(current)
        return stages[0], stages[1], stages[2]

    def forward(self, masked: ComplexVolume, mask: SamplingMask) -> ForwardResult:
        """Tokenize -> encode sampled -> decode all -> refine."""
        batch = self.tokenize_kyt(masked)
        sampled, unsampled_coords = self.split_by_mask(batch, mask)
        feats = self.encode(sampled)
        interpolated = self.decode(feats, unsampled_coords)
        return ForwardResult(interpolated, self.refine(interpolated))


# ---- losses --------------------------------------------------------------


def _coerce_target(target) -> Tensor:
    if isinstance(target, Tensor):
        return target
    return Tensor(np.asarray(target))


def l1_loss(pred: Tensor, target) -> Tensor:
    """Mean absolute error over every real scalar."""
    return nc.mean_all(nc.abs_(pred - _coerce_target(target)))


def hdr_loss(
    stages,
    target,
    eps: float,
    denominators: list[np.ndarray] | None = None,
) -> Tensor:
    """Sum over stages of mean squared relative error.

    The denominator |stage| + eps is a frozen constant (no gradient flows
    through it); pass ``denominators`` to reuse values captured earlier, e.g.
    for finite-difference checks.
    """
    if eps <= 0:
        raise ValueError("hdr eps must be positive")
    target_t = _coerce_target(target)
    total = None
    for i, stage in enumerate(stages):
        if denominators is not None:
            denom = denominators[i]
        else:
            denom = np.abs(stage.data) + eps
        ratio = (stage - target_t) * (1.0 / denom)
        term = nc.mean_all(ratio * ratio)
        total = term if total is None else total + term
    if total is None:
        raise DimensionError("hdr_loss needs at least one stage")
    return total


def hdr_denominators(stages, eps: float) -> list[np.ndarray]:
    """The frozen per-stage denominators used by :func:`hdr_loss`."""
    return [np.abs(stage.data) + eps for stage in stages]


def total_loss(
    result: ForwardResult,
    target,
    weight: float,
    eps: float,
    denominators: list[np.ndarray] | None = None,
) -> tuple[Tensor, Tensor, Tensor]:
    """Interpolation l1 plus ``weight`` times the refinement HDR term."""
    l1 = l1_loss(result.interpolated, target)
    hdr = hdr_loss(result.stages, target, eps, denominators)
    if weight == 0.0:
        return l1, l1, hdr
    return l1 + weight * hdr, l1, hdr


# ---- checkpoints -----------------------------------------------------------


def _planes_bitmask(planes: tuple[str, ...]) -> int:
    return sum(1 << i for i, p in enumerate(ALL_PLANES) if p in planes)


def _planes_from_bitmask(mask: int) -> tuple[str, ...]:
    return tuple(p for i, p in enumerate(ALL_PLANES) if mask & (1 << i))


def save_params(model: KSpaceInterpolator, path: str | Path) -> None:
    """Write config plus all named tensors (float32 payloads) to ``path``."""
    c = model.config
    chunks = [
        _CKPT_HEAD.pack(_CKPT_MAGIC, _CKPT_VERSION),
        _CKPT_CONFIG.pack(
            c.x_dim,
            c.y_dim,
            c.t_dim,
            c.embed_dim,
            c.n_heads,
            c.n_layers,
            c.mlp_ratio,
            c.kirm_patch,
            _planes_bitmask(c.kirm_planes),
            c.loss_weight_hdr,
            c.hdr_eps,
        ),
        struct.pack("<I", len(model.params)),
    ]
    for name, tensor in model.params.items():
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<I", tensor.data.ndim))
        chunks.append(struct.pack(f"<{tensor.data.ndim}I", *tensor.data.shape))
        chunks.append(tensor.data.astype("<f4").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_params(path: str | Path) -> tuple[ModelConfig, dict[str, np.ndarray]]:
    """Parse a checkpoint; malformed content raises :class:`CheckpointError`."""
    path = Path(path)
    blob = path.read_bytes()

    class _Reader:
        def __init__(self, buf):
            self.buf = buf
            self.at = 0

        def take(self, n: int) -> bytes:
            if self.at + n > len(self.buf):
                raise CheckpointError(f"{path}: truncated checkpoint")
            out = self.buf[self.at : self.at + n]
            self.at += n
            return out

    r = _Reader(blob)
    magic, version = _CKPT_HEAD.unpack(r.take(_CKPT_HEAD.size))
    if magic != _CKPT_MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}")
    if version != _CKPT_VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    fields = _CKPT_CONFIG.unpack(r.take(_CKPT_CONFIG.size))
    try:
        config = ModelConfig(
            x_dim=fields[0],
            y_dim=fields[1],
            t_dim=fields[2],
            embed_dim=fields[3],
            n_heads=fields[4],
            n_layers=fields[5],
            mlp_ratio=fields[6],
            kirm_patch=fields[7],
            kirm_planes=_planes_from_bitmask(fields[8]),
            loss_weight_hdr=fields[9],
            hdr_eps=fields[10],
        )
    except ConfigError as exc:
        raise CheckpointError(f"{path}: invalid embedded config: {exc}") from exc
    (count,) = struct.unpack("<I", r.take(4))
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<I", r.take(4))
        name = r.take(name_len).decode("utf-8")
        (rank,) = struct.unpack("<I", r.take(4))
        shape = struct.unpack(f"<{rank}I", r.take(4 * rank))
        n_values = int(np.prod(shape)) if rank else 1
        payload = r.take(4 * n_values)
        tensors[name] = np.frombuffer(payload, dtype="<f4").reshape(shape).copy()
    if r.at != len(blob):
        raise CheckpointError(f"{path}: trailing bytes after tensor table")
    return config, tensors


def load_into(model: KSpaceInterpolator, path: str | Path) -> None:
    """Load tensors into an existing model; configs must match exactly."""
    config, tensors = load_params(path)
    if config != model.config:
        raise CheckpointError(
            f"checkpoint config {config} does not match model config {model.config}"
        )
    if set(tensors) != set(model.params):
        raise CheckpointError("checkpoint tensor names do not match the model")
    for name, arr in tensors.items():
        target = model.params[name]
        if arr.shape != target.data.shape:
            raise CheckpointError(f"checkpoint tensor {name} has shape {arr.shape}")
        target.data = np.ascontiguousarray(arr.astype(nc.active_dtype()))


def from_checkpoint(path: str | Path) -> KSpaceInterpolator:
    """Construct a model from a checkpoint file."""
    config, _ = load_params(path)
    model = KSpaceInterpolator(config, seed=0)
    load_into(model, path)
    return model
