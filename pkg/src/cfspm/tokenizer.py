"""Patch tokenizer: multi-scale temporal filtering to embedded token sequences.

Turns a preprocessed trial ``(C, T)`` — or a batch ``(B, C, T)`` — into a
sequence of ``L`` embedded tokens of width ``D``:

1. per-branch depthwise temporal convolution (one branch per kernel size,
   ``temporal_filters`` filters each, same-padding),
2. concatenation of all branches along the filter axis,
3. a learned spatial combination across channels per filter map, then ELU,
4. average pooling with a sliding window to ``L`` patch frames,
5. a linear patch projection to the embedding width,
6. scaling by ``sqrt(D)`` and addition of a fixed sinusoidal positional code.

All learnable pieces live in a flat name->Tensor dict so the optimizer and
checkpoint code can treat every model the same way.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .numeric import Tensor, apply_primitive, avgpool1d, conv1d_depthwise, elu


def truncated_normal(rng: np.random.Generator, shape: tuple[int, ...],
                     std: float) -> np.ndarray:
    """Normal(0, std) samples redrawn until they land within two std devs."""
    out = rng.normal(0.0, std, size=shape)
    while True:
        bad = np.abs(out) > 2.0 * std
        if not bad.any():
            return out
        out[bad] = rng.normal(0.0, std, size=int(bad.sum()))


@dataclass(frozen=True)
class TokenizerConfig:
    """Static shape/hyperparameter description of the tokenizer stage."""

    channels: int
    samples: int
    embed_dim: int = 30
    temporal_filters: int = 8
    kernel_sizes: tuple[int, ...] = (63, 15)
    pool_window: int = 25
    pool_stride: int = 15
    activation: str = "elu"  # "identity" is a test hook for linearity checks

    def validate(self) -> None:
        if self.channels < 2:
            raise ValueError(f"channels must be >= 2, got {self.channels}")
        if self.samples < self.pool_window:
            raise ValueError(
                f"samples ({self.samples}) shorter than pool window "
                f"({self.pool_window})")
        if self.embed_dim < 2:
            raise ValueError(f"embed_dim must be >= 2, got {self.embed_dim}")
        if self.temporal_filters < 1:
            raise ValueError("temporal_filters must be >= 1")
        if not self.kernel_sizes:
            raise ValueError("at least one temporal branch is required")
        for k in self.kernel_sizes:
            if k < 1 or k % 2 != 1:
                raise ValueError(f"kernel sizes must be odd and >= 1, got {k}")
            if k > self.samples:
                raise ValueError(
                    f"kernel size {k} exceeds trial length {self.samples}")
        if self.pool_window < 1 or self.pool_stride < 1:
            raise ValueError("pool window and stride must be >= 1")
        if self.activation not in ("elu", "identity"):
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def n_branches(self) -> int:
        return len(self.kernel_sizes)

    @property
    def n_maps(self) -> int:
        """Total filter maps after branch concatenation (M * F_t)."""
        return self.n_branches * self.temporal_filters

    @property
    def token_len(self) -> int:
        """Number of tokens L produced by the pooling stage."""
        return (self.samples - self.pool_window) // self.pool_stride + 1


def drop_branch(cfg: TokenizerConfig, which: str) -> TokenizerConfig:
    """Return a config with the low- or high-frequency branch removed.

    The longest kernel is the low-frequency branch; the shortest is the
    high-frequency branch.  Used by the ablation switches.
    """
    if len(cfg.kernel_sizes) < 2:
        raise ValueError("cannot drop a branch from a single-branch tokenizer")
    kernels = list(cfg.kernel_sizes)
    if which == "low":
        kernels.remove(max(kernels))
    elif which == "high":
        kernels.remove(min(kernels))
    else:
        raise ValueError(f"unknown branch {which!r}; expected 'low' or 'high'")
    return replace(cfg, kernel_sizes=tuple(kernels))


def positional_encoding(length: int, dim: int) -> np.ndarray:
    """Fixed sinusoidal position table of shape (length, dim).

    Even columns carry ``sin(t / 10000^(c/dim))`` and odd columns carry
    ``cos`` at the paired rate, so column 0 is ``sin(t)`` and row 0 is the
    alternating 0/1 pattern.
    """
    if length < 1 or dim < 1:
        raise ValueError("positional encoding needs positive length and dim")
    pos = np.arange(length, dtype=np.float64)[:, None]
    col = np.arange(dim, dtype=np.float64)[None, :]
    rate = np.power(10000.0, (2.0 * np.floor(col / 2.0)) / dim)
    angle = pos / rate
    return np.where(col.astype(np.int64) % 2 == 0, np.sin(angle), np.cos(angle))


def init_tokenizer_params(cfg: TokenizerConfig,
                          rng: np.random.Generator) -> dict[str, Tensor]:
    """Fresh tokenizer parameters: truncated-normal weights, zero biases."""
    cfg.validate()
    params: dict[str, Tensor] = {}
    for m, k in enumerate(cfg.kernel_sizes):
        w = truncated_normal(rng, (cfg.temporal_filters, k), 1.0 / math.sqrt(k))
        params[f"tokenizer.branch{m}.conv_w"] = Tensor(w, requires_grad=True)
    params["tokenizer.spatial_w"] = Tensor(
        truncated_normal(rng, (cfg.n_maps, cfg.channels),
                         1.0 / math.sqrt(cfg.channels)), requires_grad=True)
    params["tokenizer.spatial_b"] = Tensor(
        np.zeros(cfg.n_maps), requires_grad=True)
    params["tokenizer.proj_w"] = Tensor(
        truncated_normal(rng, (cfg.n_maps, cfg.embed_dim),
                         1.0 / math.sqrt(cfg.n_maps)), requires_grad=True)
    params["tokenizer.proj_b"] = Tensor(
        np.zeros(cfg.embed_dim), requires_grad=True)
    return params


def tokenizer_param_shapes(cfg: TokenizerConfig) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {}
    for m, k in enumerate(cfg.kernel_sizes):
        shapes[f"tokenizer.branch{m}.conv_w"] = (cfg.temporal_filters, k)
    shapes["tokenizer.spatial_w"] = (cfg.n_maps, cfg.channels)
    shapes["tokenizer.spatial_b"] = (cfg.n_maps,)
    shapes["tokenizer.proj_w"] = (cfg.n_maps, cfg.embed_dim)
    shapes["tokenizer.proj_b"] = (cfg.embed_dim,)
    return shapes


def check_params(cfg: TokenizerConfig, params: dict[str, Tensor]) -> None:
    for name, shape in tokenizer_param_shapes(cfg).items():
        if name not in params:
            raise ValueError(f"missing tokenizer parameter {name!r}")
        got = params[name].shape
        if got != shape:
            raise ValueError(
                f"parameter {name!r} has shape {got}, expected {shape}")


def tokenize(x: Tensor, cfg: TokenizerConfig,
             params: dict[str, Tensor]) -> Tensor:
    """Embed one trial (C, T) or a batch (B, C, T) into (…, L, D) tokens."""
    check_params(cfg, params)
    single = x.ndim == 2
    if single:
        x = x.reshape((1,) + x.shape)
    if x.ndim != 3:
        raise ValueError(f"tokenize expects (C,T) or (B,C,T), got {x.shape}")
    b, c, t = x.shape
    if c != cfg.channels:
        raise ValueError(f"input has {c} channels, config says {cfg.channels}")
    if t != cfg.samples:
        raise ValueError(f"input has {t} samples, config says {cfg.samples}")

    branches = [conv1d_depthwise(x, params[f"tokenizer.branch{m}.conv_w"])
                for m in range(cfg.n_branches)]
    feat = (branches[0] if len(branches) == 1
            else apply_primitive("concat", branches, {"axis": 1}))
    # learned spatial combination: collapse the channel axis per filter map
    sw = params["tokenizer.spatial_w"].reshape((cfg.n_maps, cfg.channels, 1))
    sb = params["tokenizer.spatial_b"].reshape((cfg.n_maps, 1))
    spatial = (feat * sw).sum(axis=2) + sb
    if cfg.activation == "elu":
        spatial = elu(spatial)
    pooled = avgpool1d(spatial, cfg.pool_window, cfg.pool_stride)  # (B,MF,L)
    frames = pooled.transpose((0, 2, 1))                           # (B,L,MF)
    tokens = frames @ params["tokenizer.proj_w"] + params["tokenizer.proj_b"]
    pe = Tensor(positional_encoding(cfg.token_len, cfg.embed_dim))
    z = tokens * Tensor(np.float64(math.sqrt(cfg.embed_dim))) + pe
    if single:
        z = z.reshape((cfg.token_len, cfg.embed_dim))
    return z
