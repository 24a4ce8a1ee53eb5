"""Fourier-reorganized selective state-space encoder and classification head.

Each encoder block:

1. layer-norms the token sequence,
2. moves it to the frequency domain (real FFT over the token axis per
   embedding dimension), applies a learnable complex mixer over the
   embedding axis at every bin, sparse soft-shrinkage, a per-bin complex
   filter, and a spectral residual, then returns to the time domain with a
   second residual ("reorganization"),
3. splits the reorganized spectrum with binary frequency masks into
   complementary band components, fuses them per token into a context
   sequence, and derives a multiplicative scale ``S`` and an additive
   ``Bias`` from it,
4. runs a context-conditioned selective state-space scan over the tokens
   and projects back to the embedding width with a gated output map,
5. adds the block input back through a dropout residual.

A final layer norm, flattening, linear classifier, and softmax produce class
probabilities.  Parameters live in a flat name->Tensor dict; checkpoints are
a manifest JSON plus one binary tensor container per parameter.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass

import numpy as np

from .numeric import (ComplexTensor, Tensor, apply_primitive, dropout, exp,
                      irfft, layer_norm, n_rfft_bins, rfft, selective_scan,
                      sigmoid, silu, soft_shrink, softmax, softplus)
from .signal import read_tensor, write_tensor
from .tokenizer import (TokenizerConfig, init_tokenizer_params, tokenize,
                        tokenizer_param_shapes, truncated_normal)

N_SPECTRAL_BANDS = 2


@dataclass(frozen=True)
class ModelConfig:
    """Full model description: tokenizer stage plus encoder/head settings."""

    tokenizer: TokenizerConfig
    depth: int = 2
    n_state: int = 16
    expand: int = 2
    r_spec: float = 0.45
    tau_f: float = 0.01
    dropout: float = 0.1
    n_classes: int = 2
    mixer_per_bin: bool = False
    no_context: bool = False

    def validate(self) -> None:
        self.tokenizer.validate()
        if self.depth < 1:
            raise ValueError(f"depth must be >= 1, got {self.depth}")
        if self.n_state < 1:
            raise ValueError(f"n_state must be >= 1, got {self.n_state}")
        if self.expand < 1:
            raise ValueError(f"expand must be >= 1, got {self.expand}")
        if not 0.0 < self.r_spec < 1.0:
            raise ValueError(f"r_spec must be in (0,1), got {self.r_spec}")
        if self.tau_f < 0.0:
            raise ValueError(f"tau_f must be >= 0, got {self.tau_f}")
        if not 0.0 <= self.dropout <= 1.0:
            raise ValueError(f"dropout must be in [0,1], got {self.dropout}")
        if self.n_classes < 2:
            raise ValueError(f"n_classes must be >= 2, got {self.n_classes}")
        build_spectral_masks(self.n_bins, self.r_spec)

    @property
    def embed_dim(self) -> int:
        return self.tokenizer.embed_dim

    @property
    def d_inner(self) -> int:
        return self.expand * self.tokenizer.embed_dim

    @property
    def token_len(self) -> int:
        return self.tokenizer.token_len

    @property
    def n_bins(self) -> int:
        return n_rfft_bins(self.tokenizer.token_len)

    def to_json(self) -> dict:
        d = asdict(self)
        d["tokenizer"] = asdict(self.tokenizer)
        d["tokenizer"]["kernel_sizes"] = list(self.tokenizer.kernel_sizes)
        return d

    @classmethod
    def from_json(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        tok = dict(d.pop("tokenizer"))
        tok_fields = set(TokenizerConfig.__dataclass_fields__)
        unknown = set(tok) - tok_fields
        if unknown:
            raise ValueError(f"unknown tokenizer config fields: {sorted(unknown)}")
        tok["kernel_sizes"] = tuple(tok.get("kernel_sizes", (63, 15)))
        own_fields = set(cls.__dataclass_fields__) - {"tokenizer"}
        unknown = set(d) - own_fields
        if unknown:
            raise ValueError(f"unknown model config fields: {sorted(unknown)}")
        cfg = cls(tokenizer=TokenizerConfig(**tok), **d)
        cfg.validate()
        return cfg


def build_spectral_masks(n_bins: int, r_spec: float) -> list[np.ndarray]:
    """Two disjoint, exhaustive binary masks over the frequency bins.

    The first mask covers the low bins ``[0, ceil(r_spec * n_bins))`` and the
    second covers the rest.
    """
    if not 0.0 < r_spec < 1.0:
        raise ValueError(f"r_spec must be in (0,1), got {r_spec}")
    if n_bins < 2:
        raise ValueError(f"need at least 2 frequency bins, got {n_bins}")
    split = math.ceil(r_spec * n_bins)
    if split < 1 or split >= n_bins:
        raise ValueError(
            f"degenerate spectral split: {split} of {n_bins} bins in the "
            f"low mask (r_spec={r_spec})")
    low = np.zeros(n_bins)
    low[:split] = 1.0
    high = 1.0 - low
    return [low, high]


# ---------------------------------------------------------------------------
# parameter construction


def _block_param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    d, di, nf, ns = cfg.embed_dim, cfg.d_inner, cfg.n_bins, cfg.n_state
    mix_shape = (nf, d, d) if cfg.mixer_per_bin else (d, d)
    return {
        "ln1_g": (d,), "ln1_b": (d,),
        "mix_w_re": mix_shape, "mix_w_im": mix_shape,
        "mix_b_re": (d,), "mix_b_im": (d,),
        "wf_re": (d, nf), "wf_im": (d, nf),
        "fuse_w": (N_SPECTRAL_BANDS * d, d), "fuse_b": (d,),
        "ln2_g": (d,), "ln2_b": (d,),
        "scale_w": (d, di), "scale_b": (di,),
        "bias_w": (d, di), "bias_b": (di,),
        "in_w": (d, 2 * di), "in_b": (2 * di,),
        "dt_w": (di, di), "dt_b": (di,),
        "bproj_w": (di, ns), "cproj_w": (di, ns),
        "a_log": (di, ns), "d_skip": (di,),
        "out_w": (di, d), "out_b": (d,),
    }


def model_param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    shapes = dict(tokenizer_param_shapes(cfg.tokenizer))
    for layer in range(cfg.depth):
        for name, shape in _block_param_shapes(cfg).items():
            shapes[f"block{layer}.{name}"] = shape
    d = cfg.embed_dim
    shapes["head.ln_g"] = (d,)
    shapes["head.ln_b"] = (d,)
    shapes["head.cls_w"] = (cfg.token_len * d, cfg.n_classes)
    shapes["head.cls_b"] = (cfg.n_classes,)
    return shapes


def init_model_params(cfg: ModelConfig, seed: int) -> dict[str, Tensor]:
    """Deterministic fresh parameters for the full model.

    Layer norms start at identity, the complex mixer at the identity map,
    the spectral filter at zero (so reorganization begins as a pure
    residual), linear maps as truncated normals at ``1/sqrt(fan_in)``, the
    state matrix logs as ``log(1..n_state)`` per inner channel, and the
    step-size projection bias so its softplus is 0.05.
    """
    cfg.validate()
    rng = np.random.default_rng([seed, 303])
    params = init_tokenizer_params(cfg.tokenizer, rng)
    d, di, nf, ns = cfg.embed_dim, cfg.d_inner, cfg.n_bins, cfg.n_state

    def tn(shape, fan_in):
        return Tensor(truncated_normal(rng, shape, 1.0 / math.sqrt(fan_in)),
                      requires_grad=True)

    def zeros(shape):
        return Tensor(np.zeros(shape), requires_grad=True)

    def ones(shape):
        return Tensor(np.ones(shape), requires_grad=True)

    eye = np.eye(d)
    if cfg.mixer_per_bin:
        eye = np.broadcast_to(eye, (nf, d, d)).copy()
    dt_bias = math.log(math.expm1(0.05))
    for layer in range(cfg.depth):
        p = f"block{layer}."
        params[p + "ln1_g"] = ones((d,))
        params[p + "ln1_b"] = zeros((d,))
        params[p + "mix_w_re"] = Tensor(eye.copy(), requires_grad=True)
        params[p + "mix_w_im"] = zeros(eye.shape)
        params[p + "mix_b_re"] = zeros((d,))
        params[p + "mix_b_im"] = zeros((d,))
        params[p + "wf_re"] = zeros((d, nf))
        params[p + "wf_im"] = zeros((d, nf))
        params[p + "fuse_w"] = tn((N_SPECTRAL_BANDS * d, d), N_SPECTRAL_BANDS * d)
        params[p + "fuse_b"] = zeros((d,))
        params[p + "ln2_g"] = ones((d,))
        params[p + "ln2_b"] = zeros((d,))
        params[p + "scale_w"] = tn((d, di), d)
        params[p + "scale_b"] = zeros((di,))
        params[p + "bias_w"] = tn((d, di), d)
        params[p + "bias_b"] = zeros((di,))
        params[p + "in_w"] = tn((d, 2 * di), d)
        params[p + "in_b"] = zeros((2 * di,))
        params[p + "dt_w"] = tn((di, di), di)
        params[p + "dt_b"] = Tensor(np.full(di, dt_bias), requires_grad=True)
        params[p + "bproj_w"] = tn((di, ns), di)
        params[p + "cproj_w"] = tn((di, ns), di)
        params[p + "a_log"] = Tensor(
            np.broadcast_to(np.log(np.arange(1, ns + 1, dtype=np.float64)),
                            (di, ns)).copy(), requires_grad=True)
        params[p + "d_skip"] = ones((di,))
        params[p + "out_w"] = tn((di, d), di)
        params[p + "out_b"] = zeros((d,))
    params["head.ln_g"] = ones((d,))
    params["head.ln_b"] = zeros((d,))
    params["head.cls_w"] = tn((cfg.token_len * d, cfg.n_classes),
                              cfg.token_len * d)
    params["head.cls_b"] = zeros((cfg.n_classes,))
    return params


def check_model_params(cfg: ModelConfig, params: dict[str, Tensor]) -> None:
    for name, shape in model_param_shapes(cfg).items():
        if name not in params:
            raise ValueError(f"missing model parameter {name!r}")
        got = params[name].shape
        if got != shape:
            raise ValueError(
                f"parameter {name!r} has shape {got}, expected {shape}")


# ---------------------------------------------------------------------------
# block operations (all accept (L,D) single sequences or (B,L,D) batches)


def _to_batched(z: Tensor) -> tuple[Tensor, bool]:
    if z.ndim == 2:
        return z.reshape((1,) + z.shape), True
    if z.ndim != 3:
        raise ValueError(f"expected (L,D) or (B,L,D) tokens, got {z.shape}")
    return z, False


def _apply_mixer(omega: ComplexTensor, cfg: ModelConfig,
                 params: dict[str, Tensor], prefix: str) -> ComplexTensor:
    """Complex linear map over the embedding axis at every frequency bin."""
    wre, wim = params[prefix + "mix_w_re"], params[prefix + "mix_w_im"]
    d = cfg.embed_dim
    if not cfg.mixer_per_bin:
        mixed = omega.matmul_left(wre, wim)
    else:
        b, _, nf = omega.shape
        # (B,D,Nf) -> (B,Nf,D,1) so each bin gets its own (D,D) matrix
        xr = omega.re.transpose((0, 2, 1)).reshape((b, nf, d, 1))
        xi = omega.im.transpose((0, 2, 1)).reshape((b, nf, d, 1))
        yr = wre @ xr - wim @ xi
        yi = wre @ xi + wim @ xr
        mixed = ComplexTensor(
            yr.reshape((b, nf, d)).transpose((0, 2, 1)),
            yi.reshape((b, nf, d)).transpose((0, 2, 1)))
    bias = ComplexTensor(params[prefix + "mix_b_re"].reshape((d, 1)),
                         params[prefix + "mix_b_im"].reshape((d, 1)))
    return mixed + bias


def fourier_reorganize(z: Tensor, cfg: ModelConfig, params: dict[str, Tensor],
                       layer: int = 0):
    """Spectral mixing stage of one block.

    Returns ``(z_enh, omega_hat, z_tilde)`` where ``z_enh`` is embedding-major
    ``(..., D, L)``, ``omega_hat`` the reorganized half spectrum
    ``(..., D, n_bins)``, and ``z_tilde`` the normalized tokens ``(..., L, D)``.
    """
    z, single = _to_batched(z)
    length = z.shape[1]
    if z.shape[2] != cfg.embed_dim:
        raise ValueError(
            f"token width {z.shape[2]} does not match embed_dim {cfg.embed_dim}")
    prefix = f"block{layer}."
    z_tilde = layer_norm(z, params[prefix + "ln1_g"], params[prefix + "ln1_b"])
    zt = z_tilde.transpose((0, 2, 1))                  # (B, D, L)
    omega = rfft(zt)                                   # (B, D, Nf)
    if omega.shape[-1] != cfg.n_bins and length == cfg.token_len:
        raise ValueError("frequency bin count mismatch")
    mixed = _apply_mixer(omega, cfg, params, prefix)
    shrunk = ComplexTensor(soft_shrink(mixed.re, cfg.tau_f),
                           soft_shrink(mixed.im, cfg.tau_f))
    w_f = ComplexTensor(params[prefix + "wf_re"], params[prefix + "wf_im"])
    omega_hat = shrunk.mul_complex(w_f) + omega
    z_enh = irfft(omega_hat, length) + zt              # (B, D, L)
    if single:
        sq = lambda t: t.reshape(t.shape[1:])
        return sq(z_enh), ComplexTensor(sq(omega_hat.re), sq(omega_hat.im)), \
            sq(z_tilde)
    return z_enh, omega_hat, z_tilde


def derive_context(omega_hat: ComplexTensor, z_tilde: Tensor, z_enh: Tensor,
                   masks: list[np.ndarray], cfg: ModelConfig,
                   params: dict[str, Tensor], layer: int = 0):
    """Band-split context derivation: returns ``(c_ctx, s, bias)``.

    ``c_ctx`` is ``(..., L, D)``; ``s`` and ``bias`` are ``(..., L, d_inner)``.
    """
    single = z_tilde.ndim == 2
    if single:
        z_tilde = z_tilde.reshape((1,) + z_tilde.shape)
        z_enh = z_enh.reshape((1,) + z_enh.shape)
        omega_hat = ComplexTensor(
            omega_hat.re.reshape((1,) + omega_hat.re.shape),
            omega_hat.im.reshape((1,) + omega_hat.im.shape))
    n_bins = omega_hat.shape[-1]
    if len(masks) != N_SPECTRAL_BANDS:
        raise ValueError(f"expected {N_SPECTRAL_BANDS} masks, got {len(masks)}")
    for m in masks:
        if m.shape != (n_bins,):
            raise ValueError(
                f"mask shape {m.shape} does not match bin count {n_bins}")
    length = z_tilde.shape[1]
    prefix = f"block{layer}."
    zt = z_tilde.transpose((0, 2, 1))                  # (B, D, L)
    bands = []
    for mask in masks:
        z_b = irfft(omega_hat.mul_real(Tensor(mask)), length) + zt
        bands.append(z_b.transpose((0, 2, 1)))         # (B, L, D)
    cat = apply_primitive("concat", bands, {"axis": -1})
    fused = cat @ params[prefix + "fuse_w"] + params[prefix + "fuse_b"]
    pre = fused + z_enh.transpose((0, 2, 1))
    c_ctx = layer_norm(pre, params[prefix + "ln2_g"], params[prefix + "ln2_b"])
    s = sigmoid(c_ctx @ params[prefix + "scale_w"] + params[prefix + "scale_b"])
    bias = c_ctx @ params[prefix + "bias_w"] + params[prefix + "bias_b"]
    if single:
        sq = lambda t: t.reshape(t.shape[1:])
        return sq(c_ctx), sq(s), sq(bias)
    return c_ctx, s, bias


def encode_block(z: Tensor, cfg: ModelConfig, params: dict[str, Tensor],
                 layer: int, masks: list[np.ndarray], train: bool = False,
                 seed: tuple = ()) -> Tensor:
    """One full encoder block with dropout residual."""
    z, single = _to_batched(z)
    prefix = f"block{layer}."
    di = cfg.d_inner
    if cfg.no_context:
        z_tilde = layer_norm(z, params[prefix + "ln1_g"],
                             params[prefix + "ln1_b"])
        s = bias = None
    else:
        z_enh, omega_hat, z_tilde = fourier_reorganize(z, cfg, params, layer)
        _, s, bias = derive_context(omega_hat, z_tilde, z_enh, masks, cfg,
                                    params, layer)
    ur = z_tilde @ params[prefix + "in_w"] + params[prefix + "in_b"]
    u, r = ur[..., :di], ur[..., di:]
    if s is not None:
        u = u * (Tensor(1.0) + s)
        r = r + bias
    delta = softplus(u @ params[prefix + "dt_w"] + params[prefix + "dt_b"])
    b_t = u @ params[prefix + "bproj_w"]
    c_t = u @ params[prefix + "cproj_w"]
    a = exp(params[prefix + "a_log"]) * Tensor(-1.0)
    o = selective_scan(u, delta, b_t, c_t, a, params[prefix + "d_skip"])
    z_star = (o * silu(r)) @ params[prefix + "out_w"] + params[prefix + "out_b"]
    out = z + dropout(z_star, cfg.dropout, train, tuple(seed) + (layer,))
    if single:
        out = out.reshape(out.shape[1:])
    return out


def model_logits(x: Tensor, cfg: ModelConfig, params: dict[str, Tensor],
                 train: bool = False, seed: tuple = ()) -> Tensor:
    """Unnormalized class scores for a trial (C,T) or batch (B,C,T)."""
    check_model_params(cfg, params)
    single = x.ndim == 2
    if single:
        x = x.reshape((1,) + x.shape)
    z = tokenize(x, cfg.tokenizer, params)
    masks = build_spectral_masks(cfg.n_bins, cfg.r_spec)
    for layer in range(cfg.depth):
        z = encode_block(z, cfg, params, layer, masks, train, tuple(seed))
    z = layer_norm(z, params["head.ln_g"], params["head.ln_b"])
    flat = z.reshape((z.shape[0], cfg.token_len * cfg.embed_dim))
    logits = flat @ params["head.cls_w"] + params["head.cls_b"]
    if single:
        logits = logits.reshape((cfg.n_classes,))
    return logits


def model_forward(x: Tensor, cfg: ModelConfig, params: dict[str, Tensor],
                  train: bool = False, seed: tuple = ()) -> Tensor:
    """Class probability vector(s): softmax over :func:`model_logits`."""
    return softmax(model_logits(x, cfg, params, train, seed))


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path: str, cfg: ModelConfig,
                    params: dict[str, Tensor]) -> None:
    """Write a manifest plus one tensor container per parameter."""
    check_model_params(cfg, params)
    os.makedirs(path, exist_ok=True)
    pdir = os.path.join(path, "params")
    os.makedirs(pdir, exist_ok=True)
    manifest = {
        "config": cfg.to_json(),
        "parameters": {name: list(params[name].shape)
                       for name in sorted(params)},
    }
    with open(os.path.join(path, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for name in sorted(params):
        write_tensor(os.path.join(pdir, f"{name}.cfsp"), params[name].data)


def load_checkpoint(path: str) -> tuple[ModelConfig, dict[str, Tensor]]:
    manifest_path = os.path.join(path, "manifest.json")
    if not os.path.exists(manifest_path):
        raise FileNotFoundError(f"no checkpoint manifest at {manifest_path}")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    for key in ("config", "parameters"):
        if key not in manifest:
            raise ValueError(f"checkpoint manifest missing {key!r}")
    cfg = ModelConfig.from_json(manifest["config"])
    expected = model_param_shapes(cfg)
    listed = manifest["parameters"]
    if set(listed) != set(expected):
        missing = sorted(set(expected) - set(listed))
        extra = sorted(set(listed) - set(expected))
        raise ValueError(
            f"checkpoint parameter set mismatch: missing {missing}, "
            f"unexpected {extra}")
    params: dict[str, Tensor] = {}
    for name, shape in expected.items():
        if tuple(listed[name]) != shape:
            raise ValueError(
                f"manifest shape {listed[name]} for {name!r} does not match "
                f"config-implied {shape}")
        arr = read_tensor(os.path.join(path, "params", f"{name}.cfsp"))
        if arr.shape != shape:
            raise ValueError(
                f"stored tensor {name!r} has shape {arr.shape}, "
                f"expected {shape}")
        params[name] = Tensor(arr, requires_grad=True)
    return cfg, params
