"""Adam with bias correction and additive L2 weight decay."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import NonFiniteError, Tensor


@dataclass
class AdamState:
    """Optimizer hyperparameters plus per-parameter moment slots."""

    lr: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.0
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: dict[str, Tensor], grads: dict[str, np.ndarray],
              state: AdamState) -> None:
    """One in-place Adam update over a named parameter dict.

    Weight decay enters as an additive gradient term (g + wd * p) before
    the moment updates.  Raises if any parameter lacks a gradient or a
    gradient is non-finite; a zero gradient with zero decay leaves the
    parameter bit-identical.
    """
    state.step += 1
    b1, b2 = state.betas
    bc1 = 1.0 - b1 ** state.step
    bc2 = 1.0 - b2 ** state.step
    for name, p in params.items():
        if name not in grads:
            raise ValueError(f"missing gradient for parameter {name!r}")
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != p.data.shape:
            raise ValueError(
                f"gradient shape {g.shape} != parameter {name!r} shape {p.data.shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite gradient for parameter {name!r}")
        if state.weight_decay != 0.0:
            g = g + state.weight_decay * p.data
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            v = np.zeros_like(p.data)
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        state.m[name] = m
        state.v[name] = v
        p.data -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
