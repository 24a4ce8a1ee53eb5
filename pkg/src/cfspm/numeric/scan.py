"""Input-dependent (selective) state-space scan as a single tape primitive.

Recurrence, per sequence position t:

    h_t = exp(delta_t (x) A) * h_{t-1} + (delta_t . u_t) (x) B_t
    o_t = <C_t, h_t> + D_skip . u_t

with hidden state h of shape (d_inner, n_state).  The zero-order-hold
discretization requires strictly positive step sizes and strictly
negative state matrix entries; both are enforced here.  The backward
pass is classic backpropagation through time over the saved hidden
trajectory, so gradients are exact rather than approximated.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, apply_primitive, register_primitive


def _fwd_selective_scan(arrays, attrs):
    u, delta, b_in, c_out, a, d_skip = arrays
    squeeze = u.ndim == 2
    if squeeze:
        u, delta, b_in, c_out = u[None], delta[None], b_in[None], c_out[None]
    if u.ndim != 3 or b_in.ndim != 3:
        raise ValueError(
            f"selective_scan expects (B,L,d) inputs, got u {u.shape}, B {b_in.shape}")
    batch, length, d_inner = u.shape
    n_state = b_in.shape[-1]
    if delta.shape != u.shape:
        raise ValueError(f"delta shape {delta.shape} != u shape {u.shape}")
    if c_out.shape != b_in.shape:
        raise ValueError(f"C shape {c_out.shape} != B shape {b_in.shape}")
    if a.shape != (d_inner, n_state):
        raise ValueError(f"A shape {a.shape} != ({d_inner}, {n_state})")
    if d_skip.shape != (d_inner,):
        raise ValueError(f"D_skip shape {d_skip.shape} != ({d_inner},)")
    if not np.all(delta > 0):
        raise ValueError("selective_scan requires strictly positive delta")
    if not np.all(a < 0):
        raise ValueError("selective_scan requires strictly negative A entries")

    da = np.exp(delta[..., None] * a)                      # (B,L,d,N)
    dbu = (delta * u)[..., None] * b_in[:, :, None, :]     # (B,L,d,N)
    trajectory = np.empty_like(da)
    h = np.zeros((batch, d_inner, n_state))
    for t in range(length):
        h = da[:, t] * h + dbu[:, t]
        trajectory[:, t] = h
    out = np.einsum("bln,bldn->bld", c_out, trajectory, optimize=True) \
        + d_skip * u
    if squeeze:
        out = out[0]
    return out, (u, delta, b_in, c_out, a, d_skip, da, trajectory, squeeze)


def _bwd_selective_scan(g, saved, attrs):
    u, delta, b_in, c_out, a, d_skip, da, trajectory, squeeze = saved
    if squeeze:
        g = g[None]
    batch, length, d_inner = u.shape
    n_state = b_in.shape[-1]

    g_dskip = np.einsum("bld,bld->d", g, u, optimize=True)
    g_u = d_skip * g
    g_c = np.einsum("bld,bldn->bln", g, trajectory, optimize=True)
    g_delta = np.zeros_like(delta)
    g_b = np.zeros_like(b_in)
    g_a = np.zeros_like(a)

    hbar = np.zeros((batch, d_inner, n_state))
    for t in range(length - 1, -1, -1):
        hbar = hbar + g[:, t, :, None] * c_out[:, t, None, :]
        if t > 0:
            tmp = hbar * trajectory[:, t - 1] * da[:, t]
            g_delta[:, t] += np.einsum("bdn,dn->bd", tmp, a, optimize=True)
            g_a += np.einsum("bdn,bd->dn", tmp, delta[:, t], optimize=True)
        s = np.einsum("bdn,bn->bd", hbar, b_in[:, t], optimize=True)
        g_delta[:, t] += s * u[:, t]
        g_u[:, t] += s * delta[:, t]
        g_b[:, t] += np.einsum("bdn,bd->bn", hbar, delta[:, t] * u[:, t],
                               optimize=True)
        hbar = da[:, t] * hbar

    if squeeze:
        g_u, g_delta, g_b, g_c = g_u[0], g_delta[0], g_b[0], g_c[0]
    return [g_u, g_delta, g_b, g_c, g_a, g_dskip]


register_primitive("selective_scan", _fwd_selective_scan, _bwd_selective_scan)


def selective_scan(u: Tensor, delta: Tensor, b_in: Tensor, c_out: Tensor,
                   a: Tensor, d_skip: Tensor) -> Tensor:
    """Differentiable selective scan over (B,L,d_inner) or (L,d_inner) inputs."""
    return apply_primitive(
        "selective_scan", [u, delta, b_in, c_out, a, d_skip])
