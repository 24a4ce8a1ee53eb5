"""Reverse-mode automatic differentiation on float64 numpy arrays.

A ``Tape`` records every primitive application as an ordered node list;
``backward`` walks the list once in reverse and accumulates exact adjoints
into the participating leaves.  All primitives run in float64 and raise
``NonFiniteError`` the moment a forward pass produces a NaN or infinity,
so numerical failures surface at their source instead of three layers up.

The primitive registry is open: other modules (FFT, selective scan)
register their own kernels through :func:`register_primitive`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np


class NonFiniteError(FloatingPointError):
    """A primitive produced NaN or infinite values."""


# ---------------------------------------------------------------------------
# Tape machinery
# ---------------------------------------------------------------------------

_TAPE_STACK: list["Tape"] = []


@dataclass
class Node:
    """One recorded primitive application (or a leaf registration)."""

    idx: int
    kind: str
    parents: tuple[int, ...]
    # backward(out_grad) -> per-parent gradients (None for no-grad inputs)
    backward: Optional[Callable[[np.ndarray], list[Optional[np.ndarray]]]]
    leaf: Optional["Tensor"] = None


class Tape:
    """Ordered record of primitive applications for one backward pass."""

    def __init__(self) -> None:
        self.nodes: list[Node] = []
        self.consumed = False
        self._leaf_ids: dict[int, int] = {}

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, *exc) -> None:
        popped = _TAPE_STACK.pop()
        assert popped is self

    def _register_leaf(self, t: "Tensor") -> int:
        node_idx = self._leaf_ids.get(id(t))
        if node_idx is None:
            node_idx = len(self.nodes)
            self.nodes.append(Node(node_idx, "leaf", (), None, leaf=t))
            self._leaf_ids[id(t)] = node_idx
        return node_idx

    def _add_node(self, kind: str, parents: tuple[int, ...],
                  backward: Callable) -> int:
        node_idx = len(self.nodes)
        self.nodes.append(Node(node_idx, kind, parents, backward))
        return node_idx


def active_tape() -> Optional[Tape]:
    return _TAPE_STACK[-1] if _TAPE_STACK else None


# ---------------------------------------------------------------------------
# Tensor
# ---------------------------------------------------------------------------

class Tensor:
    """Dense float64 array plus gradient bookkeeping.

    ``grad`` is populated by :func:`backward` for tensors with
    ``requires_grad=True``.  Tensors hash by identity, so they can key
    gradient maps directly.
    """

    __slots__ = ("data", "requires_grad", "grad", "_tape", "_node")

    def __init__(self, data, requires_grad: bool = False) -> None:
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self._tape: Optional[Tape] = None
        self._node: Optional[int] = None

    # -- introspection ----------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def item(self) -> float:
        return float(self.data.reshape(()))

    # -- operator sugar ---------------------------------------------------
    def __add__(self, other):
        return apply_primitive("add", [self, _as_tensor(other)])

    def __radd__(self, other):
        return apply_primitive("add", [_as_tensor(other), self])

    def __sub__(self, other):
        return apply_primitive("sub", [self, _as_tensor(other)])

    def __rsub__(self, other):
        return apply_primitive("sub", [_as_tensor(other), self])

    def __mul__(self, other):
        return apply_primitive("mul", [self, _as_tensor(other)])

    def __rmul__(self, other):
        return apply_primitive("mul", [_as_tensor(other), self])

    def __neg__(self):
        return apply_primitive("mul", [self, Tensor(-1.0)])

    def __matmul__(self, other):
        return apply_primitive("matmul", [self, _as_tensor(other)])

    def __getitem__(self, key):
        return apply_primitive("slice", [self], {"key": key})

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return apply_primitive("reshape", [self], {"shape": tuple(shape)})

    def transpose(self, *axes) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return apply_primitive(
            "transpose", [self], {"axes": tuple(axes) if axes else None})

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return apply_primitive(
            "sum", [self], {"axis": axis, "keepdims": keepdims})

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        return apply_primitive(
            "mean", [self], {"axis": axis, "keepdims": keepdims})


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def constant(x) -> Tensor:
    """Wrap an array as a no-grad Tensor."""
    return _as_tensor(x)


# ---------------------------------------------------------------------------
# Primitive registry and application
# ---------------------------------------------------------------------------

# kind -> (forward(arrays, attrs) -> (out_array, saved),
#          backward(out_grad, saved, attrs) -> per-input gradient list)
_PRIMITIVES: dict[str, tuple[Callable, Callable]] = {}


def register_primitive(kind: str, forward: Callable, backward: Callable) -> None:
    if kind in _PRIMITIVES:
        raise ValueError(f"primitive already registered: {kind}")
    _PRIMITIVES[kind] = (forward, backward)


def apply_primitive(kind: str, inputs: Sequence[Tensor],
                    attrs: Optional[dict] = None) -> Tensor:
    """Run one primitive, recording it on the active tape if needed."""
    if kind not in _PRIMITIVES:
        raise ValueError(f"unknown primitive: {kind}")
    forward, backward = _PRIMITIVES[kind]
    attrs = attrs or {}
    arrays = [t.data for t in inputs]
    out_array, saved = forward(arrays, attrs)
    if not np.all(np.isfinite(out_array)):
        raise NonFiniteError(f"primitive {kind!r} produced non-finite values")

    out = Tensor(out_array)
    tape = active_tape()
    if tape is None:
        return out

    needs_grad = [t.requires_grad for t in inputs]
    if not any(needs_grad):
        return out

    parent_ids = []
    for t, ng in zip(inputs, needs_grad):
        if not ng:
            parent_ids.append(-1)
            continue
        if t._tape is tape and t._node is not None:
            parent_ids.append(t._node)
        else:
            parent_ids.append(tape._register_leaf(t))

    def node_backward(out_grad: np.ndarray,
                      _backward=backward, _saved=saved, _attrs=attrs,
                      _mask=tuple(needs_grad)) -> list[Optional[np.ndarray]]:
        grads = _backward(out_grad, _saved, _attrs)
        return [g if m else None for g, m in zip(grads, _mask)]

    node_idx = tape._add_node(kind, tuple(parent_ids), node_backward)
    out.requires_grad = True
    out._tape = tape
    out._node = node_idx
    return out


def backward(loss: Tensor) -> dict[Tensor, np.ndarray]:
    """Reverse sweep from a scalar loss.

    Returns a map ``{leaf tensor: gradient}`` and accumulates the same
    gradients into each leaf's ``.grad``.  A tape can be walked once.
    """
    if loss.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    tape = loss._tape
    if tape is None or loss._node is None:
        raise RuntimeError("loss is not attached to a tape")
    if tape.consumed:
        raise RuntimeError("tape already consumed by a previous backward call")
    tape.consumed = True

    grads: dict[int, np.ndarray] = {
        loss._node: np.ones_like(loss.data)}
    result: dict[Tensor, np.ndarray] = {}
    for node in reversed(tape.nodes):
        g = grads.pop(node.idx, None)
        if g is None:
            continue
        if node.leaf is not None:
            t = node.leaf
            if t.grad is None:
                t.grad = np.zeros_like(t.data)
            t.grad += g
            result[t] = t.grad
            continue
        parent_grads = node.backward(g)
        for pid, pg in zip(node.parents, parent_grads):
            if pid < 0 or pg is None:
                continue
            acc = grads.get(pid)
            grads[pid] = np.asarray(pg, dtype=np.float64) if acc is None \
                else acc + pg
    return result


def zero_grad(params) -> None:
    """Clear gradients on a dict or iterable of tensors."""
    values = params.values() if isinstance(params, dict) else params
    for t in values:
        t.grad = None


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------

def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, s) in enumerate(zip(g.shape, shape)) if s == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# ---------------------------------------------------------------------------
# Elementwise and structural primitives
# ---------------------------------------------------------------------------

def _fwd_add(arrays, attrs):
    a, b = arrays
    return a + b, (a.shape, b.shape)


def _bwd_add(g, saved, attrs):
    sa, sb = saved
    return [_unbroadcast(g, sa), _unbroadcast(g, sb)]


def _fwd_sub(arrays, attrs):
    a, b = arrays
    return a - b, (a.shape, b.shape)


def _bwd_sub(g, saved, attrs):
    sa, sb = saved
    return [_unbroadcast(g, sa), _unbroadcast(-g, sb)]


def _fwd_mul(arrays, attrs):
    a, b = arrays
    return a * b, (a, b)


def _bwd_mul(g, saved, attrs):
    a, b = saved
    return [_unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)]


def _fwd_matmul(arrays, attrs):
    a, b = arrays
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError(
            f"matmul needs >=2-d operands, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    return np.matmul(a, b), (a, b)


def _bwd_matmul(g, saved, attrs):
    a, b = saved
    ga = np.matmul(g, np.swapaxes(b, -1, -2))
    gb = np.matmul(np.swapaxes(a, -1, -2), g)
    return [_unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)]


def _fwd_transpose(arrays, attrs):
    (a,) = arrays
    axes = attrs.get("axes")
    return np.transpose(a, axes), axes


def _bwd_transpose(g, saved, attrs):
    axes = saved
    if axes is None:
        return [np.transpose(g)]
    inv = np.argsort(axes)
    return [np.transpose(g, inv)]


def _fwd_reshape(arrays, attrs):
    (a,) = arrays
    return a.reshape(attrs["shape"]), a.shape


def _bwd_reshape(g, saved, attrs):
    return [g.reshape(saved)]


def _fwd_concat(arrays, attrs):
    axis = attrs["axis"]
    out = np.concatenate(arrays, axis=axis)
    sizes = [a.shape[axis] for a in arrays]
    return out, (axis, sizes)


def _bwd_concat(g, saved, attrs):
    axis, sizes = saved
    splits = np.cumsum(sizes)[:-1]
    return list(np.split(g, splits, axis=axis))


def _fwd_slice(arrays, attrs):
    (a,) = arrays
    return a[attrs["key"]], a.shape


def _bwd_slice(g, saved, attrs):
    out = np.zeros(saved)
    out[attrs["key"]] = g
    return [out]


def _reduce_bwd_shape(g, in_shape, axis, keepdims):
    if axis is None:
        return np.broadcast_to(g.reshape((1,) * len(in_shape)), in_shape)
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    axes = tuple(ax % len(in_shape) for ax in axes)
    if not keepdims:
        for ax in sorted(axes):
            g = np.expand_dims(g, ax)
    return np.broadcast_to(g, in_shape)


def _fwd_sum(arrays, attrs):
    (a,) = arrays
    return a.sum(axis=attrs["axis"], keepdims=attrs["keepdims"]), a.shape


def _bwd_sum(g, saved, attrs):
    return [_reduce_bwd_shape(g, saved, attrs["axis"], attrs["keepdims"]).copy()]


def _reduce_count(shape, axis):
    if axis is None:
        return int(np.prod(shape))
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    return int(np.prod([shape[ax % len(shape)] for ax in axes]))


def _fwd_mean(arrays, attrs):
    (a,) = arrays
    return a.mean(axis=attrs["axis"], keepdims=attrs["keepdims"]), a.shape


def _bwd_mean(g, saved, attrs):
    n = _reduce_count(saved, attrs["axis"])
    return [_reduce_bwd_shape(g, saved, attrs["axis"], attrs["keepdims"]) / n]


def _fwd_sigmoid(arrays, attrs):
    (a,) = arrays
    out = _sigmoid(a)
    return out, out


def _bwd_sigmoid(g, saved, attrs):
    y = saved
    return [g * y * (1.0 - y)]


def _fwd_silu(arrays, attrs):
    (a,) = arrays
    s = _sigmoid(a)
    return a * s, (a, s)


def _bwd_silu(g, saved, attrs):
    a, s = saved
    return [g * s * (1.0 + a * (1.0 - s))]


def _fwd_elu(arrays, attrs):
    (a,) = arrays
    out = np.where(a >= 0, a, np.expm1(np.minimum(a, 0.0)))
    return out, (a, out)


def _bwd_elu(g, saved, attrs):
    a, y = saved
    return [np.where(a >= 0, g, g * (y + 1.0))]


def _fwd_softplus(arrays, attrs):
    (a,) = arrays
    return np.logaddexp(0.0, a), a


def _bwd_softplus(g, saved, attrs):
    return [g * _sigmoid(saved)]


def _fwd_exp(arrays, attrs):
    (a,) = arrays
    with np.errstate(over="ignore"):
        out = np.exp(a)
    return out, out


def _bwd_exp(g, saved, attrs):
    return [g * saved]


def _fwd_log(arrays, attrs):
    (a,) = arrays
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(a)
    return out, a


def _bwd_log(g, saved, attrs):
    return [g / saved]


def _fwd_softmax(arrays, attrs):
    (a,) = arrays
    z = a - a.max(axis=-1, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=-1, keepdims=True)
    return out, out


def _bwd_softmax(g, saved, attrs):
    y = saved
    return [y * (g - (g * y).sum(axis=-1, keepdims=True))]


def _fwd_layer_norm(arrays, attrs):
    x, gamma, beta = arrays
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ValueError(
            f"layer_norm affine shapes {gamma.shape}/{beta.shape} "
            f"do not match feature dim {d}")
    eps = attrs.get("eps", 1e-5)
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    return gamma * xhat + beta, (xhat, inv, gamma)


def _bwd_layer_norm(g, saved, attrs):
    xhat, inv, gamma = saved
    lead = tuple(range(g.ndim - 1))
    g_gamma = (g * xhat).sum(axis=lead)
    g_beta = g.sum(axis=lead)
    dxh = g * gamma
    gx = (dxh - dxh.mean(axis=-1, keepdims=True)
          - xhat * (dxh * xhat).mean(axis=-1, keepdims=True)) * inv
    return [gx, g_gamma, g_beta]


def _fwd_dropout(arrays, attrs):
    (a,) = arrays
    rate = float(attrs["rate"])
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"dropout rate out of range: {rate}")
    if not attrs.get("train", False) or rate == 0.0:
        return a.copy(), None
    if rate == 1.0:
        return np.zeros_like(a), "zero"
    seed = attrs["seed"]
    rng = np.random.default_rng(list(seed) if isinstance(seed, tuple) else seed)
    keep = rng.random(a.shape) >= rate
    scale = 1.0 / (1.0 - rate)
    return a * keep * scale, (keep, scale)


def _bwd_dropout(g, saved, attrs):
    if saved is None:
        return [g]
    if saved == "zero":
        return [np.zeros_like(g)]
    keep, scale = saved
    return [g * keep * scale]


def _fwd_soft_shrink(arrays, attrs):
    (a,) = arrays
    tau = float(attrs["tau"])
    if tau < 0:
        raise ValueError(f"soft_shrink threshold must be >= 0, got {tau}")
    out = np.sign(a) * np.maximum(np.abs(a) - tau, 0.0)
    return out, np.abs(a) > tau


def _bwd_soft_shrink(g, saved, attrs):
    return [g * saved]


def _fwd_cross_entropy(arrays, attrs):
    logits, target = arrays
    if logits.shape != target.shape:
        raise ValueError(
            f"cross_entropy shapes differ: {logits.shape} vs {target.shape}")
    z = logits.reshape((-1, logits.shape[-1])) if logits.ndim > 1 \
        else logits.reshape((1, -1))
    t = target.reshape(z.shape)
    rows = z.shape[0]
    zmax = z.max(axis=-1, keepdims=True)
    lse = zmax + np.log(np.exp(z - zmax).sum(axis=-1, keepdims=True))
    logp = z - lse
    loss = -(t * logp).sum() / rows
    return np.asarray(loss), (z, t, logp, rows, logits.shape)


def _bwd_cross_entropy(g, saved, attrs):
    z, t, logp, rows, in_shape = saved
    p = np.exp(logp)
    mass = t.sum(axis=-1, keepdims=True)
    gz = (p * mass - t) * (float(g) / rows)
    return [gz.reshape(in_shape), None]


def _fwd_conv1d_depthwise(arrays, attrs):
    x, w = arrays
    if w.ndim != 2:
        raise ValueError(f"conv1d_depthwise kernel must be 2-d, got {w.shape}")
    f, k = w.shape
    if k % 2 != 1:
        raise ValueError(f"conv1d_depthwise kernel length must be odd, got {k}")
    squeeze = x.ndim == 2
    if squeeze:
        x = x[None]
    if x.ndim != 3:
        raise ValueError(f"conv1d_depthwise input must be (C,T) or (B,C,T), got {x.shape}")
    b, c, t = x.shape
    p = (k - 1) // 2
    xp = np.pad(x, ((0, 0), (0, 0), (p, p)))
    win = np.lib.stride_tricks.sliding_window_view(xp, k, axis=-1)  # (B,C,T,k) view
    out = np.tensordot(win, w, axes=([-1], [-1]))                    # (B,C,T,F)
    out = np.ascontiguousarray(out.transpose(0, 3, 1, 2))            # (B,F,C,T)
    if squeeze:
        out = out[0]
    return out, (xp, w, (b, c, t), squeeze)


def _bwd_conv1d_depthwise(g, saved, attrs):
    xp, w, (b, c, t), squeeze = saved
    if squeeze:
        g = g[None]
    f, k = w.shape
    p = (k - 1) // 2
    win = np.lib.stride_tricks.sliding_window_view(xp, k, axis=-1)
    # gw[f,j] = sum_{b,c,t} g[b,f,c,t] * win[b,c,t,j]
    g_perm = np.ascontiguousarray(g.transpose(1, 0, 2, 3)).reshape(f, -1)
    gw = g_perm @ win.reshape(-1, k)
    # gx: push each output position's gradient back over its k taps
    gwin = np.tensordot(g.transpose(0, 2, 3, 1), w, axes=([-1], [0]))  # (B,C,T,k)
    gxp = np.zeros_like(xp)
    for j in range(k):
        gxp[..., j:j + t] += gwin[..., j]
    gx = gxp[..., p:p + t]
    if squeeze:
        gx = gx[0]
    return [gx, gw]


def _fwd_avgpool1d(arrays, attrs):
    (a,) = arrays
    window = int(attrs["window"])
    stride = int(attrs["stride"])
    t = a.shape[-1]
    if window < 1 or stride < 1:
        raise ValueError(f"avgpool1d needs positive window/stride, got {window}/{stride}")
    if t < window:
        raise ValueError(f"avgpool1d window {window} exceeds input length {t}")
    win = np.lib.stride_tricks.sliding_window_view(a, window, axis=-1)
    out = win[..., ::stride, :].mean(axis=-1)
    return out, (a.shape, window, stride)


def _bwd_avgpool1d(g, saved, attrs):
    in_shape, window, stride = saved
    gx = np.zeros(in_shape)
    n_out = g.shape[-1]
    for i in range(n_out):
        gx[..., i * stride:i * stride + window] += g[..., i, None] / window
    return [gx]


for _kind, _f, _b in [
    ("add", _fwd_add, _bwd_add),
    ("sub", _fwd_sub, _bwd_sub),
    ("mul", _fwd_mul, _bwd_mul),
    ("matmul", _fwd_matmul, _bwd_matmul),
    ("transpose", _fwd_transpose, _bwd_transpose),
    ("reshape", _fwd_reshape, _bwd_reshape),
    ("concat", _fwd_concat, _bwd_concat),
    ("slice", _fwd_slice, _bwd_slice),
    ("sum", _fwd_sum, _bwd_sum),
    ("mean", _fwd_mean, _bwd_mean),
    ("sigmoid", _fwd_sigmoid, _bwd_sigmoid),
    ("silu", _fwd_silu, _bwd_silu),
    ("elu", _fwd_elu, _bwd_elu),
    ("softplus", _fwd_softplus, _bwd_softplus),
    ("exp", _fwd_exp, _bwd_exp),
    ("log", _fwd_log, _bwd_log),
    ("softmax", _fwd_softmax, _bwd_softmax),
    ("layer_norm", _fwd_layer_norm, _bwd_layer_norm),
    ("dropout", _fwd_dropout, _bwd_dropout),
    ("soft_shrink", _fwd_soft_shrink, _bwd_soft_shrink),
    ("cross_entropy", _fwd_cross_entropy, _bwd_cross_entropy),
    ("conv1d_depthwise", _fwd_conv1d_depthwise, _bwd_conv1d_depthwise),
    ("avgpool1d", _fwd_avgpool1d, _bwd_avgpool1d),
]:
    register_primitive(_kind, _f, _b)


# ---------------------------------------------------------------------------
# Functional wrappers
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    return apply_primitive("matmul", [a, b])


def concat(xs: Sequence[Tensor], axis: int) -> Tensor:
    return apply_primitive("concat", list(xs), {"axis": axis})


def sigmoid(x: Tensor) -> Tensor:
    return apply_primitive("sigmoid", [x])


def silu(x: Tensor) -> Tensor:
    return apply_primitive("silu", [x])


def elu(x: Tensor) -> Tensor:
    return apply_primitive("elu", [x])


def softplus(x: Tensor) -> Tensor:
    return apply_primitive("softplus", [x])


def exp(x: Tensor) -> Tensor:
    return apply_primitive("exp", [x])


def log(x: Tensor) -> Tensor:
    return apply_primitive("log", [x])


def softmax(x: Tensor) -> Tensor:
    return apply_primitive("softmax", [x])


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    return apply_primitive("layer_norm", [x, gamma, beta], {"eps": eps})


def dropout(x: Tensor, rate: float, train: bool, seed) -> Tensor:
    return apply_primitive("dropout", [x],
                           {"rate": rate, "train": train, "seed": seed})


def soft_shrink(x: Tensor, tau: float) -> Tensor:
    return apply_primitive("soft_shrink", [x], {"tau": tau})


def cross_entropy(logits: Tensor, target: Tensor) -> Tensor:
    return apply_primitive("cross_entropy", [logits, _as_tensor(target)])


def conv1d_depthwise(x: Tensor, w: Tensor) -> Tensor:
    return apply_primitive("conv1d_depthwise", [x, w])


def avgpool1d(x: Tensor, window: int, stride: int) -> Tensor:
    return apply_primitive("avgpool1d", [x],
                           {"window": window, "stride": stride})
