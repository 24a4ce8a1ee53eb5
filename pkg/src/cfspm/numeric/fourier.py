"""In-house discrete Fourier transforms with tape-integrated adjoints.

Forward transforms are unnormalized; the inverse carries the 1/L factor.
Power-of-two lengths run an iterative radix-2 kernel; other lengths fall
back to a cached DFT-matrix product (O(L^2), fine at the sequence lengths
this model sees).  The half-spectrum transforms are registered as tape
primitives whose backward passes are the exact adjoints of the forward
linear maps — including the zero rows for the imaginary parts of the DC
and Nyquist bins, which the real-input convention never observes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor, apply_primitive, concat, register_primitive

_BITREV_CACHE: dict[int, np.ndarray] = {}
_DFT_MATRIX_CACHE: dict[tuple[int, int], np.ndarray] = {}


def n_rfft_bins(length: int) -> int:
    return length // 2 + 1


def _bitrev_indices(length: int) -> np.ndarray:
    idx = _BITREV_CACHE.get(length)
    if idx is None:
        bits = length.bit_length() - 1
        base = np.arange(length)
        rev = np.zeros(length, dtype=np.intp)
        for b in range(bits):
            rev |= ((base >> b) & 1) << (bits - 1 - b)
        idx = _BITREV_CACHE[length] = rev
    return idx


def _dft_matrix(length: int, sign: int) -> np.ndarray:
    key = (length, sign)
    mat = _DFT_MATRIX_CACHE.get(key)
    if mat is None:
        t = np.arange(length)
        mat = np.exp(sign * 2j * np.pi * np.outer(t, t) / length)
        _DFT_MATRIX_CACHE[key] = mat
    return mat


def _fft_pow2(a: np.ndarray, sign: int) -> np.ndarray:
    length = a.shape[-1]
    if length == 1:
        return a.copy()
    a = a[..., _bitrev_indices(length)]
    span = 1
    while span < length:
        w = np.exp(sign * 1j * np.pi * np.arange(span) / span)
        a = a.reshape(a.shape[:-1] + (length // (2 * span), 2, span))
        even = a[..., 0, :]
        odd = a[..., 1, :] * w
        a = np.concatenate([even + odd, even - odd], axis=-1)
        a = a.reshape(a.shape[:-2] + (length,))
        span *= 2
    return a


def dft(a: np.ndarray, sign: int) -> np.ndarray:
    """Unnormalized DFT along the last axis; sign=-1 forward, +1 inverse-direction."""
    if sign not in (-1, 1):
        raise ValueError(f"dft sign must be +-1, got {sign}")
    a = np.asarray(a, dtype=np.complex128)
    length = a.shape[-1]
    if length == 0:
        raise ValueError("dft needs a non-empty last axis")
    if length & (length - 1) == 0:
        return _fft_pow2(a, sign)
    return a @ _dft_matrix(length, sign)


def rfft_array(x: np.ndarray) -> np.ndarray:
    """Half spectrum of a real signal along the last axis (complex output)."""
    x = np.asarray(x, dtype=np.float64)
    length = x.shape[-1]
    return dft(x, -1)[..., : n_rfft_bins(length)]


def irfft_array(spec: np.ndarray, length: int) -> np.ndarray:
    """Real signal from a Hermitian half spectrum along the last axis."""
    spec = np.asarray(spec, dtype=np.complex128)
    bins = n_rfft_bins(length)
    if spec.shape[-1] != bins:
        raise ValueError(
            f"half spectrum has {spec.shape[-1]} bins, length {length} needs {bins}")
    full = np.zeros(spec.shape[:-1] + (length,), dtype=np.complex128)
    full[..., :bins] = spec
    interior = spec[..., 1:(length + 1) // 2]
    m = interior.shape[-1]
    if m:
        full[..., length - m:] = np.conj(np.flip(interior, axis=-1))
    return dft(full, 1).real / length


# ---------------------------------------------------------------------------
# Tape primitives
# ---------------------------------------------------------------------------

def _fwd_rfft(arrays, attrs):
    (x,) = arrays
    spec = rfft_array(x)
    return np.stack([spec.real, spec.imag], axis=-1), x.shape[-1]


def _bwd_rfft(g, saved, attrs):
    length = saved
    bins = n_rfft_bins(length)
    gc = g[..., 0] + 1j * g[..., 1]
    buf = np.zeros(gc.shape[:-1] + (length,), dtype=np.complex128)
    buf[..., :bins] = gc
    return [dft(buf, 1).real]


def _fwd_irfft(arrays, attrs):
    (s,) = arrays
    if s.ndim < 2 or s.shape[-1] != 2:
        raise ValueError(f"irfft input must stack (re, im) on the last axis, got {s.shape}")
    length = int(attrs["length"])
    spec = s[..., 0] + 1j * s[..., 1]
    return irfft_array(spec, length), length


def _bwd_irfft(g, saved, attrs):
    length = saved
    bins = n_rfft_bins(length)
    c = dft(g.astype(np.complex128), -1)[..., :bins]
    gre = (2.0 / length) * c.real
    gim = (2.0 / length) * c.imag
    gre[..., 0] = c.real[..., 0] / length
    gim[..., 0] = 0.0
    if length % 2 == 0:
        gre[..., -1] = c.real[..., -1] / length
        gim[..., -1] = 0.0
    return [np.stack([gre, gim], axis=-1)]


register_primitive("rfft", _fwd_rfft, _bwd_rfft)
register_primitive("irfft", _fwd_irfft, _bwd_irfft)


# ---------------------------------------------------------------------------
# Complex pairs on the tape
# ---------------------------------------------------------------------------

@dataclass
class ComplexTensor:
    """A complex array carried as separate real and imaginary Tensors."""

    re: Tensor
    im: Tensor

    @property
    def shape(self) -> tuple[int, ...]:
        return self.re.shape

    def __add__(self, other: "ComplexTensor") -> "ComplexTensor":
        return ComplexTensor(self.re + other.re, self.im + other.im)

    def mul_real(self, mask: Tensor) -> "ComplexTensor":
        """Scale by a real tensor (broadcasting)."""
        return ComplexTensor(self.re * mask, self.im * mask)

    def mul_complex(self, other: "ComplexTensor") -> "ComplexTensor":
        return ComplexTensor(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    def matmul_left(self, wre: Tensor, wim: Tensor) -> "ComplexTensor":
        """(wre + i wim) @ self, matrix product over the leading value axis."""
        return ComplexTensor(
            wre @ self.re - wim @ self.im,
            wre @ self.im + wim @ self.re,
        )


def rfft(x: Tensor) -> ComplexTensor:
    """Differentiable half spectrum along the last axis of ``x``."""
    packed = apply_primitive("rfft", [x])
    return ComplexTensor(packed[..., 0], packed[..., 1])


def irfft(s: ComplexTensor, length: int) -> Tensor:
    """Differentiable inverse of :func:`rfft` for a given signal length."""
    re = s.re.reshape(s.re.shape + (1,))
    im = s.im.reshape(s.im.shape + (1,))
    packed = concat([re, im], axis=-1)
    return apply_primitive("irfft", [packed], {"length": length})
