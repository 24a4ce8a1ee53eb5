"""Fourier kernels against the numpy.fft oracle, plus exact-adjoint checks.

numpy.fft appears here only as the independent reference; the package
itself never calls it.
"""

import numpy as np
import pytest

from cfspm.numeric import (
    ComplexTensor,
    Tape,
    Tensor,
    backward,
    constant,
    dft,
    irfft,
    irfft_array,
    n_rfft_bins,
    rfft,
    rfft_array,
)

LENGTHS = [1, 2, 3, 4, 5, 7, 8, 12, 16, 34, 63, 64, 100, 128, 250, 1000]


def test_full_dft_matches_numpy_oracle():
    rng = np.random.default_rng(40)
    for L in LENGTHS:
        x = rng.standard_normal((2, L)) + 1j * rng.standard_normal((2, L))
        got = dft(x, -1)
        ref = np.fft.fft(x, axis=-1)
        assert np.max(np.abs(got - ref)) < 1e-9 * max(1, L), L
        inv = dft(x, 1)
        ref_inv = np.fft.ifft(x, axis=-1) * L
        assert np.max(np.abs(inv - ref_inv)) < 1e-9 * max(1, L), L


def test_rfft_matches_numpy_and_bin_count():
    rng = np.random.default_rng(41)
    for L in LENGTHS:
        x = rng.standard_normal((3, L))
        got = rfft_array(x)
        assert got.shape[-1] == n_rfft_bins(L) == L // 2 + 1
        assert np.max(np.abs(got - np.fft.rfft(x, axis=-1))) < 1e-9 * max(1, L)


def test_round_trip_identity_tight():
    rng = np.random.default_rng(42)
    for L in LENGTHS:
        x = rng.standard_normal((2, L))
        back = irfft_array(rfft_array(x), L)
        assert np.max(np.abs(back - x)) < 1e-10, L


def test_dc_and_pure_tone_bins():
    x = np.ones(8)
    s = rfft_array(x)
    assert abs(s[0] - 8.0) < 1e-12
    assert np.max(np.abs(s[1:])) < 1e-12
    L = 32
    t = np.arange(L)
    tone = np.sin(2 * np.pi * 3 * t / L)
    s = rfft_array(tone)
    # sin(2 pi k t / L) -> bin k equals -i L/2, every other bin zero
    assert abs(s[3] - (-16j)) < 1e-9
    mask = np.ones(n_rfft_bins(L), bool)
    mask[3] = False
    assert np.max(np.abs(s[mask])) < 1e-9


def test_parseval_energy_identity():
    rng = np.random.default_rng(43)
    for L in [8, 13, 34, 100]:
        x = rng.standard_normal(L)
        s = rfft_array(x)
        weights = np.full(n_rfft_bins(L), 2.0)
        weights[0] = 1.0
        if L % 2 == 0:
            weights[-1] = 1.0
        spectral = (weights * np.abs(s) ** 2).sum() / L
        assert abs(spectral - (x ** 2).sum()) < 1e-8, L


def test_linearity_and_determinism():
    rng = np.random.default_rng(44)
    x = rng.standard_normal(34)
    y = rng.standard_normal(34)
    lhs = rfft_array(2.5 * x - 1.25 * y)
    rhs = 2.5 * rfft_array(x) - 1.25 * rfft_array(y)
    assert np.max(np.abs(lhs - rhs)) < 1e-10
    a = rfft_array(x)
    b = rfft_array(x.copy())
    assert a.tobytes() == b.tobytes()


def test_masked_spectral_pipeline_gradient_matches_fd():
    # sum(irfft(W . rfft(x))) differentiated w.r.t. x, odd and even lengths
    rng = np.random.default_rng(45)
    for L in [12, 15]:
        xv = rng.standard_normal(L)
        w = rng.standard_normal(n_rfft_bins(L))

        def numeric_loss(arr):
            return float(np.sum(irfft_array(w * rfft_array(arr), L) ** 2))

        x = Tensor(xv, requires_grad=True)
        with Tape():
            spec = rfft(x)
            y = irfft(spec.mul_real(constant(w)), L)
            loss = (y * y).sum()
        backward(loss)
        eps = 1e-6
        for i in range(L):
            up, dn = xv.copy(), xv.copy()
            up[i] += eps
            dn[i] -= eps
            fd = (numeric_loss(up) - numeric_loss(dn)) / (2 * eps)
            err = abs(x.grad[i] - fd) / max(1.0, abs(fd))
            assert err < 1e-7, (L, i)


def test_irfft_gradient_ignores_dc_and_nyquist_imag():
    rng = np.random.default_rng(46)
    L = 10
    bins = n_rfft_bins(L)
    re = Tensor(rng.standard_normal(bins), requires_grad=True)
    im = Tensor(rng.standard_normal(bins), requires_grad=True)
    with Tape():
        y = irfft(ComplexTensor(re, im), L)
        loss = (y * y).sum()
    backward(loss)
    assert im.grad[0] == 0.0
    assert im.grad[-1] == 0.0
    assert np.any(im.grad[1:-1] != 0.0)


def test_complex_tensor_algebra():
    rng = np.random.default_rng(47)
    a = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
    b = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
    w = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    ca = ComplexTensor(Tensor(a.real), Tensor(a.imag))
    cb = ComplexTensor(Tensor(b.real), Tensor(b.imag))
    prod = ca.mul_complex(cb)
    assert np.allclose(prod.re.data + 1j * prod.im.data, a * b)
    left = ca.matmul_left(Tensor(w.real), Tensor(w.imag))
    assert np.allclose(left.re.data + 1j * left.im.data, w @ a)
    summed = ca + cb
    assert np.allclose(summed.re.data + 1j * summed.im.data, a + b)
    scaled = ca.mul_real(Tensor(np.full(4, 2.0)))
    assert np.allclose(scaled.re.data + 1j * scaled.im.data, 2 * a)


def test_bad_sign_and_empty_axis_rejected():
    with pytest.raises(ValueError):
        dft(np.ones(4), 2)
    with pytest.raises(ValueError):
        dft(np.ones((2, 0)), -1)
    with pytest.raises(ValueError):
        irfft_array(np.ones(4, complex), 10)  # needs 6 bins
