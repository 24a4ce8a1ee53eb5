"""Float64 tape autodiff, Fourier kernels, selective scan, and Adam."""

from .tensor import (
    NonFiniteError,
    Tape,
    Tensor,
    apply_primitive,
    avgpool1d,
    backward,
    concat,
    constant,
    conv1d_depthwise,
    cross_entropy,
    dropout,
    elu,
    exp,
    layer_norm,
    log,
    matmul,
    register_primitive,
    sigmoid,
    silu,
    soft_shrink,
    softmax,
    softplus,
    zero_grad,
)
from .fourier import (
    ComplexTensor,
    dft,
    irfft,
    irfft_array,
    n_rfft_bins,
    rfft,
    rfft_array,
)
from .scan import selective_scan
from .optim import AdamState, adam_step
from .gradcheck import GradCheckReport, check_gradients

__all__ = [
    "AdamState",
    "ComplexTensor",
    "GradCheckReport",
    "NonFiniteError",
    "Tape",
    "Tensor",
    "adam_step",
    "apply_primitive",
    "avgpool1d",
    "backward",
    "check_gradients",
    "concat",
    "constant",
    "conv1d_depthwise",
    "cross_entropy",
    "dft",
    "dropout",
    "elu",
    "exp",
    "irfft",
    "irfft_array",
    "layer_norm",
    "log",
    "matmul",
    "n_rfft_bins",
    "register_primitive",
    "rfft",
    "rfft_array",
    "selective_scan",
    "sigmoid",
    "silu",
    "soft_shrink",
    "softmax",
    "softplus",
    "zero_grad",
]
