from authformer.tensor.core import (
    Tape,
    Tensor,
    backward,
    current_tape,
    default_dtype,
    float64,
    get_default_dtype,
    grad_enabled,
    no_grad,
    set_default_dtype,
)
from authformer.tensor.gradcheck import finite_diff_check
from authformer.tensor.ops import (
    add,
    affine,
    concat,
    conv1d_causal,
    cross_entropy_loss,
    dropout,
    gelu,
    layer_norm,
    matmul,
    mean_pool,
    mul,
    mul_elementwise,
    neg,
    relu,
    reshape,
    sigmoid,
    softmax,
    sub,
    swap_last,
    total,
    transpose,
)

__all__ = [
    "Tape",
    "Tensor",
    "add",
    "affine",
    "backward",
    "concat",
    "conv1d_causal",
    "cross_entropy_loss",
    "current_tape",
    "default_dtype",
    "dropout",
    "finite_diff_check",
    "float64",
    "gelu",
    "get_default_dtype",
    "grad_enabled",
    "layer_norm",
    "matmul",
    "mean_pool",
    "mul",
    "mul_elementwise",
    "neg",
    "no_grad",
    "relu",
    "reshape",
    "set_default_dtype",
    "sigmoid",
    "softmax",
    "sub",
    "swap_last",
    "total",
    "transpose",
]
