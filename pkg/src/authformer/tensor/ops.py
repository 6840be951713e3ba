"""Differentiable primitives over :class:`Tensor`.

Every primitive computes its output with numpy and, when gradient tracking is
on and any input requires a gradient, records a backward rule on the current
tape. Inputs are never mutated. Broadcasting is limited to bias-style
trailing dimensions.
"""

import math
from typing import Optional, Sequence, Union

import numpy as np

from authformer.errors import AuthFormerValidationError, ShapeError
from authformer.tensor.core import Tensor, current_tape, get_default_dtype, grad_enabled

Operand = Union[Tensor, float, int, np.ndarray]

_GELU_C = math.sqrt(2.0 / math.pi)


def _as_tensor(x: Operand, like: Optional[Tensor] = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    dtype = like.dtype if like is not None else get_default_dtype()
    return Tensor._wrap(np.asarray(x, dtype=dtype))


def _emit(op: str, data: np.ndarray, inputs: Sequence[Tensor], rule) -> Tensor:
    tracking = grad_enabled() and any(t.requires_grad for t in inputs)
    out = Tensor._wrap(data, requires_grad=tracking)
    if tracking:
        current_tape().record(op, inputs, out, rule)
    return out


def _sum_to(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a broadcast gradient back to ``shape``."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_trailing(op: str, a: tuple[int, ...], b: tuple[int, ...]) -> None:
    short, long = (a, b) if len(a) <= len(b) else (b, a)
    if tuple(long[len(long) - len(short):]) != tuple(short):
        raise ShapeError(f"{op}: shapes {a} and {b} are not trailing-broadcast compatible")


def _swap_last(a: np.ndarray) -> np.ndarray:
    return np.swapaxes(a, -1, -2)


# -- elementwise arithmetic ------------------------------------------------


def add(a: Operand, b: Operand) -> Tensor:
    a = _as_tensor(a, b if isinstance(b, Tensor) else None)
    b = _as_tensor(b, a)
    _check_trailing("add", a.shape, b.shape)

    def rule(g):
        return _sum_to(g, a.shape), _sum_to(g, b.shape)

    return _emit("add", a.data + b.data, (a, b), rule)


def sub(a: Operand, b: Operand) -> Tensor:
    a = _as_tensor(a, b if isinstance(b, Tensor) else None)
    b = _as_tensor(b, a)
    _check_trailing("sub", a.shape, b.shape)

    def rule(g):
        return _sum_to(g, a.shape), _sum_to(-g, b.shape)

    return _emit("sub", a.data - b.data, (a, b), rule)


def neg(a: Tensor) -> Tensor:
    return _emit("neg", -a.data, (a,), lambda g: (-g,))


def mul(a: Operand, b: Operand) -> Tensor:
    """Elementwise (Hadamard) product with trailing broadcast."""
    a = _as_tensor(a, b if isinstance(b, Tensor) else None)
    b = _as_tensor(b, a)
    _check_trailing("mul", a.shape, b.shape)

    def rule(g):
        return _sum_to(g * b.data, a.shape), _sum_to(g * a.data, b.shape)

    return _emit("mul", a.data * b.data, (a, b), rule)


mul_elementwise = mul


# -- linear algebra --------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul: operands need rank >= 2, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: inner dimensions differ for {a.shape} and {b.shape}")
    _check_trailing("matmul", a.shape[:-2], b.shape[:-2])

    def rule(g):
        ga = _sum_to(g @ _swap_last(b.data), a.shape)
        gb = _sum_to(_swap_last(a.data) @ g, b.shape)
        return ga, gb

    return _emit("matmul", a.data @ b.data, (a, b), rule)


def affine(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """``x @ W + b`` over the last axis of ``x``; rank-1 ``x`` is allowed."""
    if x.ndim == 1:
        y = reshape(matmul(reshape(x, (1, x.shape[0])), weight), (weight.shape[-1],))
    else:
        y = matmul(x, weight)
    return y if bias is None else add(y, bias)


def transpose(x: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    if sorted(axes) != list(range(x.ndim)):
        raise ShapeError(f"transpose: {axes} is not a permutation for shape {x.shape}")
    inverse = tuple(np.argsort(axes))
    return _emit("transpose", np.transpose(x.data, axes), (x,), lambda g: (np.transpose(g, inverse),))


def swap_last(x: Tensor) -> Tensor:
    axes = list(range(x.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return transpose(x, axes)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    if math.prod(shape) != x.size:
        raise ShapeError(f"reshape: cannot view {x.shape} as {shape}")
    return _emit("reshape", x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),))


# -- reductions and structure ----------------------------------------------


def _normalize_axis(axis: int, ndim: int, op: str) -> int:
    if not -ndim <= axis < ndim:
        raise ShapeError(f"{op}: axis {axis} out of range for rank {ndim}")
    return axis % ndim


def total(x: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    """Sum over ``axis`` (all elements when None)."""
    if axis is not None:
        axis = _normalize_axis(axis, x.ndim, "sum")

    def rule(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _emit("sum", np.sum(x.data, axis=axis, keepdims=keepdims), (x,), rule)


def mean_pool(x: Tensor, axis: int) -> Tensor:
    axis = _normalize_axis(axis, x.ndim, "mean_pool")
    n = x.shape[axis]
    if n == 0:
        raise ShapeError(f"mean_pool: empty axis {axis} in shape {x.shape}")
    return mul(total(x, axis=axis), 1.0 / n)


def concat(xs: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not xs:
        raise ShapeError("concat: nothing to concatenate")
    axis = _normalize_axis(axis, xs[0].ndim, "concat")
    for t in xs[1:]:
        if t.ndim != xs[0].ndim or any(
            s != r for i, (s, r) in enumerate(zip(t.shape, xs[0].shape)) if i != axis
        ):
            raise ShapeError(f"concat: shapes {[t.shape for t in xs]} differ off axis {axis}")
    sizes = np.cumsum([t.shape[axis] for t in xs])[:-1]

    def rule(g):
        return tuple(np.split(g, sizes, axis=axis))

    return _emit("concat", np.concatenate([t.data for t in xs], axis=axis), tuple(xs), rule)


# -- normalisation and activations -----------------------------------------


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    axis = _normalize_axis(axis, x.ndim, "softmax")
    shifted = x.data - np.max(x.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / np.sum(e, axis=axis, keepdims=True)

    def rule(g):
        return (y * (g - np.sum(g * y, axis=axis, keepdims=True)),)

    return _emit("softmax", y, (x,), rule)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalise the last axis to zero mean / unit variance, then scale and shift."""
    if x.ndim == 0 or x.shape[-1] == 0:
        raise ShapeError(f"layer_norm: empty normalisation axis in shape {x.shape}")
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ShapeError(
            f"layer_norm: gamma {gamma.shape} / beta {beta.shape} do not match last dim of {x.shape}"
        )
    mu = np.mean(x.data, axis=-1, keepdims=True)
    xc = x.data - mu
    var = np.mean(xc * xc, axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    y = xhat * gamma.data + beta.data

    def rule(g):
        gxhat = g * gamma.data
        gx = (inv / d) * (
            d * gxhat
            - np.sum(gxhat, axis=-1, keepdims=True)
            - xhat * np.sum(gxhat * xhat, axis=-1, keepdims=True)
        )
        return gx, _sum_to(g * xhat, gamma.shape), _sum_to(g, beta.shape)

    return _emit("layer_norm", y, (x, gamma, beta), rule)


def _sigmoid_grad(y: np.ndarray, g: np.ndarray) -> np.ndarray:
    return g * y * (1.0 - y)


def sigmoid(x: Tensor) -> Tensor:
    e = np.exp(-np.abs(x.data))
    y = np.where(x.data >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return _emit("sigmoid", y, (x,), lambda g: (_sigmoid_grad(y, g),))


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return _emit("relu", np.where(mask, x.data, 0.0).astype(x.dtype), (x,), lambda g: (g * mask,))


def gelu(x: Tensor) -> Tensor:
    """GELU, tanh approximation."""
    v = x.data
    t = np.tanh(_GELU_C * (v + 0.044715 * v**3))
    y = 0.5 * v * (1.0 + t)

    def rule(g):
        dt = (1.0 - t * t) * _GELU_C * (1.0 + 3 * 0.044715 * v * v)
        return (g * (0.5 * (1.0 + t) + 0.5 * v * dt),)

    return _emit("gelu", y, (x,), rule)


def dropout(x: Tensor, rate: float, rng: Optional[np.random.Generator]) -> Tensor:
    """Inverted dropout; identity when ``rate`` is 0 or no generator is given."""
    if rng is None or rate <= 0.0:
        return x
    if rate >= 1.0:
        raise AuthFormerValidationError(f"dropout rate must be < 1, got {rate}")
    mask = (rng.random(x.shape) >= rate).astype(x.dtype) / (1.0 - rate)
    return _emit("dropout", x.data * mask, (x,), lambda g: (g * mask,))


# -- convolution -----------------------------------------------------------


def conv1d_causal(
    x: Tensor,
    kernels: Tensor,
    bias: Optional[Tensor] = None,
    dilation: int = 1,
    stride: int = 1,
) -> Tensor:
    """Causal dilated 1-D convolution over ``x[..., T, C_in]``.

    ``kernels`` is ``[K, C_in, C_out]``; tap ``K-1`` multiplies the current
    step. The input is left-padded with ``(K-1)*dilation`` zeros so the output
    keeps length ``T`` (``ceil(T/stride)`` for stride > 1).
    """
    if dilation < 1 or stride < 1:
        raise AuthFormerValidationError(
            f"conv1d_causal: dilation ({dilation}) and stride ({stride}) must be >= 1"
        )
    if x.ndim < 2 or kernels.ndim != 3:
        raise ShapeError(f"conv1d_causal: expected x[..., T, C] and kernels[K, C_in, C_out], got {x.shape} and {kernels.shape}")
    k, c_in, _ = kernels.shape
    t = x.shape[-2]
    if x.shape[-1] != c_in:
        raise ShapeError(f"conv1d_causal: input channels {x.shape[-1]} do not match kernels {kernels.shape}")
    pad = (k - 1) * dilation
    if t < 1 or k < 1:
        raise ShapeError(f"conv1d_causal: kernel of {k} taps is longer than padded input of {t + pad}")
    if bias is not None and bias.shape != (kernels.shape[2],):
        raise ShapeError(f"conv1d_causal: bias {bias.shape} does not match kernels {kernels.shape}")

    widths = [(0, 0)] * (x.ndim - 2) + [(pad, 0), (0, 0)]
    xpad = np.pad(x.data, widths)
    taps = [xpad[..., i * dilation : i * dilation + t : stride, :] for i in range(k)]
    out = sum(tap @ kernels.data[i] for i, tap in enumerate(taps))
    if bias is not None:
        out = out + bias.data

    def rule(g):
        gxpad = np.zeros_like(xpad)
        gk = np.zeros_like(kernels.data)
        for i, tap in enumerate(taps):
            gxpad[..., i * dilation : i * dilation + t : stride, :] += g @ kernels.data[i].T
            gk[i] = np.einsum("...tc,...to->co", tap, g)
        grads = [gxpad[..., pad:, :], gk]
        if bias is not None:
            grads.append(g.reshape(-1, g.shape[-1]).sum(axis=0))
        return tuple(grads)

    inputs = (x, kernels) if bias is None else (x, kernels, bias)
    return _emit("conv1d_causal", out, inputs, rule)


# -- loss ------------------------------------------------------------------


def cross_entropy_loss(logits: Tensor, labels: Union[Sequence[int], np.ndarray]) -> Tensor:
    """Mean over the batch of ``-log softmax(logits)[label]`` (log-sum-exp stable)."""
    if logits.ndim != 2:
        raise ShapeError(f"cross_entropy_loss: logits must be [B, C], got {logits.shape}")
    b, c = logits.shape
    if b == 0:
        raise ShapeError("cross_entropy_loss: empty batch")
    labels = np.asarray(labels)
    if labels.shape != (b,):
        raise ShapeError(f"cross_entropy_loss: {labels.shape[0] if labels.ndim else 0} labels for {b} rows")
    if not np.issubdtype(labels.dtype, np.integer) or labels.min() < 0 or labels.max() >= c:
        raise AuthFormerValidationError(
            f"cross_entropy_loss: labels must be integers in [0, {c}), got {labels.tolist()}"
        )
    z = logits.data
    m = np.max(z, axis=1, keepdims=True)
    e = np.exp(z - m)
    s = np.sum(e, axis=1, keepdims=True)
    lse = m[:, 0] + np.log(s[:, 0])
    rows = np.arange(b)
    loss = np.mean(lse - z[rows, labels])
    probs = e / s

    def rule(g):
        grad = probs.copy()
        grad[rows, labels] -= 1.0
        return (grad * (g / b),)

    return _emit("cross_entropy", np.asarray(loss, dtype=logits.dtype), (logits,), rule)
