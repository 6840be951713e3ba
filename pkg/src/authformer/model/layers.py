"""Parameter groups and forward helpers shared by the embedding and fusion code."""

import math
from dataclasses import dataclass

import numpy as np

from authformer.tensor import Tensor, affine, gelu, get_default_dtype, layer_norm

LN_EPS = 1e-5


@dataclass
class LinearParams:
    weight: Tensor  # [in, out]
    bias: Tensor  # [out]


@dataclass
class LayerNormParams:
    gamma: Tensor
    beta: Tensor


@dataclass
class MLPParams:
    fc1: LinearParams  # D -> r*D
    fc2: LinearParams  # r*D -> D


def param(data: np.ndarray) -> Tensor:
    return Tensor(data, requires_grad=True, dtype=get_default_dtype())


def init_linear(
    rng: np.random.Generator, fan_in: int, fan_out: int, zero: bool = False
) -> LinearParams:
    """Scaled-uniform (fan-in) weights, zero bias; ``zero`` gives an all-zero layer."""
    if zero:
        return LinearParams(param(np.zeros((fan_in, fan_out))), param(np.zeros(fan_out)))
    bound = 1.0 / math.sqrt(fan_in)
    weight = rng.uniform(-bound, bound, size=(fan_in, fan_out))
    return LinearParams(param(weight), param(np.zeros(fan_out)))


def init_layer_norm(dim: int) -> LayerNormParams:
    return LayerNormParams(param(np.ones(dim)), param(np.zeros(dim)))


def init_mlp(rng: np.random.Generator, dim: int, ratio: int) -> MLPParams:
    return MLPParams(init_linear(rng, dim, ratio * dim), init_linear(rng, ratio * dim, dim))


def linear(x: Tensor, p: LinearParams) -> Tensor:
    return affine(x, p.weight, p.bias)


def norm(x: Tensor, p: LayerNormParams) -> Tensor:
    return layer_norm(x, p.gamma, p.beta, LN_EPS)


def mlp(x: Tensor, p: MLPParams) -> Tensor:
    return linear(gelu(linear(x, p.fc1)), p.fc2)


def zero_linear(p: LinearParams) -> None:
    """Replace a projection's weight and bias with zeros."""
    p.weight = param(np.zeros(p.weight.shape))
    p.bias = param(np.zeros(p.bias.shape))

