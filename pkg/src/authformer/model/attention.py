"""Multi-head attention and the pre-norm self-attention encoder."""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from authformer.errors import ConfigError, ShapeError
from authformer.model.layers import (
    LayerNormParams,
    LinearParams,
    MLPParams,
    init_layer_norm,
    init_linear,
    init_mlp,
    linear,
    mlp,
    norm,
    zero_linear,
)
from authformer.tensor import Tensor, add, dropout, matmul, mul, reshape, softmax, swap_last, transpose


@dataclass
class AttentionParams:
    """Q/K/V projections stored as ``[D, D]``; column block j is head j's ``[D, D/h]``."""

    query: LinearParams
    key: LinearParams
    value: LinearParams
    out: LinearParams
    heads: int

    @property
    def model_dim(self) -> int:
        return self.query.weight.shape[0]


@dataclass
class AttentionBlockParams:
    norm1: LayerNormParams
    attn: AttentionParams
    norm2: LayerNormParams
    mlp: MLPParams


def _split_heads(x: Tensor, heads: int) -> Tensor:
    """``[..., N, D] -> [..., h, N, D/h]``."""
    *lead, n, d = x.shape
    x = reshape(x, (*lead, n, heads, d // heads))
    k = len(lead)
    return transpose(x, (*range(k), k + 1, k, k + 2))


def _merge_heads(x: Tensor) -> Tensor:
    """``[..., h, N, D/h] -> [..., N, D]``."""
    *lead, h, n, dh = x.shape
    k = len(lead)
    x = transpose(x, (*range(k), k + 1, k, k + 2))
    return reshape(x, (*lead, n, h * dh))


def _check_sources(q_src: Tensor, k_src: Tensor, v_src: Tensor, p: AttentionParams) -> None:
    d = p.model_dim
    if q_src.ndim < 2 or q_src.shape[-1] != d:
        raise ShapeError(f"cross_msa: query source {q_src.shape} is not [..., N, {d}]")
    if k_src.shape != v_src.shape:
        raise ShapeError(f"cross_msa: key source {k_src.shape} and value source {v_src.shape} differ")
    if k_src.shape[-1] != d or k_src.shape[:-2] != q_src.shape[:-2]:
        raise ShapeError(f"cross_msa: query source {q_src.shape} and key source {k_src.shape} are not congruent")


def attention_weights(q_src: Tensor, k_src: Tensor, p: AttentionParams) -> Tensor:
    """Per-head softmax over key positions, ``[..., h, N_q, N_k]``."""
    q = _split_heads(linear(q_src, p.query), p.heads)
    k = _split_heads(linear(k_src, p.key), p.heads)
    scale = 1.0 / math.sqrt(p.model_dim // p.heads)
    return softmax(mul(matmul(q, swap_last(k)), scale), axis=-1)


def cross_msa(q_src: Tensor, k_src: Tensor, v_src: Tensor, p: AttentionParams) -> Tensor:
    """Multi-head attention with queries, keys and values taken from three streams."""
    _check_sources(q_src, k_src, v_src, p)
    weights = attention_weights(q_src, k_src, p)
    v = _split_heads(linear(v_src, p.value), p.heads)
    return linear(_merge_heads(matmul(weights, v)), p.out)


def self_msa(x: Tensor, p: AttentionParams) -> Tensor:
    return cross_msa(x, x, x, p)


def encoder_block(
    x: Tensor,
    block: AttentionBlockParams,
    rate: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    """``x + MSA(LN(x))`` then ``x + MLP(LN(x))``."""
    x = add(x, dropout(self_msa(norm(x, block.norm1), block.attn), rate, rng))
    return add(x, dropout(mlp(norm(x, block.norm2), block.mlp), rate, rng))


def self_attention_encoder(
    tokens: Tensor,
    blocks: list[AttentionBlockParams],
    layers: Optional[int] = None,
    rate: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    layers = len(blocks) if layers is None else layers
    if layers > len(blocks):
        raise ConfigError(f"encoder has {len(blocks)} blocks, cannot run {layers} layers")
    x = tokens
    for block in blocks[:layers]:
        x = encoder_block(x, block, rate, rng)
    return x


def init_attention(rng: np.random.Generator, dim: int, heads: int) -> AttentionParams:
    if dim % heads:
        raise ConfigError(f"model dim {dim} is not divisible by {heads} heads")
    return AttentionParams(
        query=init_linear(rng, dim, dim),
        key=init_linear(rng, dim, dim),
        value=init_linear(rng, dim, dim),
        out=init_linear(rng, dim, dim),
        heads=heads,
    )


def init_attention_block(
    rng: np.random.Generator, dim: int, heads: int, mlp_ratio: int
) -> AttentionBlockParams:
    return AttentionBlockParams(
        norm1=init_layer_norm(dim),
        attn=init_attention(rng, dim, heads),
        norm2=init_layer_norm(dim),
        mlp=init_mlp(rng, dim, mlp_ratio),
    )


def init_encoder(
    rng: np.random.Generator, dim: int, heads: int, mlp_ratio: int, layers: int
) -> list[AttentionBlockParams]:
    return [init_attention_block(rng, dim, heads, mlp_ratio) for _ in range(layers)]


def zero_block_outputs(block: AttentionBlockParams) -> None:
    """Zero the attention output projection and the MLP's second layer."""
    zero_linear(block.attn.out)
    zero_linear(block.mlp.fc2)
