"""Two-stage cross-attention image fusion and gated residual (GRN/GLU) fusion.

Stage 1 attends from the first image to itself and reads values from the
second image; stage 2 keys on the stage-1 result instead. The GRN mixes the
fused image stream with the sequence stream through a GLU gate and closes
with a layer norm, so a fully closed gate leaves ``LN(B_fusion)``.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from authformer.errors import ShapeError
from authformer.model.attention import AttentionParams, cross_msa, init_attention
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
    param,
    zero_linear,
)
from authformer.tensor import Tensor, add, matmul, mul, sigmoid


@dataclass
class CrossBlockParams:
    attn: AttentionParams
    norm: LayerNormParams
    mlp: MLPParams


@dataclass
class FusionState:
    b_face: Tensor
    b_second: Tensor
    b_stage1: Optional[Tensor] = None
    b_fusion: Optional[Tensor] = None


@dataclass
class GRNParams:
    m1_proj: LinearParams  # W1, b1
    fusion_proj: LinearParams  # W2, b2
    voice_weight: Tensor  # W3
    gate: LinearParams  # W4, b4
    value: LinearParams  # W5, b5
    norm: LayerNormParams


def _cross_block(q_src: Tensor, k_src: Tensor, v_src: Tensor, p: CrossBlockParams) -> Tensor:
    b = add(cross_msa(q_src, k_src, v_src, p.attn), q_src)
    return add(mlp(norm(b, p.norm), p.mlp), b)


def fuse_images_stage1(face: Tensor, finger: Tensor, p: CrossBlockParams) -> Tensor:
    """``B' = CrossMSA(face, face, finger) + face``; ``B_stage1 = MLP(LN(B')) + B'``."""
    return _cross_block(face, face, finger, p)


def fuse_images_stage2(face: Tensor, stage1: Tensor, finger: Tensor, p: CrossBlockParams) -> Tensor:
    """``B'' = CrossMSA(face, stage1, finger) + face``; ``B_fusion = MLP(LN(B'')) + B''``."""
    return _cross_block(face, stage1, finger, p)


def fuse_images(
    first: Tensor, second: Tensor, stage1: CrossBlockParams, stage2: CrossBlockParams
) -> FusionState:
    state = FusionState(b_face=first, b_second=second)
    state.b_stage1 = fuse_images_stage1(first, second, stage1)
    state.b_fusion = fuse_images_stage2(first, state.b_stage1, second, stage2)
    return state


def glu(n: Tensor, p: GRNParams) -> Tensor:
    """``sigmoid(W4 n + b4) * (W5 n + b5)``, row-wise."""
    return mul(sigmoid(linear(n, p.gate)), linear(n, p.value))


def grn_fuse(b_fusion: Tensor, s_voice: Tensor, p: GRNParams) -> Tensor:
    if b_fusion.shape != s_voice.shape:
        raise ShapeError(f"grn_fuse: image stream {b_fusion.shape} and sequence stream {s_voice.shape} differ")
    m2 = sigmoid(add(linear(b_fusion, p.fusion_proj), matmul(s_voice, p.voice_weight)))
    m1 = linear(m2, p.m1_proj)
    return norm(add(b_fusion, glu(m1, p)), p.norm)


def close_gate(p: GRNParams) -> None:
    """Zero the GLU value path (W5, b5) so the GRN ignores the sequence stream."""
    zero_linear(p.value)


def init_cross_block(
    rng: np.random.Generator, dim: int, heads: int, mlp_ratio: int
) -> CrossBlockParams:
    return CrossBlockParams(
        attn=init_attention(rng, dim, heads),
        norm=init_layer_norm(dim),
        mlp=init_mlp(rng, dim, mlp_ratio),
    )


def zero_cross_outputs(p: CrossBlockParams) -> None:
    zero_linear(p.attn.out)
    zero_linear(p.mlp.fc2)


def init_grn(
    rng: np.random.Generator,
    dim: int,
    output_norm: Optional[LayerNormParams] = None,
) -> GRNParams:
    bound = 1.0 / np.sqrt(dim)
    return GRNParams(
        m1_proj=init_linear(rng, dim, dim),
        fusion_proj=init_linear(rng, dim, dim),
        voice_weight=param(rng.uniform(-bound, bound, size=(dim, dim))),
        gate=init_linear(rng, dim, dim),
        value=init_linear(rng, dim, dim),
        norm=output_norm if output_norm is not None else init_layer_norm(dim),
    )
