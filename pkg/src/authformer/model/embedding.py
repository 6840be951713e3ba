"""Modality embeddings: ViT patch tokens for images, framed TCN tokens for sequences.

Both paths end in ``[..., N, D]`` token tensors with one shared N and D, so
cross-attention and gated fusion can combine any two streams.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from authformer.config import EmbedConfig
from authformer.errors import AuthFormerValidationError, ConfigError, ShapeError
from authformer.modalities import Modality
from authformer.model.layers import LinearParams, init_linear, linear, param
from authformer.tensor import Tensor, add, conv1d_causal, relu


@dataclass(frozen=True)
class ImageSample:
    """Pixels ``[H, W, C]`` (or a batch ``[B, H, W, C]``) normalised to [0, 1]."""

    pixels: np.ndarray
    modality: Modality

    def __post_init__(self):
        if not self.modality.is_image:
            raise AuthFormerValidationError(f"{self.modality} is not an image modality")
        if self.pixels.ndim < 3:
            raise ShapeError(f"image pixels must be [H, W, C], got {self.pixels.shape}")
        if not np.all(np.isfinite(self.pixels)):
            raise AuthFormerValidationError(f"{self.modality} pixels contain non-finite values")
        if self.pixels.size and (self.pixels.min() < 0.0 or self.pixels.max() > 1.0):
            raise AuthFormerValidationError(f"{self.modality} pixels must lie in [0, 1]")


@dataclass(frozen=True)
class SequenceSample:
    """A 1-D signal ``[T]`` (or a batch ``[B, T]``)."""

    values: np.ndarray
    modality: Modality = Modality.VOICE

    def __post_init__(self):
        if self.modality.is_image:
            raise AuthFormerValidationError(f"{self.modality} is not a sequence modality")
        if self.values.ndim < 1:
            raise ShapeError(f"sequence values must be [T], got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise AuthFormerValidationError("sequence values contain non-finite values")


@dataclass
class ImageEmbedParams:
    proj: LinearParams  # patch_dim -> D
    position: Tensor  # [N, D]


@dataclass
class TCNLayerParams:
    kernels: Tensor  # [K, C_in, C_out]
    bias: Tensor  # [C_out]
    dilation: int


@dataclass
class SequenceEmbedParams:
    embed: LinearParams  # frame -> d
    tcn: list[TCNLayerParams]
    out_proj: Optional[LinearParams]  # last TCN channels -> D, only when they differ
    position: Tensor  # [N, D]


# -- images ----------------------------------------------------------------


def patchify(pixels: np.ndarray, patch: int) -> np.ndarray:
    """Split ``[..., H, W, C]`` into row-major non-overlapping patches ``[..., N, p*p*C]``."""
    *lead, h, w, c = pixels.shape
    if h % patch or w % patch:
        raise ShapeError(f"image {h}x{w} is not divisible by patch size {patch}")
    gh, gw = h // patch, w // patch
    x = pixels.reshape(*lead, gh, patch, gw, patch, c)
    n = len(lead)
    x = x.transpose(*range(n), n, n + 2, n + 1, n + 3, n + 4)
    return x.reshape(*lead, gh * gw, patch * patch * c)


def project_patches(img: ImageSample, params: ImageEmbedParams, config: EmbedConfig) -> Tensor:
    """Affine patch projection without the positional table."""
    if tuple(img.pixels.shape[-3:]) != config.image_shape:
        raise ShapeError(
            f"{img.modality} image shape {img.pixels.shape[-3:]} does not match configured {config.image_shape}"
        )
    patches = Tensor(patchify(img.pixels, config.patch_size))
    return linear(patches, params.proj)


def patch_embed(img: ImageSample, params: ImageEmbedParams, config: EmbedConfig) -> Tensor:
    return add_positional(project_patches(img, params, config), params.position)


# -- sequences -------------------------------------------------------------


def frame_sequence(values: np.ndarray, frame: int, hop: int, count: int) -> np.ndarray:
    """Frame ``[..., T]`` into ``count`` windows; window i covers ``[i*hop, i*hop+frame)``."""
    t = values.shape[-1]
    needed = frame + (count - 1) * hop
    if t < needed:
        raise AuthFormerValidationError(
            f"sequence of length {t} is too short for {count} frames of {frame} (hop {hop}); needs {needed}"
        )
    index = np.arange(count)[:, None] * hop + np.arange(frame)[None, :]
    return values[..., index]


def seq_embed(x: SequenceSample, params: SequenceEmbedParams, config: EmbedConfig) -> Tensor:
    """Learnable embedding E: ``R^T -> [N, d]``."""
    frames = frame_sequence(x.values, config.frame_length, config.hop_length, config.token_count)
    return linear(Tensor(frames), params.embed)


def tcn_extract(e: Tensor, params: SequenceEmbedParams) -> Tensor:
    """Causal dilated conv stack: conv -> ReLU -> residual (when channels match)."""
    if not params.tcn:
        raise ConfigError("TCN needs at least one layer")
    c_in = params.tcn[0].kernels.shape[1]
    if e.shape[-1] != c_in:
        raise ConfigError(f"TCN expects {c_in} input channels, got embedding of shape {e.shape}")
    x = e
    for layer in params.tcn:
        h = relu(conv1d_causal(x, layer.kernels, layer.bias, dilation=layer.dilation))
        x = add(h, x) if h.shape == x.shape else h
    if params.out_proj is not None:
        x = linear(x, params.out_proj)
    return x


def add_positional(f: Tensor, position: Tensor) -> Tensor:
    """``S_i = f_i + p_i``."""
    if tuple(f.shape[-2:]) != tuple(position.shape):
        raise ShapeError(f"positional table {position.shape} does not match features {f.shape}")
    return add(f, position)


def sequence_tokens(x: SequenceSample, params: SequenceEmbedParams, config: EmbedConfig) -> Tensor:
    return add_positional(tcn_extract(seq_embed(x, params, config), params), params.position)


def receptive_field(kernel_size: int, dilations: tuple[int, ...]) -> int:
    return 1 + sum((kernel_size - 1) * d for d in dilations)


# -- initialisation --------------------------------------------------------


def _init_position(rng: np.random.Generator, config: EmbedConfig) -> Tensor:
    return param(rng.normal(0.0, 0.02, size=(config.token_count, config.model_dim)))


def init_image_embed(rng: np.random.Generator, config: EmbedConfig) -> ImageEmbedParams:
    return ImageEmbedParams(
        proj=init_linear(rng, config.patch_dim, config.model_dim),
        position=_init_position(rng, config),
    )


def init_sequence_embed(rng: np.random.Generator, config: EmbedConfig) -> SequenceEmbedParams:
    tcn_cfg = config.tcn
    layers = []
    c_in = config.sequence_dim
    for c_out, dilation in zip(tcn_cfg.channels, tcn_cfg.dilations):
        bound = 1.0 / math.sqrt(tcn_cfg.kernel_size * c_in)
        kernels = rng.uniform(-bound, bound, size=(tcn_cfg.kernel_size, c_in, c_out))
        layers.append(TCNLayerParams(param(kernels), param(np.zeros(c_out)), dilation))
        c_in = c_out
    out_proj = None if c_in == config.model_dim else init_linear(rng, c_in, config.model_dim)
    return SequenceEmbedParams(
        embed=init_linear(rng, config.frame_length, config.sequence_dim),
        tcn=layers,
        out_proj=out_proj,
        position=_init_position(rng, config),
    )
