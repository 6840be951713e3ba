"""All learnable weights of one model, addressable by dotted name."""

from dataclasses import dataclass, fields, is_dataclass
from enum import Enum
from typing import Any, Callable, Iterator, Optional

import numpy as np
from loguru import logger

from authformer.config import ModelConfig
from authformer.errors import ConfigError, ShapeError
from authformer.modalities import Modality
from authformer.model.attention import AttentionBlockParams, init_encoder
from authformer.model.embedding import (
    ImageEmbedParams,
    SequenceEmbedParams,
    init_image_embed,
    init_sequence_embed,
)
from authformer.model.fusion import CrossBlockParams, GRNParams, init_cross_block, init_grn
from authformer.model.layers import LayerNormParams, LinearParams, init_layer_norm, init_linear
from authformer.tensor import Tensor


@dataclass
class HeadParams:
    """Token mean-pool followed by ``classifier`` (``[D, num_classes]``)."""

    classifier: LinearParams

    @property
    def num_classes(self) -> int:
        return self.classifier.weight.shape[1]


def _segment(key: Any) -> str:
    return key.value if isinstance(key, Enum) else str(key)


def _walk(node: Any, prefix: str, seen: set[int]) -> Iterator[tuple[str, Tensor]]:
    if isinstance(node, Tensor):
        if id(node) not in seen:
            seen.add(id(node))
            yield prefix, node
    elif is_dataclass(node):
        for f in fields(node):
            if f.name == "config":
                continue
            yield from _walk(getattr(node, f.name), f"{prefix}.{f.name}" if prefix else f.name, seen)
    elif isinstance(node, dict):
        for key, value in node.items():
            yield from _walk(value, f"{prefix}.{_segment(key)}", seen)
    elif isinstance(node, (list, tuple)):
        for i, value in enumerate(node):
            yield from _walk(value, f"{prefix}.{i}", seen)


def _rebuild(node: Any, fn: Callable[[Tensor], Tensor], memo: dict[int, Any]) -> Any:
    if id(node) in memo:
        return memo[id(node)]
    if isinstance(node, Tensor):
        out = fn(node)
    elif is_dataclass(node):
        out = type(node)(
            **{
                f.name: getattr(node, f.name) if f.name == "config" else _rebuild(getattr(node, f.name), fn, memo)
                for f in fields(node)
            }
        )
    elif isinstance(node, dict):
        out = {key: _rebuild(value, fn, memo) for key, value in node.items()}
    elif isinstance(node, list):
        out = [_rebuild(value, fn, memo) for value in node]
    else:
        return node
    memo[id(node)] = out
    return out


@dataclass
class AuthFormerParams:
    config: ModelConfig
    image_embeds: dict[Modality, ImageEmbedParams]
    sequence_embed: Optional[SequenceEmbedParams]
    encoders: dict[Modality, list[AttentionBlockParams]]
    output_norm: LayerNormParams
    stage1: Optional[CrossBlockParams]
    stage2: Optional[CrossBlockParams]
    grn: Optional[GRNParams]
    head: HeadParams

    def named_tensors(self) -> list[tuple[str, Tensor]]:
        """Every distinct tensor once, in a fixed order; shared tensors keep their first name."""
        return list(_walk(self, "", set()))

    def parameters(self) -> list[Tensor]:
        return [t for _, t in self.named_tensors()]

    def count(self) -> int:
        return sum(t.size for t in self.parameters())

    @property
    def dtype(self) -> np.dtype:
        return self.head.classifier.weight.dtype

    def map_tensors(self, fn: Callable[[Tensor], Tensor]) -> "AuthFormerParams":
        """A structural copy with ``fn`` applied to every tensor; sharing is preserved."""
        return _rebuild(self, fn, {})

    def astype(self, dtype: type) -> "AuthFormerParams":
        return self.map_tensors(lambda t: Tensor(t.data, requires_grad=True, dtype=dtype))

    def clone(self) -> "AuthFormerParams":
        return self.astype(self.dtype.type)

    def get(self, name: str) -> Tensor:
        for n, t in self.named_tensors():
            if n == name:
                return t
        raise ConfigError(f"no parameter named '{name}'")

    def replace(self, name: str, tensor: Tensor) -> None:
        """Swap the tensor stored at ``name`` (every alias of its owner sees the new one)."""
        *path, last = name.split(".")
        node: Any = self
        for segment in path:
            node = self._step(node, segment, name)
        if not is_dataclass(node) or not hasattr(node, last):
            raise ConfigError(f"no parameter named '{name}'")
        current = getattr(node, last)
        if not isinstance(current, Tensor):
            raise ConfigError(f"'{name}' is not a tensor")
        if current.shape != tensor.shape:
            raise ShapeError(f"parameter '{name}' has shape {current.shape}, got {tensor.shape}")
        setattr(node, last, tensor)

    @staticmethod
    def _step(node: Any, segment: str, name: str) -> Any:
        if isinstance(node, dict):
            for key, value in node.items():
                if _segment(key) == segment:
                    return value
        elif isinstance(node, list) and segment.isdigit() and int(segment) < len(node):
            return node[int(segment)]
        elif is_dataclass(node) and hasattr(node, segment):
            return getattr(node, segment)
        raise ConfigError(f"no parameter named '{name}'")

    def state(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.named_tensors()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        """Overwrite every tensor from ``state``; array dtypes are kept as given."""
        named = dict(self.named_tensors())
        missing = sorted(set(named) - set(state))
        unexpected = sorted(set(state) - set(named))
        if missing or unexpected:
            raise ConfigError(f"parameter names disagree: missing={missing}, unexpected={unexpected}")
        for name, t in named.items():
            arr = state[name]
            if tuple(arr.shape) != t.shape:
                raise ShapeError(f"parameter '{name}' has shape {t.shape}, state holds {arr.shape}")
            t.data = np.array(arr, copy=True)
            t.grad = None


def init_params(config: ModelConfig, seed: int = 0) -> AuthFormerParams:
    """Build every weight the configured combination can route through, from one seeded generator."""
    rng = np.random.default_rng(seed)
    embed = config.embed
    dim = config.model_dim
    images = [m for m in config.modalities if m.is_image]
    has_sequence = Modality.VOICE in config.modalities

    image_embeds = {m: init_image_embed(rng, embed) for m in images}
    sequence_embed = init_sequence_embed(rng, embed) if has_sequence else None
    encoders = {
        m: init_encoder(rng, dim, config.heads, config.mlp_ratio, config.layers)
        for m in config.modalities
    }
    output_norm = init_layer_norm(dim)
    stage1 = stage2 = None
    if len(images) == 2:
        stage1 = init_cross_block(rng, dim, config.heads, config.mlp_ratio)
        stage2 = init_cross_block(rng, dim, config.heads, config.mlp_ratio)
    grn = init_grn(rng, dim, output_norm=output_norm) if images and has_sequence else None
    head = HeadParams(init_linear(rng, dim, config.num_classes))

    params = AuthFormerParams(
        config=config,
        image_embeds=image_embeds,
        sequence_embed=sequence_embed,
        encoders=encoders,
        output_norm=output_norm,
        stage1=stage1,
        stage2=stage2,
        grn=grn,
        head=head,
    )
    logger.debug(f"Initialised {params.count()} parameters for {[m.value for m in config.modalities]}")
    return params
