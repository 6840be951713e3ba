"""Adaptive routing: pick the computation path from whichever modalities are present."""

from dataclasses import dataclass, replace
from enum import StrEnum
from typing import Mapping, NamedTuple, Optional, Union

import numpy as np

from authformer.errors import RouteError, ShapeError
from authformer.modalities import (
    Modality,
    canonical_combination,
    combination_label,
    image_rank,
    parse_modality,
)
from authformer.model.attention import self_attention_encoder
from authformer.model.embedding import ImageSample, SequenceSample, patch_embed, sequence_tokens
from authformer.model.fusion import fuse_images, grn_fuse
from authformer.model.layers import linear, norm
from authformer.model.params import AuthFormerParams, HeadParams
from authformer.tensor import Tensor, mean_pool, no_grad


class RoutePlan(StrEnum):
    SINGLE_IMAGE = "single_image"
    SINGLE_SEQUENCE = "single_sequence"
    IMAGE_PAIR = "image_pair"
    IMAGE_PLUS_SEQUENCE = "image_plus_sequence"
    IMAGE_PAIR_PLUS_SEQUENCE = "image_pair_plus_sequence"


class TaggedTokens(NamedTuple):
    modality: Modality
    tokens: Tensor


@dataclass(frozen=True)
class ModalityBundle:
    """Embedded tokens for up to two image modalities and one sequence modality."""

    image_a: Optional[TaggedTokens] = None
    image_b: Optional[TaggedTokens] = None
    sequence: Optional[TaggedTokens] = None

    def __post_init__(self):
        images = [e for e in (self.image_a, self.image_b) if e is not None]
        if not images and self.sequence is None:
            raise RouteError("no modality provided")
        for entry in images:
            if not entry.modality.is_image:
                raise RouteError(f"{entry.modality} cannot fill an image slot")
        if len(images) == 2 and images[0].modality == images[1].modality:
            raise RouteError(f"duplicate image modality {images[0].modality}")
        if self.sequence is not None and self.sequence.modality.is_image:
            raise RouteError(f"{self.sequence.modality} cannot fill the sequence slot")

    @classmethod
    def from_tokens(cls, tokens: Mapping[Union[str, Modality], Tensor]) -> "ModalityBundle":
        tagged = {parse_modality(k): v for k, v in tokens.items()}
        order = canonical_combination(tagged)
        images = [TaggedTokens(m, tagged[m]) for m in order if m.is_image]
        sequence = [TaggedTokens(m, tagged[m]) for m in order if not m.is_image]
        return cls(
            image_a=images[0] if images else None,
            image_b=images[1] if len(images) > 1 else None,
            sequence=sequence[0] if sequence else None,
        )

    @property
    def images(self) -> list[TaggedTokens]:
        return [e for e in (self.image_a, self.image_b) if e is not None]

    def canonical(self) -> "ModalityBundle":
        """Images ordered by priority face > fingerprint > palmprint (first is the query side)."""
        images = sorted(self.images, key=lambda e: image_rank(e.modality))
        return replace(
            self,
            image_a=images[0] if images else None,
            image_b=images[1] if len(images) > 1 else None,
        )

    @property
    def modalities(self) -> tuple[Modality, ...]:
        canon = self.canonical()
        tags = [e.modality for e in canon.images]
        if canon.sequence is not None:
            tags.append(canon.sequence.modality)
        return tuple(tags)

    @property
    def label(self) -> str:
        return combination_label(self.modalities)


def plan_route(bundle: ModalityBundle) -> RoutePlan:
    n_images = len(bundle.images)
    has_sequence = bundle.sequence is not None
    match (n_images, has_sequence):
        case (1, False):
            return RoutePlan.SINGLE_IMAGE
        case (0, True):
            return RoutePlan.SINGLE_SEQUENCE
        case (2, False):
            return RoutePlan.IMAGE_PAIR
        case (1, True):
            return RoutePlan.IMAGE_PLUS_SEQUENCE
        case (2, True):
            return RoutePlan.IMAGE_PAIR_PLUS_SEQUENCE
    raise RouteError("no modality provided")


def _require_modalities(modalities: tuple[Modality, ...], params: AuthFormerParams) -> None:
    trained = params.config.modalities
    absent = [m for m in modalities if m not in trained]
    if absent:
        raise RouteError(
            f"modalities {[m.value for m in absent]} are not part of this model "
            f"(built for {combination_label(trained)})"
        )


def embed_bundle(inputs: Mapping[Union[str, Modality], np.ndarray], params: AuthFormerParams) -> ModalityBundle:
    """Embed raw per-modality arrays (optionally batched) into a bundle of tokens."""
    raw = {parse_modality(k): np.asarray(v) for k, v in inputs.items()}
    order = canonical_combination(raw)
    _require_modalities(order, params)
    embed = params.config.embed
    tokens: dict[Modality, Tensor] = {}
    for m in order:
        if m.is_image:
            tokens[m] = patch_embed(ImageSample(raw[m], m), params.image_embeds[m], embed)
        else:
            tokens[m] = sequence_tokens(SequenceSample(raw[m], m), params.sequence_embed, embed)
    return ModalityBundle.from_tokens(tokens)


def classify(z: Tensor, head: HeadParams) -> Tensor:
    """Mean-pool the tokens, then project to class logits."""
    return linear(mean_pool(z, axis=-2), head.classifier)


def forward(
    bundle: ModalityBundle,
    params: AuthFormerParams,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    """Class logits ``[..., num_classes]`` for the route the bundle's occupancy selects.

    ``rng`` enables encoder dropout (training only).
    """
    bundle = bundle.canonical()
    _require_modalities(bundle.modalities, params)
    entries = bundle.images + ([bundle.sequence] if bundle.sequence is not None else [])
    shapes = {e.tokens.shape for e in entries}
    if len(shapes) > 1:
        raise ShapeError(
            "token shapes differ between modalities: "
            + ", ".join(f"{e.modality}={e.tokens.shape}" for e in entries)
        )

    config = params.config

    def encode(entry: TaggedTokens) -> Tensor:
        return self_attention_encoder(
            entry.tokens, params.encoders[entry.modality], config.layers, config.dropout, rng
        )

    plan = plan_route(bundle)
    match plan:
        case RoutePlan.SINGLE_IMAGE:
            z = norm(encode(bundle.image_a), params.output_norm)
        case RoutePlan.SINGLE_SEQUENCE:
            z = norm(encode(bundle.sequence), params.output_norm)
        case RoutePlan.IMAGE_PAIR:
            state = fuse_images(encode(bundle.image_a), encode(bundle.image_b), params.stage1, params.stage2)
            z = norm(state.b_fusion, params.output_norm)
        case RoutePlan.IMAGE_PLUS_SEQUENCE:
            z = grn_fuse(encode(bundle.image_a), encode(bundle.sequence), params.grn)
        case RoutePlan.IMAGE_PAIR_PLUS_SEQUENCE:
            state = fuse_images(encode(bundle.image_a), encode(bundle.image_b), params.stage1, params.stage2)
            z = grn_fuse(state.b_fusion, encode(bundle.sequence), params.grn)
    return classify(z, params.head)


class Prediction(NamedTuple):
    index: np.ndarray
    probabilities: np.ndarray


def predict_from_logits(logits: np.ndarray) -> Prediction:
    """Argmax of softmax; ties go to the lowest class index."""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    probs = e / e.sum(axis=-1, keepdims=True)
    return Prediction(np.argmax(logits, axis=-1), probs)


def predict(bundle: ModalityBundle, params: AuthFormerParams) -> Prediction:
    with no_grad():
        logits = forward(bundle, params)
    return predict_from_logits(logits.data)
