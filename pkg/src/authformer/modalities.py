"""Biometric modality tags, combination parsing and canonical ordering."""

from enum import StrEnum
from typing import Iterable, Union

from authformer.errors import RouteError


class Modality(StrEnum):
    FACE = "face"
    FINGERPRINT = "fingerprint"
    PALMPRINT = "palmprint"
    VOICE = "voice"

    @property
    def is_image(self) -> bool:
        return self is not Modality.VOICE

    @property
    def label(self) -> str:
        return _LABELS[self]


_LABELS = {
    Modality.FACE: "Face",
    Modality.FINGERPRINT: "Finger",
    Modality.PALMPRINT: "Palmprint",
    Modality.VOICE: "Voice",
}

_ALIASES = {
    "face": Modality.FACE,
    "finger": Modality.FINGERPRINT,
    "fingerprint": Modality.FINGERPRINT,
    "palm": Modality.PALMPRINT,
    "palmprint": Modality.PALMPRINT,
    "voice": Modality.VOICE,
}

# Lower rank = query side of the image pair.
IMAGE_PRIORITY = (Modality.FACE, Modality.FINGERPRINT, Modality.PALMPRINT)
IMAGE_MODALITIES = IMAGE_PRIORITY


def image_rank(modality: Modality) -> int:
    return IMAGE_PRIORITY.index(modality)


def parse_modality(tag: Union[str, Modality]) -> Modality:
    if isinstance(tag, Modality):
        return tag
    key = str(tag).strip().lower()
    if key not in _ALIASES:
        raise RouteError(
            f"unknown modality '{tag}' (expected one of: {', '.join(sorted(_ALIASES))})"
        )
    return _ALIASES[key]


def canonical_combination(modalities: Iterable[Modality]) -> tuple[Modality, ...]:
    """Validate a modality set and return it as (images by priority..., voice)."""
    mods = list(modalities)
    if not mods:
        raise RouteError("no modality provided")
    if len(set(mods)) != len(mods):
        raise RouteError(f"duplicate modality in {[m.value for m in mods]}")
    images = sorted((m for m in mods if m.is_image), key=image_rank)
    if len(images) > 2:
        raise RouteError("at most two image modalities")
    voice = [m for m in mods if not m.is_image]
    return tuple(images + voice)


def parse_combination(
    text: Union[str, Iterable[Union[str, Modality]]],
) -> tuple[Modality, ...]:
    """Parse ``"face,finger,voice"`` (or an iterable of tags) into a canonical tuple."""
    if isinstance(text, str):
        parts = [p for p in text.split(",") if p.strip()]
    else:
        parts = list(text)
    return canonical_combination(parse_modality(p) for p in parts)


def combination_label(modalities: Iterable[Modality]) -> str:
    return " & ".join(m.label for m in modalities)
