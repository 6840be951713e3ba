"""``manifest.json``: what a dataset directory holds."""

import json
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ValidationError

from authformer.data.storage import PathLike, atomic_write_text, read_bytes
from authformer.errors import AuthFormerValidationError, FormatError, RouteError, UnsupportedVersionError
from authformer.modalities import Modality, parse_modality

MANIFEST_NAME = "manifest.json"
DATASET_VERSION = "authformer-dataset/1"


class ModalityDescriptor(BaseModel):
    tag: str
    shape: list[int]
    blob: str

    @property
    def modality(self) -> Modality:
        return parse_modality(self.tag)


class SampleRecord(BaseModel):
    id: int
    label: int
    split: Literal["train", "test"]


class DatasetManifest(BaseModel):
    version: str = DATASET_VERSION
    num_classes: int
    samples_per_class: int
    seed: int
    noise_level: float
    test_fraction: float
    modalities: list[ModalityDescriptor]
    samples: list[SampleRecord]

    def descriptor(self, modality: Modality) -> ModalityDescriptor:
        for d in self.modalities:
            if d.modality == modality:
                return d
        raise RouteError(f"dataset has no '{modality}' modality")


def write_manifest(directory: PathLike, manifest: DatasetManifest) -> Path:
    return atomic_write_text(Path(directory) / MANIFEST_NAME, manifest.model_dump_json(indent=2) + "\n")


def read_manifest(directory: PathLike) -> DatasetManifest:
    path = Path(directory) / MANIFEST_NAME
    raw = read_bytes(path, "dataset manifest")
    try:
        payload = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"{path}: not valid UTF-8 JSON: {e}") from e
    if isinstance(payload, dict) and payload.get("version", DATASET_VERSION) != DATASET_VERSION:
        raise UnsupportedVersionError(
            f"{path}: field 'version' is '{payload['version']}', expected '{DATASET_VERSION}'"
        )
    try:
        manifest = DatasetManifest.model_validate(payload)
    except ValidationError as e:
        raise FormatError(f"{path}: {e}") from e

    seen = set()
    for i, d in enumerate(manifest.modalities):
        try:
            modality = d.modality
        except RouteError as e:
            raise AuthFormerValidationError(f"{path}: field 'modalities[{i}].tag': {e}") from e
        if modality in seen:
            raise AuthFormerValidationError(f"{path}: field 'modalities[{i}].tag': duplicate '{modality}'")
        seen.add(modality)
    return manifest
