"""In-memory multimodal datasets and stratified splitting."""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
from loguru import logger

from authformer.data.blob import read_blob, write_blob
from authformer.data.manifest import DatasetManifest, read_manifest, write_manifest
from authformer.data.storage import PathLike
from authformer.errors import AuthFormerValidationError, FormatError, RouteError
from authformer.modalities import Modality


@dataclass
class Dataset:
    """Samples along axis 0 of every modality array; ``labels``/``ids``/``splits`` align with it."""

    arrays: dict[Modality, np.ndarray]
    labels: np.ndarray
    ids: np.ndarray
    splits: np.ndarray
    num_classes: int
    manifest: Optional[DatasetManifest] = field(default=None, repr=False)

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def modalities(self) -> tuple[Modality, ...]:
        return tuple(self.arrays)

    def subset(self, index: np.ndarray) -> "Dataset":
        index = np.asarray(index)
        return Dataset(
            arrays={m: a[index] for m, a in self.arrays.items()},
            labels=self.labels[index],
            ids=self.ids[index],
            splits=self.splits[index],
            num_classes=self.num_classes,
            manifest=self.manifest,
        )

    def split(self, name: str) -> "Dataset":
        return self.subset(np.flatnonzero(self.splits == name))

    def train(self) -> "Dataset":
        return self.split("train")

    def test(self) -> "Dataset":
        return self.split("test")

    def inputs(self, modalities: Iterable[Modality], index: Optional[np.ndarray] = None) -> dict[Modality, np.ndarray]:
        """Per-modality arrays for ``modalities`` (rows ``index`` when given)."""
        out = {}
        for m in modalities:
            if m not in self.arrays:
                raise RouteError(f"dataset has no '{m}' modality (has {[x.value for x in self.arrays]})")
            out[m] = self.arrays[m] if index is None else self.arrays[m][index]
        return out


def split_assignment(labels: np.ndarray, test_fraction: float, seed: int) -> np.ndarray:
    """Stratified train/test tags: per class, ``round(n * f)`` test samples clamped to ``[1, n-1]``."""
    if not 0.0 < test_fraction < 1.0:
        raise AuthFormerValidationError(f"test fraction must lie in (0, 1), got {test_fraction}")
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    splits = np.full(labels.shape[0], "train", dtype="<U5")
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        n = members.size
        if n < 2:
            raise AuthFormerValidationError(f"class {c} has {n} sample(s); splitting needs at least 2")
        n_test = min(max(int(np.floor(n * test_fraction + 0.5)), 1), n - 1)
        splits[rng.permutation(members)[:n_test]] = "test"
    return splits


def split_dataset(dataset: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    splits = split_assignment(dataset.labels, test_fraction, seed)
    resplit = Dataset(dataset.arrays, dataset.labels, dataset.ids, splits, dataset.num_classes, dataset.manifest)
    return resplit.train(), resplit.test()


def write_dataset(directory: PathLike, manifest: DatasetManifest, arrays: dict[Modality, np.ndarray]) -> Path:
    """Blobs first, manifest last, each written atomically."""
    directory = Path(directory)
    for d in manifest.modalities:
        write_blob(directory / d.blob, arrays[d.modality])
    path = write_manifest(directory, manifest)
    logger.info(f"Dataset written to {directory} ({len(manifest.samples)} samples)")
    return path


def load_dataset(directory: PathLike) -> Dataset:
    directory = Path(directory)
    manifest = read_manifest(directory)
    n = len(manifest.samples)
    ids = np.array([s.id for s in manifest.samples], dtype=np.int64)
    labels = np.array([s.label for s in manifest.samples], dtype=np.int64)
    splits = np.array([s.split for s in manifest.samples], dtype="<U5")
    if np.unique(ids).size != n:
        raise FormatError(f"{directory / 'manifest.json'}: field 'samples': duplicate sample ids")
    if n and (labels.min() < 0 or labels.max() >= manifest.num_classes):
        raise FormatError(
            f"{directory / 'manifest.json'}: field 'samples.label': labels must lie in [0, {manifest.num_classes})"
        )

    arrays = {}
    for d in manifest.modalities:
        path = directory / d.blob
        array = read_blob(path)
        if list(array.shape) != d.shape:
            raise FormatError(f"{path}: field 'shape' is {list(array.shape)}, manifest declares {d.shape}")
        if array.shape[0] != n:
            raise FormatError(f"{path}: holds {array.shape[0]} samples, manifest lists {n}")
        if not np.all(np.isfinite(array)):
            raise FormatError(f"{path}: field 'payload' contains non-finite values")
        if d.modality.is_image and array.size and (array.min() < 0.0 or array.max() > 1.0):
            raise FormatError(f"{path}: field 'payload' has pixels outside [0, 1]")
        arrays[d.modality] = array
    logger.info(f"Loaded dataset {directory}: {n} samples, {manifest.num_classes} classes, "
                f"modalities {[m.value for m in arrays]}")
    return Dataset(arrays, labels, ids, splits, manifest.num_classes, manifest)
