"""Deterministic synthetic face / fingerprint / palmprint / voice data.

Each class gets one prototype per modality: a smooth random field in [0, 1]
for images and a mix of three sinusoids for voice. Samples add Gaussian
noise to their class prototype; voice gets twice the image noise so the
modality combinations separate measurably.
"""

from pathlib import Path
from typing import Optional

import numpy as np
from loguru import logger

from authformer.config import EmbedConfig
from authformer.data.dataset import Dataset, split_assignment, write_dataset
from authformer.data.manifest import DatasetManifest, ModalityDescriptor, SampleRecord
from authformer.data.storage import PathLike
from authformer.errors import AuthFormerValidationError
from authformer.modalities import Modality

MODALITY_ORDER = (Modality.FACE, Modality.FINGERPRINT, Modality.PALMPRINT, Modality.VOICE)
FIELD_GRID = 4
VOICE_TONES = 3
VOICE_NOISE_FACTOR = 2.0


def smooth_field(rng: np.random.Generator, size: int, channels: int, grid: int = FIELD_GRID) -> np.ndarray:
    """Bilinear upsampling of a ``(grid+1)^2`` normal lattice, min-max scaled to [0, 1]."""
    coarse = rng.standard_normal((grid + 1, grid + 1, channels))
    knots = np.linspace(0.0, 1.0, grid + 1)
    points = np.linspace(0.0, 1.0, size)
    rows = np.stack(
        [np.stack([np.interp(points, knots, coarse[:, j, c]) for j in range(grid + 1)], axis=1) for c in range(channels)],
        axis=-1,
    )  # [size, grid+1, C]
    field = np.stack(
        [np.stack([np.interp(points, knots, rows[i, :, c]) for i in range(size)], axis=0) for c in range(channels)],
        axis=-1,
    )  # [size, size, C]
    lo, hi = field.min(), field.max()
    return (field - lo) / (hi - lo) if hi > lo else np.zeros_like(field)


def tone_mix(rng: np.random.Generator, length: int, tones: int = VOICE_TONES) -> np.ndarray:
    """Mean of ``tones`` sinusoids, 2 to 24 cycles over the signal, random phases."""
    t = np.arange(length) / length
    freqs = rng.uniform(2.0, 24.0, size=tones)
    phases = rng.uniform(0.0, 2 * np.pi, size=tones)
    return np.mean(np.sin(2 * np.pi * freqs[:, None] * t[None, :] + phases[:, None]), axis=0)


def synthesize(
    num_classes: int,
    samples_per_class: int,
    seed: int,
    noise_level: float,
    embed: EmbedConfig,
) -> tuple[dict[Modality, np.ndarray], np.ndarray]:
    """Arrays per modality (class-major sample order) and their labels."""
    if num_classes < 2:
        raise AuthFormerValidationError(f"need at least 2 classes, got {num_classes}")
    if samples_per_class < 1:
        raise AuthFormerValidationError(f"need at least 1 sample per class, got {samples_per_class}")
    if noise_level < 0:
        raise AuthFormerValidationError(f"noise level must be >= 0, got {noise_level}")

    rng = np.random.default_rng(seed)
    size, channels = embed.image_size, embed.image_channels
    prototypes: dict[Modality, list[np.ndarray]] = {m: [] for m in MODALITY_ORDER}
    for _ in range(num_classes):
        for m in MODALITY_ORDER:
            proto = tone_mix(rng, embed.sequence_length) if m is Modality.VOICE else smooth_field(rng, size, channels)
            prototypes[m].append(proto)

    labels = np.repeat(np.arange(num_classes), samples_per_class)
    arrays = {}
    for m in MODALITY_ORDER:
        base = np.stack(prototypes[m])[labels]
        if m is Modality.VOICE:
            noisy = base + rng.normal(0.0, VOICE_NOISE_FACTOR * noise_level, size=base.shape)
            arrays[m] = np.clip(noisy, -1.0, 1.0).astype(np.float32)
        else:
            noisy = base + rng.normal(0.0, noise_level, size=base.shape)
            arrays[m] = np.clip(noisy, 0.0, 1.0).astype(np.float32)
    return arrays, labels


def generate_synthetic(
    out_dir: PathLike,
    num_classes: int = 8,
    samples_per_class: int = 40,
    seed: int = 42,
    noise_level: float = 0.25,
    test_fraction: float = 0.25,
    embed: Optional[EmbedConfig] = None,
) -> Dataset:
    embed = embed or EmbedConfig()
    arrays, labels = synthesize(num_classes, samples_per_class, seed, noise_level, embed)
    splits = split_assignment(labels, test_fraction, seed)
    ids = np.arange(labels.size)
    manifest = DatasetManifest(
        num_classes=num_classes,
        samples_per_class=samples_per_class,
        seed=seed,
        noise_level=noise_level,
        test_fraction=test_fraction,
        modalities=[
            ModalityDescriptor(tag=m.value, shape=list(arrays[m].shape), blob=f"{m.value}.atf")
            for m in MODALITY_ORDER
        ],
        samples=[
            SampleRecord(id=int(i), label=int(y), split=str(s)) for i, y, s in zip(ids, labels, splits)
        ],
    )
    write_dataset(Path(out_dir), manifest, arrays)
    logger.info(
        f"Generated {labels.size} samples ({num_classes} classes x {samples_per_class}) "
        f"with seed {seed}, noise {noise_level}"
    )
    return Dataset(arrays, labels, ids, splits, num_classes, manifest)
