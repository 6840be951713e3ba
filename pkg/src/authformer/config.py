"""Typed run configuration: defaults <- AUTHFORMER_SEED <- config file <- flags."""

import json
import os
from pathlib import Path
from typing import Any, Literal, Optional

import toml
from dotenv import load_dotenv
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from authformer.errors import ConfigError
from authformer.modalities import Modality, parse_combination

SEED_ENV_VAR = "AUTHFORMER_SEED"
DEFAULT_SEED = 42


class TCNConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    kernel_size: int = Field(3, ge=1)
    dilations: tuple[int, ...] = (1, 2)
    channels: tuple[int, ...] = (32, 64)

    @field_validator("dilations", "channels")
    @classmethod
    def validate_positive(cls, v: tuple[int, ...]):
        if not v or any(x < 1 for x in v):
            raise ValueError(f"must be a non-empty list of positive integers, got {list(v)}")
        return v

    @model_validator(mode="after")
    def validate_layers(self):
        if len(self.dilations) != len(self.channels):
            raise ValueError(
                f"dilation schedule ({len(self.dilations)} layers) and channel list "
                f"({len(self.channels)} layers) disagree"
            )
        return self

    @property
    def layers(self) -> int:
        return len(self.channels)


class EmbedConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    image_size: int = Field(32, ge=1)
    image_channels: int = Field(1, ge=1)
    patch_size: int = Field(8, ge=1)
    model_dim: int = Field(64, ge=1)
    sequence_length: int = Field(256, ge=1)
    frame_length: int = Field(16, ge=1)
    hop_length: int = Field(16, ge=1)
    sequence_dim: int = Field(32, ge=1)
    tcn: TCNConfig = TCNConfig()

    @model_validator(mode="after")
    def validate_geometry(self):
        if self.image_size % self.patch_size:
            raise ValueError(
                f"image size {self.image_size} is not divisible by patch size {self.patch_size}"
            )
        if self.sequence_length < self.min_sequence_length:
            raise ValueError(
                f"sequence length {self.sequence_length} yields fewer than "
                f"{self.token_count} frames (needs >= {self.min_sequence_length})"
            )
        return self

    @property
    def token_count(self) -> int:
        """N: patches per image, which sequence framing must match."""
        return (self.image_size // self.patch_size) ** 2

    @property
    def patch_dim(self) -> int:
        return self.patch_size * self.patch_size * self.image_channels

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return (self.image_size, self.image_size, self.image_channels)

    @property
    def min_sequence_length(self) -> int:
        return self.frame_length + (self.token_count - 1) * self.hop_length


class ModelConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    embed: EmbedConfig = EmbedConfig()
    heads: int = Field(4, ge=1)
    mlp_ratio: int = Field(2, ge=1)
    layers: int = Field(2, ge=0)
    dropout: float = Field(0.0, ge=0.0, lt=1.0)
    num_classes: int = Field(8, ge=2)
    modalities: tuple[Modality, ...] = (Modality.FACE, Modality.FINGERPRINT, Modality.VOICE)

    @field_validator("modalities", mode="before")
    @classmethod
    def validate_modalities(cls, v: Any):
        return parse_combination(v)

    @model_validator(mode="after")
    def validate_heads(self):
        if self.embed.model_dim % self.heads:
            raise ValueError(
                f"model dim {self.embed.model_dim} is not divisible by {self.heads} heads"
            )
        return self

    @property
    def model_dim(self) -> int:
        return self.embed.model_dim


class TrainConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    epochs: int = Field(30, ge=0)
    batch_size: int = Field(16, ge=1)
    learning_rate: float = Field(1e-3, ge=0.0)
    optimizer: Literal["adam", "sgd"] = "adam"
    beta1: float = Field(0.9, ge=0.0, lt=1.0)
    beta2: float = Field(0.999, ge=0.0, lt=1.0)
    eps: float = Field(1e-8, gt=0.0)
    momentum: float = Field(0.9, ge=0.0, lt=1.0)
    seed: int = DEFAULT_SEED
    dtype: Literal["float32", "float64"] = "float32"
    impostors_per_sample: Optional[int] = Field(None, ge=1)
    show_progress: bool = False


class SynthConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    num_classes: int = Field(8, ge=2)
    samples_per_class: int = Field(40, ge=2)
    noise_level: float = Field(0.25, ge=0.0)
    test_fraction: float = Field(0.25, gt=0.0, lt=1.0)
    seed: int = DEFAULT_SEED


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    model: ModelConfig = ModelConfig()
    train: TrainConfig = TrainConfig()
    synth: SynthConfig = SynthConfig()
    data_dir: Optional[str] = None
    checkpoint: Optional[str] = None
    out: Optional[str] = None
    jobs: int = Field(1, ge=1)
    log_level: str = "INFO"


def tiny_model_config(
    modalities: tuple[Modality, ...] = (Modality.FACE, Modality.FINGERPRINT, Modality.VOICE),
    num_classes: int = 3,
    layers: int = 2,
) -> ModelConfig:
    """Gradient-check geometry: N=4, D=8, h=2."""
    embed = EmbedConfig(
        image_size=4,
        patch_size=2,
        model_dim=8,
        sequence_length=16,
        frame_length=4,
        hop_length=4,
        sequence_dim=4,
        tcn=TCNConfig(kernel_size=3, dilations=(1, 2), channels=(8, 8)),
    )
    return ModelConfig(
        embed=embed, heads=2, mlp_ratio=2, layers=layers, num_classes=num_classes,
        modalities=modalities,
    )


def load_config_file(config_path: str) -> dict[str, Any]:
    """
    Load a TOML or JSON configuration file into a plain dict.
    """
    config_path_obj = Path(config_path).resolve()
    logger.info(f"Loading configuration from: {config_path_obj}")
    try:
        with open(str(config_path_obj), "r", encoding="utf-8") as config_file:
            if config_path_obj.suffix == ".json":
                return json.load(config_file)
            return toml.load(config_file)
    except FileNotFoundError:
        raise ConfigError(f"Configuration file not found at {config_path}")
    except (toml.TomlDecodeError, json.JSONDecodeError) as e:
        raise ConfigError(f"Error decoding configuration file {config_path}: {e}")


def env_seed() -> Optional[int]:
    load_dotenv()
    raw = os.getenv(SEED_ENV_VAR)
    if raw is None or not raw.strip():
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got '{raw}'")


def _deep_merge(base: dict[str, Any], update: dict[str, Any]) -> dict[str, Any]:
    merged = dict(base)
    for key, value in update.items():
        if value is None:
            continue
        if isinstance(value, dict):
            base_value = merged.get(key)
            merged[key] = _deep_merge(base_value if isinstance(base_value, dict) else {}, value)
        else:
            merged[key] = value
    return merged


def resolve_run_config(
    config_file: Optional[str] = None, overrides: Optional[dict[str, Any]] = None
) -> RunConfig:
    """Merge defaults, the seed environment variable, a config file and flag overrides."""
    merged: dict[str, Any] = {}
    seed = env_seed()
    if seed is not None:
        merged = _deep_merge(merged, {"train": {"seed": seed}, "synth": {"seed": seed}})
    if config_file:
        merged = _deep_merge(merged, load_config_file(config_file))
    if overrides:
        merged = _deep_merge(merged, overrides)
    try:
        return RunConfig.model_validate(merged)
    except ValidationError as e:
        raise ConfigError(str(e)) from e
