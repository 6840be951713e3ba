import numpy as np
import pytest

from authformer.config import ModelConfig, TrainConfig, tiny_model_config
from authformer.data.synthetic import generate_synthetic
from authformer.modalities import Modality
from authformer.model.params import init_params
from authformer.tensor import float64

TRIMODAL = (Modality.FACE, Modality.FINGERPRINT, Modality.VOICE)


@pytest.fixture(autouse=True)
def _float64_default():
    """Numerical checks compare at 64-bit; training runs pick their own dtype from TrainConfig."""
    with float64():
        yield


@pytest.fixture
def tiny_config() -> ModelConfig:
    return tiny_model_config()


@pytest.fixture
def tiny_params(tiny_config):
    return init_params(tiny_config, seed=3)


def raw_inputs(config: ModelConfig, modalities, batch: int = 2, seed: int = 0) -> dict:
    """Random in-range inputs for every requested modality."""
    rng = np.random.default_rng(seed)
    embed = config.embed
    out = {}
    for m in modalities:
        if m.is_image:
            out[m] = rng.uniform(size=(batch, *embed.image_shape))
        else:
            out[m] = rng.uniform(-1.0, 1.0, size=(batch, embed.sequence_length))
    return out


@pytest.fixture
def tiny_dataset(tmp_path, tiny_config):
    return generate_synthetic(
        tmp_path / "tiny",
        num_classes=3,
        samples_per_class=6,
        seed=7,
        noise_level=0.05,
        test_fraction=0.34,
        embed=tiny_config.embed,
    )


@pytest.fixture
def fast_train() -> TrainConfig:
    return TrainConfig(epochs=1, batch_size=4, learning_rate=1e-2, seed=5, dtype="float64")


@pytest.fixture
def make_inputs():
    return raw_inputs
