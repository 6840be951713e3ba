import json

import pytest

from authformer.config import (
    EmbedConfig,
    ModelConfig,
    RunConfig,
    TCNConfig,
    TrainConfig,
    load_config_file,
    resolve_run_config,
    tiny_model_config,
)
from authformer.errors import ConfigError
from authformer.modalities import Modality


@pytest.fixture(autouse=True)
def _no_seed_env(monkeypatch):
    monkeypatch.delenv("AUTHFORMER_SEED", raising=False)


def test_defaults():
    config = resolve_run_config()
    assert config == RunConfig()
    assert config.model.layers == 2
    assert config.model.modalities == (Modality.FACE, Modality.FINGERPRINT, Modality.VOICE)
    assert config.model.embed.token_count == 16
    assert config.train.seed == config.synth.seed == 42


def test_seed_from_environment(monkeypatch):
    monkeypatch.setenv("AUTHFORMER_SEED", "123")
    config = resolve_run_config()
    assert config.train.seed == 123
    assert config.synth.seed == 123


def test_invalid_seed_environment(monkeypatch):
    monkeypatch.setenv("AUTHFORMER_SEED", "abc")
    with pytest.raises(ConfigError, match="AUTHFORMER_SEED"):
        resolve_run_config()


def test_toml_file(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text('[model]\nlayers = 4\nmodalities = "palm,voice"\n\n[train]\nepochs = 3\n')
    config = resolve_run_config(str(path))
    assert config.model.layers == 4
    assert config.model.modalities == (Modality.PALMPRINT, Modality.VOICE)
    assert config.train.epochs == 3
    assert config.train.batch_size == 16


def test_json_file(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"model": {"embed": {"tcn": {"kernel_size": 5}}}, "jobs": 3}))
    config = resolve_run_config(str(path))
    assert config.model.embed.tcn.kernel_size == 5
    assert config.model.embed.tcn.channels == (32, 64)
    assert config.jobs == 3


def test_overrides_beat_file_and_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("AUTHFORMER_SEED", "5")
    path = tmp_path / "run.toml"
    path.write_text("[train]\nseed = 6\nepochs = 3\n")
    config = resolve_run_config(str(path), {"train": {"seed": 7, "epochs": None}, "model": {"layers": None}})
    assert config.train.seed == 7
    assert config.train.epochs == 3
    assert config.synth.seed == 5
    assert config.model.layers == 2


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config_file(str(tmp_path / "absent.toml"))


def test_malformed_toml(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("[model\nlayers = ")
    with pytest.raises(ConfigError, match="decoding"):
        load_config_file(str(path))


def test_validation_errors_become_config_errors():
    with pytest.raises(ConfigError):
        resolve_run_config(overrides={"train": {"optimizer": "rmsprop"}})


def test_patch_size_must_divide_image():
    with pytest.raises(ValueError, match="not divisible by patch size"):
        EmbedConfig(image_size=30, patch_size=8)


def test_sequence_must_yield_enough_frames():
    with pytest.raises(ValueError, match="needs >= 256"):
        EmbedConfig(sequence_length=200)


def test_heads_must_divide_model_dim():
    with pytest.raises(ValueError, match="not divisible by 3 heads"):
        ModelConfig(heads=3)


def test_tcn_schedule_lengths():
    with pytest.raises(ValueError, match="disagree"):
        TCNConfig(dilations=(1, 2, 4), channels=(8, 8))
    with pytest.raises(ValueError, match="positive"):
        TCNConfig(dilations=(1, 0), channels=(8, 8))


def test_three_images_rejected():
    with pytest.raises(ValueError, match="at most two image"):
        ModelConfig(modalities="face,finger,palm")


def test_tiny_geometry():
    config = tiny_model_config()
    assert config.embed.token_count == 4
    assert config.model_dim == 8
    assert config.embed.min_sequence_length == 16
    assert TrainConfig().optimizer == "adam"
