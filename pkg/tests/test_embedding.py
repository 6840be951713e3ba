import numpy as np
import pytest

from authformer.config import EmbedConfig, TCNConfig
from authformer.errors import AuthFormerValidationError, ConfigError, ShapeError
from authformer.modalities import Modality
from authformer.model.embedding import (
    ImageSample,
    SequenceSample,
    TCNLayerParams,
    add_positional,
    frame_sequence,
    init_image_embed,
    init_sequence_embed,
    patch_embed,
    patchify,
    project_patches,
    receptive_field,
    seq_embed,
    sequence_tokens,
    tcn_extract,
)
from authformer.model.layers import LinearParams
from authformer.tensor import Tensor


@pytest.fixture
def embed8() -> EmbedConfig:
    return EmbedConfig(image_size=8, patch_size=4, model_dim=6, sequence_length=64, sequence_dim=5)


def test_patch_count_and_dim(embed8):
    params = init_image_embed(np.random.default_rng(0), embed8)
    img = ImageSample(np.random.default_rng(1).uniform(size=(8, 8, 1)), Modality.FACE)
    assert patchify(img.pixels, 4).shape == (4, 16)
    assert patch_embed(img, params, embed8).shape == (4, 6)


def test_zero_image_gives_projection_bias(embed8):
    params = init_image_embed(np.random.default_rng(0), embed8)
    bias = np.random.default_rng(2).normal(size=6)
    params.proj = LinearParams(params.proj.weight, Tensor(bias))
    params.position = Tensor(np.zeros((4, 6)))
    tokens = patch_embed(ImageSample(np.zeros((8, 8, 1)), Modality.FACE), params, embed8).data
    np.testing.assert_allclose(tokens, np.tile(bias, (4, 1)), atol=1e-12)


def test_one_changed_patch_changes_one_token(embed8):
    params = init_image_embed(np.random.default_rng(0), embed8)
    base = np.random.default_rng(3).uniform(size=(8, 8, 1))
    changed = base.copy()
    changed[1, 5, 0] = 0.0 if base[1, 5, 0] > 0.5 else 1.0  # row 1, column 5: patch (0, 1) -> token 1
    a = patch_embed(ImageSample(base, Modality.FACE), params, embed8).data
    b = patch_embed(ImageSample(changed, Modality.FACE), params, embed8).data
    differs = [i for i in range(4) if not np.allclose(a[i], b[i])]
    assert differs == [1]


def test_patch_permutation_permutes_tokens(embed8):
    params = init_image_embed(np.random.default_rng(0), embed8)
    img = np.random.default_rng(4).uniform(size=(8, 8, 1))
    swapped = img.copy()
    swapped[:4, :4], swapped[4:, 4:] = img[4:, 4:], img[:4, :4]
    a = project_patches(ImageSample(img, Modality.PALMPRINT), params, embed8).data
    b = project_patches(ImageSample(swapped, Modality.PALMPRINT), params, embed8).data
    np.testing.assert_allclose(b, a[[3, 1, 2, 0]], atol=1e-12)


def test_image_shape_mismatch(embed8):
    params = init_image_embed(np.random.default_rng(0), embed8)
    with pytest.raises(ShapeError, match="does not match"):
        patch_embed(ImageSample(np.zeros((4, 4, 1)), Modality.FACE), params, embed8)


def test_image_values_out_of_range():
    with pytest.raises(AuthFormerValidationError, match=r"\[0, 1\]"):
        ImageSample(np.full((4, 4, 1), 1.5), Modality.FINGERPRINT)


def test_voice_is_not_an_image():
    with pytest.raises(AuthFormerValidationError):
        ImageSample(np.zeros((4, 4, 1)), Modality.VOICE)


def test_framing_shape():
    assert frame_sequence(np.arange(64.0), 16, 16, 4).shape == (4, 16)


def test_framing_index_arithmetic():
    values = np.random.default_rng(5).normal(size=40)
    frames = frame_sequence(values, 16, 8, 4)
    for i in range(4):
        np.testing.assert_array_equal(frames[i], values[i * 8 : i * 8 + 16])


def test_sequence_too_short():
    with pytest.raises(AuthFormerValidationError, match="too short"):
        frame_sequence(np.zeros(60), 16, 16, 4)


def test_zero_signal_embeds_to_zero(embed8):
    params = init_sequence_embed(np.random.default_rng(0), embed8)
    e = seq_embed(SequenceSample(np.zeros(64)), params, embed8)
    assert e.shape == (4, 5)
    np.testing.assert_array_equal(e.data, np.zeros((4, 5)))


def test_sequence_tokens_match_image_geometry(embed8):
    params = init_sequence_embed(np.random.default_rng(0), embed8)
    tokens = sequence_tokens(SequenceSample(np.random.default_rng(6).normal(size=(3, 64))), params, embed8)
    assert tokens.shape == (3, 4, 6)


def test_identity_tap_reduces_to_affine():
    config = EmbedConfig(image_size=4, patch_size=2, model_dim=3, sequence_length=16, frame_length=4,
                         hop_length=4, sequence_dim=3, tcn=TCNConfig(kernel_size=2, dilations=(1,), channels=(3,)))
    params = init_sequence_embed(np.random.default_rng(0), config)
    kernels = np.zeros((2, 3, 3))
    kernels[1] = np.eye(3)
    params.tcn = [TCNLayerParams(Tensor(kernels), Tensor(np.zeros(3)), 1)]
    e = np.random.default_rng(7).uniform(0.1, 1.0, size=(4, 3))
    # Positive inputs pass the ReLU; the residual adds e once more.
    np.testing.assert_allclose(tcn_extract(Tensor(e), params).data, 2 * e, atol=1e-12)


@pytest.fixture
def tcn16():
    config = EmbedConfig(image_size=16, patch_size=4, model_dim=4, sequence_length=64, frame_length=4,
                         hop_length=4, sequence_dim=4, tcn=TCNConfig(kernel_size=3, dilations=(1, 2), channels=(4, 4)))
    params = init_sequence_embed(np.random.default_rng(8), config)
    rng = np.random.default_rng(9)
    params.tcn = [
        TCNLayerParams(Tensor(rng.uniform(0.1, 1.0, size=layer.kernels.shape)), Tensor(np.zeros(4)), layer.dilation)
        for layer in params.tcn
    ]
    return config, params


@pytest.mark.parametrize("step", [0, 5, 12])
def test_causality_and_receptive_field(tcn16, step):
    config, params = tcn16
    e = np.random.default_rng(10).uniform(0.1, 1.0, size=(16, 4))
    bumped = e.copy()
    bumped[step] += 1.0
    a = tcn_extract(Tensor(e), params).data
    b = tcn_extract(Tensor(bumped), params).data
    changed = [t for t in range(16) if not np.allclose(a[t], b[t])]
    rf = receptive_field(config.tcn.kernel_size, config.tcn.dilations)
    assert rf == 7
    assert changed == list(range(step, min(16, step + rf)))


def test_tcn_length_preserved(tcn16):
    _, params = tcn16
    assert tcn_extract(Tensor(np.ones((2, 16, 4))), params).shape == (2, 16, 4)


def test_tcn_channel_mismatch(tcn16):
    _, params = tcn16
    with pytest.raises(ConfigError, match="input channels"):
        tcn_extract(Tensor(np.ones((16, 3))), params)


def test_add_positional():
    rng = np.random.default_rng(11)
    f, p = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))
    np.testing.assert_array_equal(add_positional(Tensor(f), Tensor(np.zeros((4, 3)))).data, f)
    np.testing.assert_array_equal(add_positional(Tensor(np.zeros((4, 3))), Tensor(p)).data, p)
    np.testing.assert_allclose(add_positional(Tensor(f), Tensor(p)).data - f, p, atol=1e-12)
    with pytest.raises(ShapeError):
        add_positional(Tensor(f), Tensor(np.zeros((3, 3))))
