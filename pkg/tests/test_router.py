import numpy as np
import pytest

from authformer.config import tiny_model_config
from authformer.errors import RouteError, ShapeError
from authformer.modalities import Modality, combination_label, parse_combination
from authformer.model.fusion import close_gate
from authformer.model.params import init_params
from authformer.model.router import (
    ModalityBundle,
    RoutePlan,
    TaggedTokens,
    embed_bundle,
    forward,
    plan_route,
    predict,
    predict_from_logits,
)
from authformer.tensor import Tensor
from authformer.training.harness import ABLATION_COMBINATIONS

FACE, FINGER, PALM, VOICE = Modality.FACE, Modality.FINGERPRINT, Modality.PALMPRINT, Modality.VOICE


def bundle_of(*modalities):
    return ModalityBundle.from_tokens({m: Tensor(np.zeros((4, 8))) for m in modalities})


@pytest.mark.parametrize(
    "modalities, plan",
    [
        ((FACE,), RoutePlan.SINGLE_IMAGE),
        ((VOICE,), RoutePlan.SINGLE_SEQUENCE),
        ((FINGER, FACE), RoutePlan.IMAGE_PAIR),
        ((PALM, VOICE), RoutePlan.IMAGE_PLUS_SEQUENCE),
        ((FINGER, FACE, VOICE), RoutePlan.IMAGE_PAIR_PLUS_SEQUENCE),
    ],
)
def test_plan_route(modalities, plan):
    assert plan_route(bundle_of(*modalities)) == plan


def test_thirteen_combinations_cover_every_plan():
    plans = [plan_route(bundle_of(*combo)) for combo in ABLATION_COMBINATIONS]
    assert len(plans) == 13
    assert {p: plans.count(p) for p in RoutePlan} == {
        RoutePlan.SINGLE_IMAGE: 3,
        RoutePlan.SINGLE_SEQUENCE: 1,
        RoutePlan.IMAGE_PAIR: 3,
        RoutePlan.IMAGE_PLUS_SEQUENCE: 3,
        RoutePlan.IMAGE_PAIR_PLUS_SEQUENCE: 3,
    }


def test_empty_bundle_rejected():
    with pytest.raises(RouteError, match="no modality provided"):
        ModalityBundle()


def test_three_images_rejected():
    with pytest.raises(RouteError, match="at most two image modalities"):
        parse_combination("face,finger,palmprint")
    with pytest.raises(RouteError, match="at most two image modalities"):
        bundle_of(FACE, FINGER, PALM)


def test_voice_cannot_fill_an_image_slot():
    with pytest.raises(RouteError, match="image slot"):
        ModalityBundle(image_a=TaggedTokens(VOICE, Tensor(np.zeros((4, 8)))))


def test_canonical_order():
    bundle = ModalityBundle(
        image_a=TaggedTokens(PALM, Tensor(np.zeros((4, 8)))),
        image_b=TaggedTokens(FACE, Tensor(np.zeros((4, 8)))),
    )
    assert bundle.modalities == (FACE, PALM)
    assert bundle.label == "Face & Palmprint"


@pytest.mark.parametrize("combo", ABLATION_COMBINATIONS, ids=combination_label)
def test_logit_shapes_for_every_combination(combo, make_inputs):
    config = tiny_model_config(modalities=combo, num_classes=8)
    params = init_params(config, seed=1)
    batched = forward(embed_bundle(make_inputs(config, combo, batch=3), params), params)
    assert batched.shape == (3, 8)
    single = {m: a[0] for m, a in make_inputs(config, combo, batch=1).items()}
    assert forward(embed_bundle(single, params), params).shape == (8,)
    assert np.isfinite(batched.data).all()


def test_image_order_does_not_change_logits(make_inputs):
    config = tiny_model_config(modalities=(FACE, PALM, VOICE))
    params = init_params(config, seed=2)
    raw = make_inputs(config, (FACE, PALM, VOICE))
    reordered = {VOICE: raw[VOICE], PALM: raw[PALM], FACE: raw[FACE]}
    a = forward(embed_bundle(raw, params), params).data
    b = forward(embed_bundle(reordered, params), params).data
    np.testing.assert_allclose(a, b, atol=1e-6)

    tokens = embed_bundle(raw, params)
    swapped = ModalityBundle(image_a=tokens.image_b, image_b=tokens.image_a, sequence=tokens.sequence)
    np.testing.assert_allclose(forward(swapped, params).data, a, atol=1e-6)


def test_closed_gate_matches_image_pair_route(make_inputs):
    config = tiny_model_config()
    params = init_params(config, seed=4)
    close_gate(params.grn)
    raw = make_inputs(config, (FACE, FINGER, VOICE), seed=5)
    trimodal = forward(embed_bundle(raw, params), params).data
    pair = forward(embed_bundle({FACE: raw[FACE], FINGER: raw[FINGER]}, params), params).data
    np.testing.assert_allclose(trimodal, pair, atol=1e-6)


def test_modalities_outside_the_model_rejected(make_inputs):
    config = tiny_model_config(modalities=(FACE, VOICE))
    params = init_params(config)
    with pytest.raises(RouteError, match="not part of this model"):
        embed_bundle(make_inputs(config, (FINGER,)), params)


def test_incongruent_token_shapes(tiny_params):
    bundle = ModalityBundle.from_tokens({FACE: Tensor(np.zeros((4, 8))), VOICE: Tensor(np.zeros((3, 8)))})
    with pytest.raises(ShapeError, match="token shapes differ"):
        forward(bundle, tiny_params)


def test_predict_from_logits():
    p = predict_from_logits(np.array([3.0, 1.0, 1.0]))
    assert p.index == 0
    assert p.probabilities.sum() == pytest.approx(1.0)
    assert predict_from_logits(np.array([2.0, 2.0])).index == 0
    logits = np.random.default_rng(6).normal(size=(5, 4))
    np.testing.assert_array_equal(predict_from_logits(logits).index, predict_from_logits(logits + 3.0).index)


def test_predict_runs_without_tape(tiny_params, tiny_config, make_inputs):
    bundle = embed_bundle(make_inputs(tiny_config, (FACE, FINGER, VOICE)), tiny_params)
    prediction = predict(bundle, tiny_params)
    assert prediction.index.shape == (2,)
    np.testing.assert_allclose(prediction.probabilities.sum(axis=-1), np.ones(2), atol=1e-12)
