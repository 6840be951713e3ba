"""Batched inference over dataset splits, and the metrics built on it."""

from typing import Iterable, Optional

import numpy as np
from loguru import logger

from authformer.data.dataset import Dataset
from authformer.errors import AuthFormerValidationError
from authformer.modalities import Modality, canonical_combination, combination_label
from authformer.model.params import AuthFormerParams
from authformer.model.router import embed_bundle, forward, predict_from_logits
from authformer.tensor import default_dtype, no_grad
from authformer.training.metrics import (
    EERResult,
    MetricsReport,
    classification_report,
    compute_eer,
    with_verification,
)

EVAL_BATCH = 64


def predict_split(
    params: AuthFormerParams,
    split: Dataset,
    combination: Optional[Iterable[Modality]] = None,
    batch_size: int = EVAL_BATCH,
) -> tuple[np.ndarray, np.ndarray]:
    """Predicted class indices ``[n]`` and class probabilities ``[n, C]``."""
    combination = canonical_combination(combination or params.config.modalities)
    if len(split) == 0:
        raise AuthFormerValidationError("cannot evaluate an empty split")
    indices, probs = [], []
    with no_grad(), default_dtype(params.dtype.type):
        for start in range(0, len(split), batch_size):
            index = np.arange(start, min(start + batch_size, len(split)))
            logits = forward(embed_bundle(split.inputs(combination, index), params), params)
            prediction = predict_from_logits(logits.data)
            indices.append(prediction.index)
            probs.append(prediction.probabilities)
    return np.concatenate(indices), np.concatenate(probs)


def evaluate_classification(
    params: AuthFormerParams,
    split: Dataset,
    combination: Optional[Iterable[Modality]] = None,
) -> MetricsReport:
    combination = canonical_combination(combination or params.config.modalities)
    predicted, _ = predict_split(params, split, combination)
    report = classification_report(
        split.labels, predicted, params.config.num_classes, combination_label(combination)
    )
    if report.absent_classes:
        logger.warning(f"Classes absent from the split (recall set to 0): {report.absent_classes}")
    return report


def scores_from_probabilities(
    probabilities: np.ndarray,
    labels: np.ndarray,
    impostors_per_sample: Optional[int] = None,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Genuine score = probability of the true class; impostor scores = probabilities of wrong claims.

    Exhaustive mode claims every wrong class (in class order); with
    ``impostors_per_sample`` a seeded subset of that size is drawn per sample.
    """
    n, c = probabilities.shape
    labels = np.asarray(labels)
    genuine = probabilities[np.arange(n), labels]
    if impostors_per_sample is None:
        mask = np.ones((n, c), dtype=bool)
        mask[np.arange(n), labels] = False
        return genuine, probabilities[mask]
    if not 1 <= impostors_per_sample <= c - 1:
        raise AuthFormerValidationError(
            f"impostors per sample must lie in [1, {c - 1}], got {impostors_per_sample}"
        )
    rng = np.random.default_rng(seed)
    impostor = []
    for row, label in zip(probabilities, labels):
        wrong = np.delete(np.arange(c), label)
        impostor.append(row[np.sort(rng.choice(wrong, impostors_per_sample, replace=False))])
    return genuine, np.concatenate(impostor)


def verification_scores(
    params: AuthFormerParams,
    split: Dataset,
    combination: Optional[Iterable[Modality]] = None,
    impostors_per_sample: Optional[int] = None,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    _, probs = predict_split(params, split, combination)
    return scores_from_probabilities(probs, split.labels, impostors_per_sample, seed)


def evaluate_verification(
    params: AuthFormerParams,
    split: Dataset,
    combination: Optional[Iterable[Modality]] = None,
    impostors_per_sample: Optional[int] = None,
    seed: int = 0,
) -> tuple[MetricsReport, EERResult, tuple[np.ndarray, np.ndarray]]:
    """Classification metrics plus the EER operating point, from one inference pass."""
    combination = canonical_combination(combination or params.config.modalities)
    predicted, probs = predict_split(params, split, combination)
    report = classification_report(
        split.labels, predicted, params.config.num_classes, combination_label(combination)
    )
    genuine, impostor = scores_from_probabilities(probs, split.labels, impostors_per_sample, seed)
    result = compute_eer(genuine, impostor)
    logger.info(
        f"Verification on {len(genuine)} genuine / {len(impostor)} impostor attempts: "
        f"EER={result.eer:.4f} at threshold {result.threshold:.4f}"
    )
    return with_verification(report, result), result, (genuine, impostor)
