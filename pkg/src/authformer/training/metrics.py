"""Classification metrics and threshold-swept verification rates."""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel

from authformer.errors import AuthFormerValidationError


class ClassMetrics(BaseModel):
    label: int
    support: int
    precision: float
    recall: float
    f1: float


class MetricsReport(BaseModel):
    """One evaluation run. Verification fields are filled by :func:`with_verification`."""

    combination: str = ""
    n_samples: int
    accuracy: float
    macro_recall: float
    macro_f1: float
    per_class: list[ClassMetrics]
    absent_classes: list[int] = []
    tar: Optional[float] = None
    frr: Optional[float] = None
    far: Optional[float] = None
    eer: Optional[float] = None
    threshold: Optional[float] = None


def confusion_matrix(y_true: Sequence[int], y_pred: Sequence[int], num_classes: int) -> np.ndarray:
    """``cm[i, j]`` counts samples of class i predicted as j."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise AuthFormerValidationError(f"{y_true.size} labels but {y_pred.size} predictions")
    for name, y in (("labels", y_true), ("predictions", y_pred)):
        if y.size and (y.min() < 0 or y.max() >= num_classes):
            raise AuthFormerValidationError(f"{name} must lie in [0, {num_classes})")
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


def classification_report(
    y_true: Sequence[int],
    y_pred: Sequence[int],
    num_classes: Optional[int] = None,
    combination: str = "",
) -> MetricsReport:
    """Accuracy plus unweighted means of per-class recall and F1.

    A class with no samples gets recall 0 and is listed in ``absent_classes``.
    """
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.size == 0:
        raise AuthFormerValidationError("cannot evaluate an empty split")
    if num_classes is None:
        num_classes = int(max(y_true.max(), y_pred.max())) + 1
    cm = confusion_matrix(y_true, y_pred, num_classes)
    tp = np.diag(cm).astype(np.float64)
    support = cm.sum(axis=1)
    predicted = cm.sum(axis=0)

    per_class = []
    for c in range(num_classes):
        recall = tp[c] / support[c] if support[c] else 0.0
        precision = tp[c] / predicted[c] if predicted[c] else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class.append(
            ClassMetrics(label=c, support=int(support[c]), precision=precision, recall=recall, f1=f1)
        )
    return MetricsReport(
        combination=combination,
        n_samples=int(y_true.size),
        accuracy=float(tp.sum() / cm.sum()),
        macro_recall=float(np.mean([m.recall for m in per_class])),
        macro_f1=float(np.mean([m.f1 for m in per_class])),
        per_class=per_class,
        absent_classes=[c for c in range(num_classes) if support[c] == 0],
    )


@dataclass(frozen=True)
class OperatingPoint:
    threshold: float
    tar: float
    frr: float
    far: float


@dataclass(frozen=True)
class EERResult:
    eer: float
    threshold: float
    tar: float
    frr: float
    far: float


def _scores(values: Sequence[float], name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise AuthFormerValidationError(f"{name} score list is empty")
    if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
        raise AuthFormerValidationError(f"{name} scores must be finite and lie in [0, 1]")
    return arr


def threshold_candidates(genuine: Sequence[float], impostor: Sequence[float]) -> np.ndarray:
    """Ascending midpoints between consecutive distinct scores, plus 0 and 1."""
    distinct = np.unique(np.concatenate([np.asarray(genuine, np.float64), np.asarray(impostor, np.float64)]))
    midpoints = (distinct[:-1] + distinct[1:]) / 2
    return np.unique(np.concatenate([[0.0], midpoints, [1.0]]))


def rates_at_threshold(genuine: Sequence[float], impostor: Sequence[float], threshold: float) -> OperatingPoint:
    """Accept when score >= threshold: FRR = genuine rejected, FAR = impostors accepted."""
    g = _scores(genuine, "genuine")
    i = _scores(impostor, "impostor")
    frr = float(np.mean(g < threshold))
    far = float(np.mean(i >= threshold))
    return OperatingPoint(float(threshold), 1.0 - frr, frr, far)


def compute_eer(genuine: Sequence[float], impostor: Sequence[float]) -> EERResult:
    """Sweep :func:`threshold_candidates`; the first point minimising ``|FAR - FRR|`` wins."""
    g = np.sort(_scores(genuine, "genuine"))
    i = np.sort(_scores(impostor, "impostor"))
    t = threshold_candidates(g, i)
    frr = np.searchsorted(g, t, side="left") / g.size
    far = (i.size - np.searchsorted(i, t, side="left")) / i.size
    k = int(np.argmin(np.abs(far - frr)))
    return EERResult(
        eer=float((far[k] + frr[k]) / 2),
        threshold=float(t[k]),
        tar=float(1.0 - frr[k]),
        frr=float(frr[k]),
        far=float(far[k]),
    )


def with_verification(report: MetricsReport, result: EERResult) -> MetricsReport:
    return report.model_copy(
        update=dict(tar=result.tar, frr=result.frr, far=result.far, eer=result.eer, threshold=result.threshold)
    )
