from authformer.training.evaluation import (
    evaluate_classification,
    evaluate_verification,
    predict_split,
    scores_from_probabilities,
    verification_scores,
)
from authformer.training.harness import (
    ABLATION_COMBINATIONS,
    AblationGain,
    AblationRow,
    DepthRow,
    ablation_gains,
    ablation_run,
    depth_sweep,
)
from authformer.training.metrics import (
    EERResult,
    MetricsReport,
    OperatingPoint,
    classification_report,
    compute_eer,
    confusion_matrix,
    rates_at_threshold,
    threshold_candidates,
)
from authformer.training.optim import SGD, Adam, OptimizerFactory
from authformer.training.trainer import EpochLog, TrainResult, train

__all__ = [
    "ABLATION_COMBINATIONS",
    "Adam",
    "AblationGain",
    "AblationRow",
    "DepthRow",
    "EERResult",
    "EpochLog",
    "MetricsReport",
    "OperatingPoint",
    "OptimizerFactory",
    "SGD",
    "TrainResult",
    "ablation_gains",
    "ablation_run",
    "classification_report",
    "compute_eer",
    "confusion_matrix",
    "depth_sweep",
    "evaluate_classification",
    "evaluate_verification",
    "predict_split",
    "rates_at_threshold",
    "scores_from_probabilities",
    "threshold_candidates",
    "train",
    "verification_scores",
]
