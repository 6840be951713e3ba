"""Experiment harnesses: per-combination ablation and encoder-depth sweep."""

from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, Optional, Sequence

from loguru import logger
from pydantic import BaseModel
from tqdm import tqdm

from authformer.config import ModelConfig, TrainConfig
from authformer.data.dataset import Dataset
from authformer.errors import AuthFormerValidationError, RouteError
from authformer.modalities import Modality, canonical_combination, combination_label
from authformer.model.params import init_params
from authformer.tensor import default_dtype
from authformer.training.evaluation import evaluate_classification
from authformer.training.trainer import train

FACE, FINGER, PALM, VOICE = Modality.FACE, Modality.FINGERPRINT, Modality.PALMPRINT, Modality.VOICE

# Reporting order of the combination table; labels keep the order written here.
ABLATION_COMBINATIONS: tuple[tuple[Modality, ...], ...] = (
    (PALM, FINGER, VOICE),
    (FACE, PALM, VOICE),
    (FINGER, FACE, VOICE),
    (FACE, PALM),
    (FACE, VOICE),
    (FINGER, PALM),
    (FINGER, VOICE),
    (FINGER, FACE),
    (PALM, VOICE),
    (FACE,),
    (PALM,),
    (FINGER,),
    (VOICE,),
)

DEFAULT_DEPTHS = (1, 2, 3, 4, 5, 6)


class AblationRow(BaseModel):
    combination: str
    modalities: list[Modality]
    accuracy: float
    macro_f1: float
    macro_recall: float


class AblationGain(BaseModel):
    combination: str
    accuracy: float
    best_unimodal: str
    best_unimodal_accuracy: float
    gain: float


class DepthRow(BaseModel):
    layers: int
    accuracy: float
    seconds_per_epoch: float
    parameters: int


def config_for(base: ModelConfig, modalities: Iterable[Modality], num_classes: int, **updates) -> ModelConfig:
    data = base.model_dump()
    data.update(modalities=list(canonical_combination(modalities)), num_classes=num_classes, **updates)
    return ModelConfig.model_validate(data)


def _fit_and_score(
    dataset: Dataset, model_config: ModelConfig, train_config: TrainConfig
) -> tuple[float, float, float, float, int]:
    params = init_params(model_config, seed=train_config.seed)
    result = train(params, dataset.train(), train_config)
    report = evaluate_classification(result.params, dataset.test())
    return report.accuracy, report.macro_f1, report.macro_recall, result.seconds_per_epoch, params.count()


def _require(dataset: Dataset, combinations: Iterable[tuple[Modality, ...]]) -> None:
    needed = {m for combo in combinations for m in combo}
    missing = sorted(m.value for m in needed - set(dataset.modalities))
    if missing:
        raise RouteError(f"dataset lacks modalities {missing}")


def ablation_run(
    dataset: Dataset,
    model_config: ModelConfig,
    train_config: TrainConfig,
    jobs: int = 1,
    combinations: Sequence[tuple[Modality, ...]] = ABLATION_COMBINATIONS,
) -> list[AblationRow]:
    """Train and evaluate one model per combination with identical hyperparameters and seed."""
    _require(dataset, combinations)

    def run(combo: tuple[Modality, ...]) -> AblationRow:
        label = combination_label(combo)
        config = config_for(model_config, combo, dataset.num_classes)
        accuracy, f1, recall, _, _ = _fit_and_score(dataset, config, train_config)
        logger.info(f"Ablation {label}: accuracy={accuracy:.4f} macro_f1={f1:.4f}")
        return AblationRow(
            combination=label,
            modalities=list(combo),
            accuracy=accuracy,
            macro_f1=f1,
            macro_recall=recall,
        )

    logger.info(f"Ablation over {len(combinations)} combinations with {jobs} job(s)")
    # dtype is process-wide; fix it once before any worker starts.
    with default_dtype(train_config.dtype):
        if jobs <= 1:
            return [run(c) for c in tqdm(combinations, desc="ablation", disable=not train_config.show_progress)]
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(run, combinations))


def ablation_gains(rows: Sequence[AblationRow]) -> list[AblationGain]:
    """Accuracy of each multimodal row minus its best constituent unimodal row."""
    unimodal = {row.modalities[0]: row for row in rows if len(row.modalities) == 1}
    gains = []
    for row in rows:
        if len(row.modalities) < 2:
            continue
        parts = [unimodal[m] for m in row.modalities if m in unimodal]
        if not parts:
            continue
        best = max(parts, key=lambda r: r.accuracy)
        gains.append(
            AblationGain(
                combination=row.combination,
                accuracy=row.accuracy,
                best_unimodal=best.combination,
                best_unimodal_accuracy=best.accuracy,
                gain=row.accuracy - best.accuracy,
            )
        )
    return gains


def depth_sweep(
    dataset: Dataset,
    layer_counts: Sequence[int],
    model_config: ModelConfig,
    train_config: TrainConfig,
) -> list[DepthRow]:
    """Train one model per encoder depth (serially, so epoch timings are comparable)."""
    if not layer_counts:
        raise AuthFormerValidationError("depth sweep needs at least one layer count")
    _require(dataset, [model_config.modalities])
    rows = []
    with default_dtype(train_config.dtype):
        for layers in tqdm(layer_counts, desc="depth", disable=not train_config.show_progress):
            config = config_for(model_config, model_config.modalities, dataset.num_classes, layers=layers)
            accuracy, _, _, seconds, count = _fit_and_score(dataset, config, train_config)
            logger.info(f"Depth {layers}: accuracy={accuracy:.4f}, {seconds:.3f}s/epoch, {count} parameters")
            rows.append(DepthRow(layers=layers, accuracy=accuracy, seconds_per_epoch=seconds, parameters=count))
    return rows


def parse_layer_counts(text: Optional[str]) -> tuple[int, ...]:
    """``"1..6"`` or ``"1,2,4"``; empty means the default 1..6."""
    if not text:
        return DEFAULT_DEPTHS
    try:
        if ".." in text:
            lo, hi = (int(x) for x in text.split("..", 1))
            counts = tuple(range(lo, hi + 1))
        else:
            counts = tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError as e:
        raise AuthFormerValidationError(f"cannot parse layer counts '{text}'") from e
    if not counts or any(c < 0 for c in counts):
        raise AuthFormerValidationError(f"layer counts must be a non-empty list of non-negative integers, got '{text}'")
    return counts
