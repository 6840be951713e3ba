"""Mini-batch training loop."""

import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np
from loguru import logger
from tqdm import tqdm

from authformer.config import TrainConfig
from authformer.data.dataset import Dataset
from authformer.errors import AuthFormerValidationError, DivergenceError
from authformer.modalities import Modality, canonical_combination, combination_label
from authformer.model.params import AuthFormerParams
from authformer.model.router import embed_bundle, forward
from authformer.tensor import Tape, cross_entropy_loss, default_dtype
from authformer.training.optim import OptimizerFactory


@dataclass(frozen=True)
class EpochLog:
    epoch: int
    loss: float
    seconds: float


@dataclass
class TrainResult:
    params: AuthFormerParams
    history: list[EpochLog] = field(default_factory=list)

    @property
    def losses(self) -> list[float]:
        return [e.loss for e in self.history]

    @property
    def seconds_per_epoch(self) -> float:
        return float(np.mean([e.seconds for e in self.history])) if self.history else 0.0


def train(
    params: AuthFormerParams,
    train_split: Dataset,
    config: TrainConfig,
    modalities: Optional[Iterable[Modality]] = None,
) -> TrainResult:
    """Minimise cross-entropy over ``train_split``; ``params`` are updated in place.

    Shuffling and dropout draw from generators seeded by ``config.seed`` only,
    so equal seeds give equal trajectories.
    """
    modalities = canonical_combination(modalities or params.config.modalities)
    n = len(train_split)
    if n == 0:
        raise AuthFormerValidationError("training split is empty")
    if params.dtype != np.dtype(config.dtype):
        logger.info(f"Casting parameters from {params.dtype} to {config.dtype}")
        params = params.astype(np.dtype(config.dtype).type)

    shuffle_rng = np.random.default_rng([config.seed, 1])
    dropout_rng = np.random.default_rng([config.seed, 2]) if params.config.dropout > 0 else None
    optimizer = OptimizerFactory.create(config.optimizer, params.parameters(), config)
    n_batches = math.ceil(n / config.batch_size)
    result = TrainResult(params)

    logger.info(
        f"Training {combination_label(modalities)}: {n} samples, {n_batches} batches/epoch, "
        f"{config.epochs} epochs, {config.optimizer} lr={config.learning_rate}, seed={config.seed}"
    )
    with default_dtype(config.dtype):
        for epoch in tqdm(range(1, config.epochs + 1), desc="train", disable=not config.show_progress):
            start = time.perf_counter()
            order = shuffle_rng.permutation(n)
            total = 0.0
            for b in range(n_batches):
                index = order[b * config.batch_size : (b + 1) * config.batch_size]
                with Tape() as tape:
                    bundle = embed_bundle(train_split.inputs(modalities, index), params)
                    logits = forward(bundle, params, dropout_rng)
                    loss = cross_entropy_loss(logits, train_split.labels[index])
                    value = loss.item()
                    if not math.isfinite(value):
                        raise DivergenceError(epoch, b + 1, value)
                    optimizer.zero_grad()
                    tape.backward(loss)
                optimizer.step()
                total += value * index.size
                logger.debug(f"epoch {epoch} batch {b + 1}/{n_batches}: loss={value:.6f}")
            entry = EpochLog(epoch, total / n, time.perf_counter() - start)
            result.history.append(entry)
            logger.info(f"Epoch {epoch}/{config.epochs}: loss={entry.loss:.4f} ({entry.seconds:.2f}s)")
    return result
