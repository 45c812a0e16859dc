"""
Trainer
Regular and saliency-guided training loops with per-epoch metrics
"""

import csv
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np
from tqdm import tqdm

from autodiff.tensor import Tape, Tensor, backward
from common.errors import ArtifactIOError, ParameterError
from data.dataset import batch_count, batches
from evaluation.robustness import accuracy
from model.optimizer import adadelta_step, init_adadelta
from schema.config_schemas import get_config_schema
from schema.result_schemas import get_result_schema
from schema.schema_validator import validator
from training.saliency import (input_gradients, mask_low_gradient_pixels,
                               regular_terms, saliency_terms)

logger = logging.getLogger(__name__)

METRICS_FIELDS = ["epoch", "mode", "loss", "train_acc"]


@dataclass
class TrainConfig:
    """
    Training hyperparameters; defaults follow the full-scale MNIST run
    """

    mode: str = "regular"
    epochs: int = 100
    batch_size: int = 256
    lr: float = 0.1
    lam: float = 1.0
    mask_fraction: float = 0.5
    seed: int = 0
    fill_range: str = "image"
    arch: str = "mnist_cnn"

    def __post_init__(self):
        validator.require(self.to_dict(), get_config_schema('train'), "training config")

    def to_dict(self):
        data = asdict(self)
        data["lambda"] = data.pop("lam")
        return data


@dataclass
class EpochMetrics:
    epoch: int
    mode: str
    loss: float
    train_acc: float
    samples: int = 0

    def row(self):
        return {"epoch": self.epoch, "mode": self.mode,
                "loss": f"{self.loss:.6f}", "train_acc": f"{self.train_acc:.6f}"}


@dataclass
class TrainResult:
    model: object
    state: object
    history: List[EpochMetrics] = field(default_factory=list)


def train_step(model, images, labels, config, state, rng):
    """
    One optimizer step on one batch

    In saliency mode the batch is masked from eval-mode input gradients
    taken at the current parameters before the joint loss is built.

    Returns:
        (loss value, number of correct train predictions)
    """
    dropout_seed, mask_seed = np.random.SeedSequence(int(rng.integers(0, 2 ** 63))).generate_state(2)
    dropout_rng = np.random.default_rng(int(dropout_seed))
    params = model.parameters()

    if config.mode == "saliency":
        grads_x = input_gradients(model, images, labels)
        masked = mask_low_gradient_pixels(images, grads_x, config.mask_fraction,
                                          np.random.default_rng(int(mask_seed)),
                                          fill_range=config.fill_range)
        with Tape() as tape:
            tape.watch(*params)
            loss, logits = saliency_terms(model, Tensor(images), masked.masked, labels,
                                          config.lam, dropout_rng, train_mode=True)
    else:
        with Tape() as tape:
            tape.watch(*params)
            loss, logits = regular_terms(model, Tensor(images), labels, dropout_rng, train_mode=True)

    grads = backward(loss, tape, params)
    adadelta_step(model, grads, state)
    correct = int(np.sum(np.argmax(logits.data, axis=1) == labels))
    return loss.item(), correct


def train_epoch(model, dataset, config, state, rng, epoch=1, progress=False):
    """
    One pass over the dataset

    Args:
        model: Model, updated in place
        dataset: Non-empty training Dataset
        config: TrainConfig
        state: AdadeltaState, updated in place
        rng: Generator driving shuffling, dropout and mask fills
        epoch: Epoch number recorded in the metrics

    Returns:
        (model, state, EpochMetrics)
    """
    if len(dataset) == 0:
        raise ParameterError("cannot train on an empty dataset")
    shuffle_seed = int(rng.integers(0, 2 ** 63))
    total_loss, total_correct, seen = 0.0, 0, 0
    stream = batches(dataset, config.batch_size, shuffle_seed=shuffle_seed)
    if progress:
        stream = tqdm(stream, total=batch_count(dataset, config.batch_size),
                      desc=f"epoch {epoch} [{config.mode}]", leave=False)
    for images, labels in stream:
        loss, correct = train_step(model, images, labels, config, state, rng)
        total_loss += loss * len(labels)
        total_correct += correct
        seen += len(labels)
        logger.debug(f"epoch {epoch}: batch loss {loss:.4f}")

    metrics = EpochMetrics(epoch, config.mode, total_loss / seen, total_correct / seen, seen)
    model.epoch = epoch
    logger.info(f"Epoch {epoch} [{config.mode}]: loss {metrics.loss:.4f}, train acc {metrics.train_acc:.4f}")
    return model, state, metrics


class MetricsWriter:
    """
    Appends `epoch,mode,loss,train_acc` rows to a CSV file
    """

    def __init__(self, path):
        self.path = Path(path)
        try:
            with open(self.path, "w", newline="") as f:
                csv.DictWriter(f, fieldnames=METRICS_FIELDS).writeheader()
        except OSError as e:
            raise ArtifactIOError(f"cannot write metrics file {self.path}: {e}")
        logger.info(f"Metrics file created: {self.path}")

    def write(self, metrics):
        try:
            with open(self.path, "a", newline="") as f:
                csv.DictWriter(f, fieldnames=METRICS_FIELDS).writerow(metrics.row())
        except OSError as e:
            raise ArtifactIOError(f"cannot append to metrics file {self.path}: {e}")


def read_metrics(path):
    """Parse and validate a metrics CSV"""
    rows = []
    with open(path, newline="") as f:
        for raw in csv.DictReader(f):
            row = {"epoch": int(raw["epoch"]), "mode": raw["mode"],
                   "loss": float(raw["loss"]), "train_acc": float(raw["train_acc"])}
            validator.require(row, get_result_schema('metrics_row'), f"metrics row {raw}")
            rows.append(row)
    return rows


def train(model, dataset, config, eval_set=None, metrics_path: Optional[str] = None, progress=False):
    """
    Run config.epochs epochs of regular or saliency-guided training

    Args:
        model: Model, updated in place
        dataset: Training Dataset
        config: TrainConfig
        eval_set: Optional Dataset whose clean accuracy is logged per epoch
        metrics_path: Optional CSV receiving one row per epoch
        progress: Show tqdm progress bars

    Returns:
        TrainResult
    """
    state = init_adadelta(model, lr=config.lr)
    rng = np.random.default_rng(config.seed)
    writer = MetricsWriter(metrics_path) if metrics_path else None
    result = TrainResult(model, state)
    logger.info(f"Training {model.arch_id} on {len(dataset)} samples: {config.to_dict()}")
    for epoch in range(1, config.epochs + 1):
        model, state, metrics = train_epoch(model, dataset, config, state, rng, epoch, progress)
        result.history.append(metrics)
        if writer:
            writer.write(metrics)
        if eval_set is not None:
            logger.info(f"Epoch {epoch}: clean test accuracy {accuracy(model, eval_set):.4f}")
    return result
