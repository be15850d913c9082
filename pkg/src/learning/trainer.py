"""
Training and evaluation of the sphere classifier.

Every source of randomness is derived from one seed: torch's generator for
weight init and dropout, a numpy Generator for shuffling and augmentation.
Training runs single-threaded with deterministic kernels, so two runs with
the same seed produce identical logs.
"""

import copy
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np
import torch
import torch.nn.functional as F

from config.net_config import TrainingConfig
from src.dataset.loader import SphereDataset
from src.dataset.manifest import DatasetManifest
from src.errors import DivergedTraining, EmptyDataset
from src.learning.network import SphereNet, save_checkpoint, to_tensor
from src.state import Split

logger = logging.getLogger(__name__)


@dataclass
class EpochRecord:
    """One row of the training log."""
    epoch: int
    train_loss: float
    train_acc: float
    test_acc: float


@dataclass
class TrainingLog:
    records: List[EpochRecord] = field(default_factory=list)
    checkpoint: Optional[Path] = None

    @property
    def final_test_accuracy(self) -> float:
        return self.records[-1].test_acc if self.records else 0.0

    @property
    def best_test_accuracy(self) -> float:
        return max((r.test_acc for r in self.records), default=0.0)


@dataclass
class EvaluationResult:
    """Overall and per-class accuracy on one split."""

    overall: float
    correct: int
    total: int
    per_class: Dict[str, float]
    predictions: np.ndarray

    @property
    def mean_class_accuracy(self) -> float:
        values = list(self.per_class.values())
        return float(np.mean(values)) if values else 0.0


def configure_determinism(num_threads: int = 1) -> None:
    """Fix the intra-op thread count and force deterministic kernels."""
    torch.set_num_threads(num_threads)
    torch.use_deterministic_algorithms(True)


# ============================================================================
# Evaluation
# ============================================================================

def predict(model: SphereNet, dataset: SphereDataset, batch_size: int = 32) -> np.ndarray:
    """Predicted class per sample, in inference mode (no augmentation)."""
    model.eval()
    predictions = []
    with torch.no_grad():
        for start in range(0, len(dataset), batch_size):
            features, _ = dataset.batch(range(start, min(start + batch_size, len(dataset))))
            logits = model(to_tensor(features))
            predictions.append(logits.argmax(dim=1).cpu().numpy())
    return np.concatenate(predictions).astype(np.int64)


def evaluate_dataset(
    model: SphereNet,
    dataset: SphereDataset,
    classes: List[str],
    batch_size: int = 32,
) -> EvaluationResult:
    """Overall accuracy = correct/total, plus accuracy per class present in the split."""
    predictions = predict(model, dataset, batch_size)
    labels = dataset.labels
    hits = predictions == labels
    per_class = {
        classes[label]: float(hits[labels == label].mean())
        for label in np.unique(labels)
    }
    correct = int(hits.sum())
    return EvaluationResult(
        overall=correct / len(labels),
        correct=correct,
        total=len(labels),
        per_class=per_class,
        predictions=predictions,
    )


def evaluate(
    model: SphereNet,
    manifest: DatasetManifest,
    split: Split = Split.TEST,
    n: Optional[int] = None,
    batch_size: int = 32,
) -> EvaluationResult:
    """
    Evaluate a model on one manifest split.

    Args:
        model: Trained model
        manifest: Dataset manifest
        split: Split to score
        n: Spheres per object; fewer than cached means prefix truncation

    Returns:
        EvaluationResult
    """
    dataset = SphereDataset(manifest, split, n)
    return evaluate_dataset(model, dataset, manifest.classes, batch_size)


# ============================================================================
# Training
# ============================================================================

def _batches(order: np.ndarray, batch_size: int) -> List[np.ndarray]:
    """Split a permutation into batches; a trailing single sample joins the previous batch."""
    batches = [order[i:i + batch_size] for i in range(0, len(order), batch_size)]
    if len(batches) > 1 and len(batches[-1]) == 1:
        batches[-2] = np.concatenate([batches[-2], batches[-1]])
        batches.pop()
    return batches


def train(
    model: SphereNet,
    manifest: DatasetManifest,
    training: TrainingConfig,
    seed: int = 0,
    n: Optional[int] = None,
    checkpoint_path: Optional[Path] = None,
    config_tag: int = 0,
    on_epoch: Optional[Callable[[EpochRecord], None]] = None,
) -> TrainingLog:
    """
    Train with Adam and a step learning-rate decay.

    Args:
        model: Freshly built model
        manifest: Dataset manifest (train and test splits)
        training: Optimizer and schedule settings
        seed: Seeds shuffling, augmentation and dropout
        n: Spheres per object (defaults to the manifest's count)
        checkpoint_path: Where the final (or last good) model is written
        config_tag: Pipeline config hash stored in the checkpoint
        on_epoch: Called after every epoch with its record

    Returns:
        TrainingLog with one record per epoch

    Raises:
        DivergedTraining: Loss became NaN or infinite; the last good weights are checkpointed
        EmptyDataset: A split has no samples
    """
    configure_determinism(training.num_threads)
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)

    train_set = SphereDataset(manifest, Split.TRAIN, n)
    test_set = SphereDataset(manifest, Split.TEST, n)
    if len(train_set) < 2:
        raise EmptyDataset("Training needs at least 2 samples for batch statistics")

    optimizer = torch.optim.Adam(model.parameters(), lr=training.learning_rate)
    scheduler = torch.optim.lr_scheduler.StepLR(
        optimizer, step_size=training.decay_step, gamma=training.decay_rate
    )

    log = TrainingLog()
    last_good = copy.deepcopy(model.state_dict())
    logger.info(
        f"Training {model.config.name} on {len(train_set)} samples "
        f"({len(test_set)} test, k={manifest.k}) for {training.epochs} epochs, seed {seed}"
    )

    for epoch in range(1, training.epochs + 1):
        model.train()
        total_loss, correct, seen = 0.0, 0, 0
        order = rng.permutation(len(train_set))
        for batch in _batches(order, training.batch_size):
            features, labels = train_set.batch(batch, rng if training.augment else None)
            x, y = to_tensor(features), torch.as_tensor(labels)

            optimizer.zero_grad()
            logits = model(x)
            loss = F.cross_entropy(logits, y)
            if not math.isfinite(loss.item()):
                model.load_state_dict(last_good)
                if checkpoint_path is not None:
                    save_checkpoint(model, checkpoint_path, config_tag)
                raise DivergedTraining(f"Loss became {loss.item()} at epoch {epoch}")
            loss.backward()
            optimizer.step()

            total_loss += loss.item() * len(batch)
            correct += int((logits.argmax(dim=1) == y).sum())
            seen += len(batch)
        scheduler.step()

        record = EpochRecord(
            epoch=epoch,
            train_loss=total_loss / seen,
            train_acc=correct / seen,
            test_acc=evaluate_dataset(model, test_set, manifest.classes, training.batch_size).overall,
        )
        log.records.append(record)
        last_good = copy.deepcopy(model.state_dict())
        logger.info(
            f"epoch {epoch}: loss {record.train_loss:.4f}, "
            f"train {record.train_acc:.3f}, test {record.test_acc:.3f}"
        )
        if on_epoch:
            on_epoch(record)

    model.eval()
    if checkpoint_path is not None:
        log.checkpoint = save_checkpoint(model, checkpoint_path, config_tag)
    return log
