"""Mini-batch trainer with plateau LR decay and early stopping.

The model needs ``parameters()``, ``forward_train(images, speech)``,
``backward(cache, dprobs)``, ``predict_batch(images, speech)`` and an
``n_classes`` attribute; :class:`dncshap.fusion.FusionModel` provides them.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .losses import combined_loss, combined_loss_grad
from .optim import Adam

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class PairDataset:
    images: np.ndarray  # (N, H, W, 3)
    speech: np.ndarray  # (N, H, W, 1)
    labels: np.ndarray  # (N,) int

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        self.speech = np.asarray(self.speech, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        n = len(self.labels)
        if len(self.images) != n or len(self.speech) != n:
            raise ValueError("images, speech and labels must have the same length")

    def __len__(self):
        return len(self.labels)

    def subset(self, idx):
        return PairDataset(self.images[idx], self.speech[idx], self.labels[idx])


@dataclass
class TrainConfig:
    seed: int
    batch_size: int = 64
    lr: float = 8e-6
    epochs: int = 30
    early_stop_patience: int = 5
    lr_patience: int = 2
    lr_factor: float = 0.5
    val_fraction: float = 0.3
    gamma: float = 2.0


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float
    lr: float


@dataclass
class History:
    records: list = field(default_factory=list)
    stopped_early: bool = False

    def __len__(self):
        return len(self.records)

    def to_csv(self):
        lines = ["epoch,train_loss,train_acc,val_loss,val_acc,lr"]
        for r in self.records:
            lines.append(f"{r.epoch},{r.train_loss!r},{r.train_acc!r},{r.val_loss!r},{r.val_acc!r},{r.lr!r}")
        return "\n".join(lines) + "\n"


def one_hot(labels, k):
    out = np.zeros((len(labels), k))
    out[np.arange(len(labels)), labels] = 1.0
    return out


def evaluate(model, data, gamma=2.0, batch_size=256):
    """(loss, accuracy) with the model in inference mode."""
    if len(data) == 0:
        return float("nan"), float("nan")
    probs = np.concatenate([
        model.predict_batch(data.images[i:i + batch_size], data.speech[i:i + batch_size])
        for i in range(0, len(data), batch_size)
    ])
    loss = combined_loss(probs, one_hot(data.labels, model.n_classes), gamma)
    return loss, float(np.mean(probs.argmax(axis=1) == data.labels))


def split(data, val_fraction, rng):
    order = rng.permutation(len(data))
    n_val = int(round(len(data) * val_fraction))
    if n_val >= len(data):
        n_val = len(data) - 1
    return data.subset(np.sort(order[n_val:])), data.subset(np.sort(order[:n_val]))


def train_toy(model, data, config):
    """Train ``model`` in place. Returns ``(model, history)``.

    A ``val_fraction`` share of ``data`` is held out (seeded) for validation
    loss, which drives both the plateau LR decay and early stopping.
    """
    if len(data) == 0:
        raise ValueError("dataset is empty")
    history = History()
    if config.epochs <= 0:
        return model, history
    rng = np.random.default_rng(config.seed)
    train, val = split(data, config.val_fraction, rng)
    opt = Adam(model.parameters(), lr=config.lr)
    best = math.inf
    since_best = 0
    since_lr = 0
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(train))
        loss_sum = 0.0
        correct = 0
        seen = 0
        for start in range(0, len(order), config.batch_size):
            idx = order[start:start + config.batch_size]
            if len(idx) < 2 and len(order) > 1:
                continue  # batchnorm needs more than one sample
            batch = train.subset(idx)
            target = one_hot(batch.labels, model.n_classes)
            probs, cache = model.forward_train(batch.images, batch.speech)
            if not np.all(np.isfinite(probs)):
                raise TrainingDiverged(f"non-finite output at epoch {epoch}, batch starting {start}")
            loss = combined_loss(probs, target, config.gamma)
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}, batch starting {start}")
            grads = model.backward(cache, combined_loss_grad(probs, target, config.gamma))
            opt.step(grads)
            loss_sum += loss * len(idx)
            correct += int(np.sum(probs.argmax(axis=1) == batch.labels))
            seen += len(idx)
        val_loss, val_acc = evaluate(model, val, config.gamma) if len(val) else (loss_sum / seen, math.nan)
        if not np.isfinite(val_loss):
            raise TrainingDiverged(f"non-finite validation loss at epoch {epoch}")
        history.records.append(EpochRecord(epoch, loss_sum / seen, correct / seen, val_loss, val_acc, opt.lr))
        log.info("epoch %d train_loss=%.4f val_loss=%.4f val_acc=%.3f lr=%.2e",
                 epoch, loss_sum / seen, val_loss, val_acc, opt.lr)
        if val_loss < best:
            best = val_loss
            since_best = since_lr = 0
            continue
        since_best += 1
        since_lr += 1
        if since_best >= config.early_stop_patience:
            history.stopped_early = True
            break
        if since_lr >= config.lr_patience:
            opt.lr *= config.lr_factor
            since_lr = 0
    return model, history
