"""Small numpy neural-network toolkit: layers, loss, Adam, trainer, checkpoints."""

from .layers import (
    BatchNorm,
    Conv2D,
    Dense,
    Flatten,
    Layer,
    MaxPool2D,
    ReLU,
    Sequential,
    ShapeError,
    Softmax,
    softmax,
)
from .losses import combined_loss, combined_loss_grad
from .optim import Adam
from .train import EpochRecord, History, PairDataset, TrainConfig, TrainingDiverged, evaluate, train_toy

__all__ = [
    "Adam", "BatchNorm", "Conv2D", "Dense", "EpochRecord", "Flatten", "History", "Layer", "MaxPool2D",
    "PairDataset", "ReLU", "Sequential", "ShapeError", "Softmax", "TrainConfig", "TrainingDiverged",
    "combined_loss", "combined_loss_grad", "evaluate", "softmax", "train_toy",
]
