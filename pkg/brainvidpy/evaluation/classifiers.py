"""
### classifiers.py
#### Functions:
    - FrameClassifier
    - ClipClassifier
    - train_classifier
    - prob_fn
    - accuracy

Small trained stand-ins for the image and video classifiers behind the semantic metrics. The
frame classifier predicts the category of single frames; the clip classifier predicts the
(category, direction) pair of whole clips, which makes it sensitive to motion.
"""

import logging
from typing import Callable

import numpy as np
import pandas as pd
import torch
import torch.nn.functional as F
from torch import nn

from brainvidpy._tools.tools import counter_rng
from brainvidpy.errors import ClassifierGateError, NumericalAbortError

LOGGER = logging.getLogger(__name__)


class FrameClassifier(nn.Module):
    """[n, H, W, 3] frames → [n, C] logits."""

    def __init__(self, n_classes: int, hidden: int=32):
        super().__init__()
        self.n_classes = n_classes
        self.features = nn.Sequential(
            nn.Conv2d(3, hidden, 3, padding=1), nn.ReLU(), nn.MaxPool2d(2),
            nn.Conv2d(hidden, 2 * hidden, 3, padding=1), nn.ReLU(), nn.MaxPool2d(2),
            nn.Conv2d(2 * hidden, 2 * hidden, 3, padding=1), nn.ReLU(), nn.AdaptiveAvgPool2d(1),
        )
        self.head = nn.Linear(2 * hidden, n_classes)

    def forward(self, frames: torch.Tensor) -> torch.Tensor:
        return self.head(self.features(frames.movedim(-1, -3)).flatten(1))


class ClipClassifier(nn.Module):
    """[n, m, H, W, 3] clips → [n, C] logits through 3D convolutions."""

    def __init__(self, n_classes: int, hidden: int=32):
        super().__init__()
        self.n_classes = n_classes
        self.features = nn.Sequential(
            nn.Conv3d(3, hidden, 3, padding=1), nn.ReLU(), nn.MaxPool3d((1, 2, 2)),
            nn.Conv3d(hidden, 2 * hidden, 3, padding=1), nn.ReLU(), nn.MaxPool3d((1, 2, 2)),
            nn.Conv3d(2 * hidden, 2 * hidden, 3, padding=1), nn.ReLU(), nn.AdaptiveAvgPool3d(1),
        )
        self.head = nn.Linear(2 * hidden, n_classes)

    def forward(self, clips: torch.Tensor) -> torch.Tensor:
        return self.head(self.features(clips.permute(0, 4, 1, 2, 3)).flatten(1))


def prob_fn(model: nn.Module, *, batch_size: int=256) -> Callable[[np.ndarray], np.ndarray]:
    """Wraps a classifier as numpy inputs → [n, C] softmax probabilities."""
    @torch.no_grad()
    def predict(x: np.ndarray) -> np.ndarray:
        model.eval()
        x = torch.as_tensor(np.asarray(x, dtype=np.float32))
        return torch.cat([F.softmax(model(x[i:i + batch_size]), dim=-1) for i in range(0, x.shape[0], batch_size)]).numpy()

    return predict


def accuracy(model: nn.Module, inputs: np.ndarray, labels: np.ndarray) -> float:
    probs = prob_fn(model)(inputs)
    return float((probs.argmax(axis=1) == np.asarray(labels)).mean())


def train_classifier(model: nn.Module, inputs: np.ndarray, labels: np.ndarray, *, val_inputs: np.ndarray | None=None, val_labels: np.ndarray | None=None, steps: int=1500, lr: float=2e-3, batch_size: int=64, seed: int=0, gate: float | None=0.9, log_every: int=100) -> tuple[nn.Module, pd.DataFrame, float]:
    """Trains a stand-in classifier and checks it against the accuracy gate.

    #### Args:
        model (FrameClassifier or ClipClassifier)
        inputs (np.ndarray): [N, H, W, 3] frames or [N, m, H, W, 3] clips
        labels (np.ndarray): [N] class indices
        val_inputs, val_labels (np.ndarray, optional): Held-out set; defaults to the training set.
        gate (float, optional): Minimum validation accuracy; None disables it. Defaults to 0.9.

    #### Returns:
        (model, curve, val_accuracy)

    #### Raises:
        ClassifierGateError: validation accuracy below `gate`
    """
    x = torch.as_tensor(np.asarray(inputs, dtype=np.float32))
    y = torch.as_tensor(np.asarray(labels, dtype=np.int64))
    torch.manual_seed(seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=lr)
    batch_size = min(batch_size, x.shape[0])
    rows = []
    model.train()
    for step in range(steps):
        idx = torch.from_numpy(counter_rng(seed, 51, step).choice(x.shape[0], size=batch_size, replace=False))
        loss = F.cross_entropy(model(x[idx]), y[idx])
        if not torch.isfinite(loss):
            raise NumericalAbortError("classifier loss diverged", step=step, last_good_state=None)
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        rows.append({"step": step, "loss": float(loss)})
        if step % log_every == 0 or step == steps - 1:
            LOGGER.info("classifier step", extra={"stage": "classifier", "step": step, "loss": float(loss)})
    model.eval()
    if val_inputs is None:
        val_inputs, val_labels = inputs, labels
    val_acc = accuracy(model, val_inputs, val_labels)
    LOGGER.info("classifier trained", extra={"stage": "classifier", "classes": model.n_classes, "val_accuracy": val_acc})
    if gate is not None and val_acc < gate:
        raise ClassifierGateError(f"{type(model).__name__} reached {val_acc:.3f} validation accuracy, gate is {gate}")
    return model, pd.DataFrame(rows, columns=["step", "loss"]), val_acc
