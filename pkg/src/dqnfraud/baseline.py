"""Supervised feedforward baseline with early stopping and an F1-tuned threshold.

The baseline sees only the transaction features; it has no access to the
environment's decline/fraud rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .neuralnet import AdamState, adam_step, backward, bce_with_logits, forward, mlp_init, sigmoid


class TrainingError(RuntimeError):
    pass


@dataclass
class BaselineConfig:
    hidden_layers: tuple = (128, 128)
    learning_rate: float = 0.0002
    batch_size: int = 256
    max_epochs: int = 100
    patience: int = 5
    threshold_grid: int = 999

    def __post_init__(self):
        self.hidden_layers = tuple(int(h) for h in self.hidden_layers)
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.patience < 1 or self.batch_size < 1 or self.max_epochs < 1 or self.threshold_grid < 1:
            raise ValueError("patience, batch_size, max_epochs and threshold_grid must be >= 1")


@dataclass
class BaselineResult:
    net: object
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False


def _loss(net, x, y):
    return bce_with_logits(forward(net, x)[0][:, 0], y)[0]


def train_baseline(train, validation, config=None, seed=0):
    """Mini-batch BCE training; keeps the parameters of the best validation epoch.

    ``val_loss[0]`` is the loss of the untrained network, ``val_loss[e]`` the
    loss after epoch ``e``.
    """
    config = config or BaselineConfig()
    net = mlp_init([train.n_features, *config.hidden_layers, 1], seed)
    adam = AdamState.for_net(net)
    rng = np.random.default_rng([seed, 2])
    x, y = train.features, train.labels.astype(np.float64)
    vx, vy = validation.features, validation.labels.astype(np.float64)

    result = BaselineResult(net)
    result.train_loss.append(_loss(net, x, y))
    result.val_loss.append(_loss(net, vx, vy))
    best_params = net.params.copy()
    best_val = result.val_loss[0]
    stale = 0
    n = x.shape[0]
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            logits, cache = forward(net, x[idx])
            loss, grad = bce_with_logits(logits[:, 0], y[idx])
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite loss {loss} at epoch {epoch}, batch offset {start}")
            total += loss * idx.shape[0]
            if config.learning_rate > 0:
                adam_step(net, backward(net, cache, grad[:, None]), adam, config.learning_rate)
        result.train_loss.append(total / n)
        val = _loss(net, vx, vy)
        if not math.isfinite(val):
            raise TrainingError(f"non-finite validation loss at epoch {epoch}")
        result.val_loss.append(val)
        if val < best_val:
            best_val, best_params, stale = val, net.params.copy(), 0
            result.best_epoch = epoch
        else:
            stale += 1
            if stale >= config.patience:
                result.stopped_early = True
                break
    np.copyto(net.params, best_params)
    return result


def scores(net, data):
    return sigmoid(forward(net, data.features)[0][:, 0])


def threshold_grid(points=999):
    """``points`` evenly spaced thresholds strictly inside (0, 1)."""
    return np.arange(1, points + 1) / (points + 1)


def f1_at_thresholds(score, labels, grid):
    """F1 of ``score >= threshold`` for every threshold in ``grid``."""
    score = np.asarray(score, dtype=np.float64)
    y = np.asarray(labels) == 1
    order = np.sort(score)
    fraud_sorted = np.sort(score[y])
    # counts of scores >= t via sorted search
    declined = order.shape[0] - np.searchsorted(order, grid, side="left")
    tp = fraud_sorted.shape[0] - np.searchsorted(fraud_sorted, grid, side="left")
    n_fraud = fraud_sorted.shape[0]
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(declined > 0, tp / declined, 0.0)
        recall = np.where(n_fraud > 0, tp / max(n_fraud, 1), 0.0)
        denom = precision + recall
        f1 = np.where(denom > 0, 2 * precision * recall / np.where(denom > 0, denom, 1.0), 0.0)
    return f1


def tune_threshold(net_or_scores, validation=None, points=999):
    """F1-maximizing threshold on the grid; ties resolve to the lowest threshold.

    Accepts a trained net plus validation data, or a raw ``(scores, labels)``
    pair as the first argument.
    """
    if validation is None:
        score, labels = net_or_scores
    else:
        score, labels = scores(net_or_scores, validation), validation.labels
    grid = threshold_grid(points)
    f1 = f1_at_thresholds(score, labels, grid)
    return float(grid[int(np.argmax(f1))])


def predict_baseline(net, threshold, data):
    """Decline (1) where the fraud probability reaches ``threshold``."""
    return (scores(net, data) >= threshold).astype(np.int64)
