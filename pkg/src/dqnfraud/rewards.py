"""Reward functions for the approve/decline decision.

Actions: 0 approves, 1 declines. Labels: 0 genuine, 1 fraud.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

REWARD_KINDS = ("combined", "rprime", "rdouble")


@dataclass
class RewardConfig:
    kind: str = "combined"
    alpha: float = 0.02
    beta: float = 0.5
    lambda_prime: float | None = None  # None: use the training imbalance ratio
    lambda_double: float = 0.1
    balance_scale: float = 1.0 / 8.0

    def __post_init__(self):
        if self.kind not in REWARD_KINDS:
            raise ValueError(f"reward kind must be one of {REWARD_KINDS}, got {self.kind!r}")
        for name in ("alpha", "beta", "lambda_double", "balance_scale"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.lambda_prime is not None and not self.lambda_prime > 0:
            raise ValueError("lambda_prime must be positive")


@dataclass(frozen=True)
class ImbalanceStats:
    fraud_count: int
    genuine_count: int

    @property
    def ratio(self):
        return self.fraud_count / self.genuine_count


def imbalance_ratio(labels):
    """Fraud-to-genuine count ratio over ``labels`` (pass the training split)."""
    labels = np.asarray(labels)
    fraud = int(np.count_nonzero(labels == 1))
    genuine = int(np.count_nonzero(labels == 0))
    if genuine == 0:
        raise ValueError("imbalance ratio undefined: no genuine transactions")
    return ImbalanceStats(fraud, genuine)


def reward_monetary(action, label, amount, alpha):
    if amount < 0:
        raise ValueError(f"amount must be non-negative, got {amount}")
    # amounts below one unit earn nothing rather than flipping sign
    size = math.log(max(amount, 1.0))
    if label == 0:
        return alpha * size if action == 0 else -alpha * size
    return -size if action == 0 else size


def reward_balance(dr, fr, beta, scale=1.0 / 8.0):
    """Scaled beta-weighted harmonic mean of ``1 - dr`` and ``1 - fr``."""
    if not (0.0 <= dr <= 1.0 and 0.0 <= fr <= 1.0):
        raise ValueError(f"rates must lie in [0, 1], got dr={dr}, fr={fr}")
    if not beta > 0:
        raise ValueError("beta must be positive")
    keep = 1.0 - dr
    catch = 1.0 - fr
    b2 = beta * beta
    denom = b2 * keep + catch
    if denom == 0.0:
        return 0.0
    return scale * (1.0 + b2) * keep * catch / denom


def reward_combined(action, label, amount, dr, fr, config):
    """Monetary plus balance reward; ``dr``/``fr`` include the current action."""
    return reward_monetary(action, label, amount, config.alpha) + reward_balance(
        dr, fr, config.beta, config.balance_scale
    )


def reward_prime(action, label, lam):
    if not lam > 0:
        raise ValueError("lambda must be positive")
    magnitude = 1.0 if label == 1 else lam
    return magnitude if action == label else -magnitude


def make_reward_fn(config, train_labels=None):
    """Bind a config into ``fn(action, label, amount, dr, fr) -> reward``.

    Returns ``(fn, resolved_config)``; for ``rprime`` without an explicit
    lambda the training imbalance ratio is filled in.
    """
    if config.kind == "combined":
        def fn(action, label, amount, dr, fr):
            return reward_combined(action, label, amount, dr, fr, config)
        return fn, config
    if config.kind == "rprime":
        lam = config.lambda_prime
        if lam is None:
            if train_labels is None:
                raise ValueError("rprime needs training labels to derive lambda")
            lam = imbalance_ratio(train_labels).ratio
            if lam == 0:
                raise ValueError("rprime lambda from a fraud-free training split is zero")
        resolved = RewardConfig(**{**config.__dict__, "lambda_prime": lam})
    else:
        lam = config.lambda_double
        resolved = config

    def fn(action, label, amount, dr, fr):
        return reward_prime(action, label, lam)
    return fn, resolved
