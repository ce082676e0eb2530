"""Time-ordered transaction stream as an episodic decision environment."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

WINDOW_MODES = ("rolling", "per_episode_reset")


@dataclass
class EnvConfig:
    episode_length: int = 500
    rate_window: int = 4000
    window_mode: str = "rolling"

    def __post_init__(self):
        if self.episode_length < 1 or self.rate_window < 1:
            raise ValueError("episode_length and rate_window must be >= 1")
        if self.window_mode not in WINDOW_MODES:
            raise ValueError(f"window_mode must be one of {WINDOW_MODES}")


class Transaction(NamedTuple):
    index: int
    features: np.ndarray
    amount: float
    label: int


class Transactions:
    """Column-wise store of time-sorted transactions.

    ``features`` is the scaled ``[n x d]`` matrix, ``amounts`` the raw
    amounts, ``labels`` 0 (genuine) / 1 (fraud).
    """

    def __init__(self, features, amounts, labels, times=None, feature_names=None):
        self.features = np.ascontiguousarray(features, dtype=np.float64)
        self.amounts = np.asarray(amounts, dtype=np.float64)
        self.labels = np.asarray(labels, dtype=np.int64)
        n = self.features.shape[0]
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        if self.amounts.shape != (n,) or self.labels.shape != (n,):
            raise ValueError("features, amounts and labels must have the same length")
        if np.any(self.amounts < 0):
            raise ValueError("amounts must be non-negative")
        if not np.all(np.isin(self.labels, (0, 1))):
            raise ValueError("labels must be 0 or 1")
        self.times = np.arange(n, dtype=np.float64) if times is None else np.asarray(times, dtype=np.float64)
        self.feature_names = list(feature_names) if feature_names is not None else [
            f"f{i}" for i in range(self.features.shape[1])
        ]

    def __len__(self):
        return self.features.shape[0]

    def __getitem__(self, i):
        if isinstance(i, slice):
            return Transactions(
                self.features[i], self.amounts[i], self.labels[i], self.times[i], self.feature_names
            )
        return Transaction(int(i), self.features[i], float(self.amounts[i]), int(self.labels[i]))

    @property
    def n_features(self):
        return self.features.shape[1]


class RateTracker:
    """Decline/fraud rates over the last ``window`` (action, label) pairs."""

    def __init__(self, window):
        if window < 1:
            raise ValueError("window must be >= 1")
        self.window = window
        self._pairs = deque()
        self.declined_genuine = 0
        self.genuine = 0
        self.approved_fraud = 0
        self.fraud = 0

    def __len__(self):
        return len(self._pairs)

    def _count(self, action, label, sign):
        if label == 0:
            self.genuine += sign
            if action == 1:
                self.declined_genuine += sign
        else:
            self.fraud += sign
            if action == 0:
                self.approved_fraud += sign

    def record(self, action, label):
        self._pairs.append((action, label))
        self._count(action, label, 1)
        if len(self._pairs) > self.window:
            self._count(*self._pairs.popleft(), -1)

    def clear(self):
        self._pairs.clear()
        self.declined_genuine = self.genuine = self.approved_fraud = self.fraud = 0

    def pairs(self):
        return list(self._pairs)


def compute_dr(tracker):
    return tracker.declined_genuine / tracker.genuine if tracker.genuine else 0.0


def compute_fr(tracker):
    return tracker.approved_fraud / tracker.fraud if tracker.fraud else 0.0


class StepResult(NamedTuple):
    label: int
    next_state: np.ndarray
    episode_done: bool
    stream_done: bool
    amount: float
    dr: float
    fr: float


class SequencingError(RuntimeError):
    """The environment was driven out of order."""


class TransactionEnv:
    """Serves transactions in order; the state is ``[features, dr, fr]``.

    The true label is reported back from :meth:`step` for reward and rate
    bookkeeping but never appears in the state.
    """

    def __init__(self, data, config=None):
        if len(data) == 0:
            raise ValueError("environment needs at least one transaction")
        self.data = data
        self.config = config or EnvConfig()
        self.tracker = RateTracker(self.config.rate_window)
        self.cursor = 0
        self.steps_in_episode = 0
        self.episode = 0
        self.done = False

    @property
    def state_size(self):
        return self.data.n_features + 2

    def _state(self, row, dr, fr):
        s = np.empty(self.state_size)
        s[:-2] = self.data.features[row]
        s[-2] = dr
        s[-1] = fr
        return s

    def reset(self):
        self.tracker.clear()
        self.cursor = 0
        self.steps_in_episode = 0
        self.episode = 0
        self.done = False
        return self._state(0, 0.0, 0.0)

    def step(self, action):
        if self.done:
            raise SequencingError("step() called after the stream was exhausted")
        if action not in (0, 1):
            raise ValueError(f"action must be 0 or 1, got {action!r}")
        t = self.cursor
        label = int(self.data.labels[t])
        amount = float(self.data.amounts[t])
        self.tracker.record(action, label)
        dr = compute_dr(self.tracker)
        fr = compute_fr(self.tracker)

        self.cursor += 1
        self.steps_in_episode += 1
        stream_done = self.cursor >= len(self.data)
        episode_done = self.steps_in_episode == self.config.episode_length or stream_done
        if episode_done:
            self.episode += 1
            self.steps_in_episode = 0
        self.done = stream_done
        if episode_done and self.config.window_mode == "per_episode_reset":
            # the reward for this step still sees the episode's rates
            self.tracker.clear()
            next_dr = next_fr = 0.0
        else:
            next_dr, next_fr = dr, fr
        next_row = t if stream_done else self.cursor
        next_state = self._state(next_row, next_dr, next_fr)
        return StepResult(label, next_state, episode_done, stream_done, amount, dr, fr)


def episode_count(n, episode_length):
    """``(full_episodes, has_partial)`` for a stream of ``n`` decisions."""
    return n // episode_length, n % episode_length != 0
