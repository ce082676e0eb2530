"""Deep Q-network agent: epsilon-greedy play, experience replay, target net."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, asdict

import numpy as np

from .environment import TransactionEnv
from .neuralnet import AdamState, ShapeError, adam_step, backward, forward, huber_loss, mlp_init

log = logging.getLogger(__name__)

APPROVE, DECLINE = 0, 1


@dataclass
class AgentConfig:
    gamma: float = 0.99
    batch_size: int = 32
    learning_rate: float = 0.005
    epsilon_start: float = 1.0
    epsilon_min: float = 0.01
    epsilon_decay: float = 8e-6
    target_sync_episodes: int = 25
    replay_capacity: int = 75000
    hidden_layers: tuple = (128, 128)
    huber_delta: float = 1.0

    def __post_init__(self):
        self.hidden_layers = tuple(int(h) for h in self.hidden_layers)
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if not 0.0 < self.epsilon_min <= self.epsilon_start <= 1.0:
            raise ValueError("need 0 < epsilon_min <= epsilon_start <= 1")
        if self.epsilon_decay < 0:
            raise ValueError("epsilon_decay must be non-negative")
        if self.batch_size < 1 or self.replay_capacity < 1 or self.target_sync_episodes < 1:
            raise ValueError("batch_size, replay_capacity and target_sync_episodes must be >= 1")
        if not self.learning_rate > 0 or not self.huber_delta > 0:
            raise ValueError("learning_rate and huber_delta must be positive")
        if any(h < 1 for h in self.hidden_layers):
            raise ValueError("hidden layer sizes must be >= 1")


def epsilon(step, config):
    """Linearly annealed exploration rate, floored at ``epsilon_min``."""
    return max(config.epsilon_min, config.epsilon_start - config.epsilon_decay * step)


class ReplayMemory:
    """Fixed-capacity FIFO of transitions backed by preallocated arrays."""

    def __init__(self, capacity, state_size):
        self.capacity = int(capacity)
        self.states = np.zeros((self.capacity, state_size))
        self.next_states = np.zeros((self.capacity, state_size))
        self.actions = np.zeros(self.capacity, dtype=np.int64)
        self.rewards = np.zeros(self.capacity)
        self.terminal = np.zeros(self.capacity, dtype=bool)
        self._head = 0  # next write slot
        self._size = 0

    def __len__(self):
        return self._size

    def push(self, state, action, reward, next_state, terminal):
        if not np.isfinite(reward):
            raise ValueError(f"non-finite reward {reward}")
        i = self._head
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self.terminal[i] = terminal
        self._head = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def ordered_indices(self):
        """Slot indices from oldest to newest."""
        start = (self._head - self._size) % self.capacity
        return (start + np.arange(self._size)) % self.capacity

    def sample(self, rng, batch_size):
        # filled slots are always 0.._size-1, whether or not the buffer wrapped
        idx = rng.choice(self._size, size=batch_size, replace=False)
        return (
            self.states[idx],
            self.actions[idx],
            self.rewards[idx],
            self.next_states[idx],
            self.terminal[idx],
        )


@dataclass
class EpisodeLog:
    episode: int
    reward_sum: float
    mean_loss: float
    dr: float
    fr: float
    epsilon: float
    steps: int


TRAIN_LOG_FIELDS = ["episode", "reward_sum", "mean_loss", "dr", "fr", "epsilon", "steps"]


def write_train_log(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAIN_LOG_FIELDS)
        for r in rows:
            w.writerow([getattr(r, f) for f in TRAIN_LOG_FIELDS])


class DqnAgent:
    """Online Q-network plus a periodically synced target copy."""

    def __init__(self, state_size, config=None, seed=0, net=None):
        self.config = config or AgentConfig()
        self.seed = seed
        sizes = [state_size, *self.config.hidden_layers, 2]
        self.net = net if net is not None else mlp_init(sizes, seed)
        if self.net.layer_sizes[0] != state_size or self.net.n_outputs != 2:
            raise ShapeError(f"network {self.net.layer_sizes} does not fit state size {state_size}")
        self.target = self.net.copy()
        self.adam = AdamState.for_net(self.net)
        self.memory = ReplayMemory(self.config.replay_capacity, state_size)
        # separate stream from the init seed so init and play stay independent
        self.rng = np.random.default_rng([seed, 1])
        self.global_step = 0
        self.episodes_done = 0
        self.sync_episodes = []

    @property
    def state_size(self):
        return self.net.n_inputs

    def q_values(self, states):
        return forward(self.net, states)[0]

    def greedy_action(self, state):
        q = self.q_values(state)[0]
        # ties go to approve
        return DECLINE if q[1] > q[0] else APPROVE

    def select_action(self, state, eps):
        state = np.asarray(state, dtype=np.float64)
        if state.shape[-1] != self.state_size:
            raise ShapeError(f"state length {state.shape[-1]} != network input {self.state_size}")
        if self.rng.random() < eps:
            return int(self.rng.integers(2))
        return self.greedy_action(state)

    def replay_update(self):
        """One Huber/Adam step on a uniform minibatch; ``None`` until enough memory."""
        cfg = self.config
        if len(self.memory) < cfg.batch_size:
            return None
        states, actions, rewards, next_states, terminal = self.memory.sample(self.rng, cfg.batch_size)
        next_q = forward(self.target, next_states)[0]
        targets = rewards + np.where(terminal, 0.0, cfg.gamma * next_q.max(axis=1))
        q, cache = forward(self.net, states)
        rows = np.arange(cfg.batch_size)
        loss, grad = huber_loss(q[rows, actions], targets, cfg.huber_delta)
        out_grad = np.zeros_like(q)
        out_grad[rows, actions] = grad
        adam_step(self.net, backward(self.net, cache, out_grad), self.adam, cfg.learning_rate)
        return loss

    def sync_target(self):
        self.target.load_params(self.net)

    def end_episode(self):
        self.episodes_done += 1
        if self.episodes_done % self.config.target_sync_episodes == 0:
            self.sync_target()
            self.sync_episodes.append(self.episodes_done)


def train(agent, env, reward_fn, progress=None):
    """Single pass over the environment's stream with replay after every step.

    ``reward_fn(action, label, amount, dr, fr)`` receives the rates after the
    current action is recorded. Returns one :class:`EpisodeLog` per episode,
    the trailing partial episode included.
    """
    state = env.reset()
    logs = []
    reward_sum = 0.0
    losses = []
    steps = 0
    while True:
        eps = epsilon(agent.global_step, agent.config)
        action = agent.select_action(state, eps)
        res = env.step(action)
        reward = reward_fn(action, res.label, res.amount, res.dr, res.fr)
        agent.memory.push(state, action, reward, res.next_state, res.stream_done)
        loss = agent.replay_update()
        if loss is not None:
            losses.append(loss)
        agent.global_step += 1
        reward_sum += reward
        steps += 1
        state = res.next_state
        if res.episode_done:
            agent.end_episode()
            row = EpisodeLog(
                agent.episodes_done,
                reward_sum,
                float(np.mean(losses)) if losses else float("nan"),
                res.dr,
                res.fr,
                eps,
                steps,
            )
            logs.append(row)
            if progress is not None:
                progress(row)
            log.debug("episode %d: %s", row.episode, asdict(row))
            reward_sum, losses, steps = 0.0, [], 0
        if res.stream_done:
            return logs


def evaluate(agent, test_data, env_config):
    """Greedy play over ``test_data`` without learning.

    Returns ``(actions, dr, fr)`` where ``dr``/``fr`` are the rates after
    every decision.
    """
    if test_data.n_features + 2 != agent.state_size:
        raise ShapeError(
            f"test data has {test_data.n_features} features; network expects {agent.state_size - 2}"
        )
    env = TransactionEnv(test_data, env_config)
    state = env.reset()
    n = len(test_data)
    actions = np.zeros(n, dtype=np.int64)
    dr = np.zeros(n)
    fr = np.zeros(n)
    for t in range(n):
        a = agent.greedy_action(state)
        res = env.step(a)
        actions[t] = a
        dr[t] = res.dr
        fr[t] = res.fr
        state = res.next_state
    return actions, dr, fr
