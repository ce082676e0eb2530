import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dqnfraud.agent import AgentConfig, DqnAgent, ReplayMemory, epsilon, evaluate, train
from dqnfraud.environment import EnvConfig, TransactionEnv
from dqnfraud.metrics import approval_pct, classification_report
from dqnfraud.neuralnet import Mlp, ShapeError, forward

from conftest import make_transactions


def small_config(**kw):
    base = dict(hidden_layers=(8,), batch_size=4, replay_capacity=100, epsilon_decay=1e-3)
    base.update(kw)
    return AgentConfig(**base)


def linear_agent(w0, w1, b0=0.0, b1=0.0, **kw):
    """State size 1, no hidden layer: Q(s) = [w0*s + b0, w1*s + b1]."""
    net = Mlp([1, 2])
    net.weights[0][:, 0] = [w0, w1]
    net.biases[0][:] = [b0, b1]
    cfg = AgentConfig(hidden_layers=(), **kw)
    return DqnAgent(1, cfg, seed=0, net=net)


class TestEpsilon:
    def test_start(self):
        assert epsilon(0, AgentConfig()) == 1.0

    def test_knee(self):
        cfg = AgentConfig(epsilon_decay=8e-6)
        knee = 123750  # (1 - 0.01) / 8e-6
        assert epsilon(knee, cfg) == pytest.approx(0.01, abs=1e-12)
        assert epsilon(knee - 1000, cfg) == pytest.approx(0.01 + 8e-3, abs=1e-12)
        assert all(epsilon(t, cfg) == 0.01 for t in (knee + 1, knee + 10**6))

    def test_zero_decay(self):
        cfg = AgentConfig(epsilon_decay=0.0)
        assert epsilon(10**9, cfg) == 1.0

    def test_monotone(self):
        cfg = AgentConfig(epsilon_decay=3e-4)
        values = [epsilon(t, cfg) for t in range(0, 5000, 7)]
        assert all(a >= b for a, b in zip(values, values[1:]))


class TestSelectAction:
    def test_pure_exploration(self):
        agent = DqnAgent(3, small_config(), seed=4)
        picks = [agent.select_action(np.zeros(3), 1.0) for _ in range(10000)]
        assert abs(np.mean(picks) - 0.5) <= 0.03

    def test_pure_exploitation(self):
        agent = linear_agent(0.0, 0.0, b0=0.0, b1=1.0)
        assert all(agent.select_action(np.array([0.3]), 0.0) == 1 for _ in range(50))

    def test_tie_goes_to_approve(self):
        agent = linear_agent(1.0, 1.0)
        assert agent.select_action(np.array([2.0]), 0.0) == 0

    def test_dimension_mismatch(self):
        agent = DqnAgent(3, small_config())
        with pytest.raises(ShapeError):
            agent.select_action(np.zeros(4), 0.0)


class TestReplayMemory:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 20), st.integers(0, 60))
    def test_fifo_eviction(self, capacity, inserts):
        mem = ReplayMemory(capacity, 1)
        for i in range(inserts):
            mem.push([i], 0, float(i), [i + 1], False)
        assert len(mem) == min(capacity, inserts)
        kept = sorted(mem.rewards[mem.ordered_indices()].tolist())
        assert kept == [float(i) for i in range(max(0, inserts - capacity), inserts)]

    def test_sample_within_filled(self):
        mem = ReplayMemory(50, 1)
        for i in range(10):
            mem.push([i], 1, float(i), [i], False)
        states, actions, rewards, _, _ = mem.sample(np.random.default_rng(0), 10)
        assert sorted(rewards.tolist()) == [float(i) for i in range(10)]
        assert np.all(actions == 1)

    def test_rejects_nan_reward(self):
        with pytest.raises(ValueError):
            ReplayMemory(2, 1).push([0], 0, float("nan"), [0], False)


class TestReplayUpdate:
    def test_noop_until_batch(self):
        agent = DqnAgent(2, small_config(batch_size=4))
        for _ in range(3):
            agent.memory.push(np.zeros(2), 0, 1.0, np.zeros(2), False)
        before = agent.net.params.copy()
        assert agent.replay_update() is None
        assert np.array_equal(agent.net.params, before)

    def test_gamma_zero_targets_are_rewards(self, monkeypatch):
        agent = DqnAgent(2, small_config(gamma=0.0, batch_size=3))
        rewards = [0.5, -2.0, 3.0]
        for r in rewards:
            agent.memory.push(np.ones(2), 0, r, np.ones(2) * 5, False)
        seen = {}
        import dqnfraud.agent as mod

        real = mod.huber_loss

        def spy(pred, target, delta):
            seen["target"] = np.array(target)
            return real(pred, target, delta)

        monkeypatch.setattr(mod, "huber_loss", spy)
        agent.replay_update()
        assert sorted(seen["target"].tolist()) == sorted(rewards)

    def test_hand_computed_step(self):
        lr, gamma, eps_adam = 0.01, 0.5, 1e-8
        w = [0.3, -0.2]
        b = [0.1, 0.05]
        agent = linear_agent(*w, *b, gamma=gamma, batch_size=2, learning_rate=lr)
        # (s, a, r, s', terminal)
        exps = [(1.0, 0, 0.7, 2.0, False), (-1.5, 1, 4.0, 0.5, True)]
        for s, a, r, s2, term in exps:
            agent.memory.push([s], a, r, [s2], term)
        agent.replay_update()

        def q(x, k):
            return w[k] * x + b[k]

        gw, gb = [0.0, 0.0], [0.0, 0.0]
        for s, a, r, s2, term in exps:
            target = r if term else r + gamma * max(q(s2, 0), q(s2, 1))
            err = q(s, a) - target
            g = max(-1.0, min(1.0, err)) / 2  # Huber delta 1, mean over 2
            gw[a] += g * s
            gb[a] += g
        # first Adam step: m_hat = g, v_hat = g^2
        expect_w = [wi - lr * gi / (abs(gi) + eps_adam) for wi, gi in zip(w, gw)]
        expect_b = [bi - lr * gi / (abs(gi) + eps_adam) for bi, gi in zip(b, gb)]
        np.testing.assert_allclose(agent.net.weights[0][:, 0], expect_w, atol=1e-10, rtol=0)
        np.testing.assert_allclose(agent.net.biases[0], expect_b, atol=1e-10, rtol=0)

    def test_terminal_masks_bootstrap(self, monkeypatch):
        agent = linear_agent(0.0, 0.0, b0=10.0, b1=10.0, gamma=0.9, batch_size=2)
        agent.memory.push([0.0], 0, 1.0, [0.0], True)
        agent.memory.push([0.0], 0, 1.0, [0.0], False)
        import dqnfraud.agent as mod

        seen = {}
        real = mod.huber_loss
        monkeypatch.setattr(mod, "huber_loss", lambda p, t, d: (seen.setdefault("t", np.array(t)), real(p, t, d))[1])
        agent.replay_update()
        assert sorted(seen["t"].tolist()) == [1.0, 1.0 + 0.9 * 10.0]

    def test_gamma_zero_is_regression(self):
        # with gamma 0 the taken-action output regresses onto the reward
        agent = linear_agent(0.0, 0.0, gamma=0.0, batch_size=8, learning_rate=0.05, replay_capacity=8)
        xs = np.linspace(-1, 1, 8)
        for x in xs:
            agent.memory.push([x], 1, 2.0 * x + 0.5, [0.0], False)
        for _ in range(2000):
            agent.replay_update()
        assert agent.net.weights[0][1, 0] == pytest.approx(2.0, abs=1e-3)
        assert agent.net.biases[0][1] == pytest.approx(0.5, abs=1e-3)
        # untaken action receives no gradient
        assert agent.net.weights[0][0, 0] == 0.0 and agent.net.biases[0][0] == 0.0


class TestTarget:
    def test_initially_equal(self):
        agent = DqnAgent(3, small_config(), seed=2)
        assert agent.target.params.tobytes() == agent.net.params.tobytes()
        assert agent.target.params is not agent.net.params

    def test_sync_copies(self):
        agent = DqnAgent(3, small_config(), seed=2)
        agent.net.params += 0.5
        probe = np.random.default_rng(0).normal(size=(6, 3))
        assert not np.array_equal(forward(agent.net, probe)[0], forward(agent.target, probe)[0])
        agent.sync_target()
        assert forward(agent.net, probe)[0].tobytes() == forward(agent.target, probe)[0].tobytes()

    def test_sync_every_k_episodes(self):
        agent = DqnAgent(3, small_config(target_sync_episodes=25))
        for _ in range(75):
            agent.end_episode()
        assert agent.sync_episodes == [25, 50, 75]


class TestTrain:
    def _setup(self, n=600, seed=0, **cfg):
        rng = np.random.default_rng(seed)
        labels = (rng.random(n) < 0.1).astype(int)
        feats = rng.normal(size=(n, 3)) + labels[:, None] * 3
        data = make_transactions(labels, rng.lognormal(3, 1, n), feats)
        env = TransactionEnv(data, EnvConfig(episode_length=50, rate_window=200))
        agent = DqnAgent(env.state_size, small_config(**cfg), seed=seed)
        return agent, env, data

    @staticmethod
    def reward(a, y, amount, dr, fr):
        return 1.0 if a == y else -1.0

    def test_episode_count(self):
        agent, env, _ = self._setup(n=600)
        logs = train(agent, env, self.reward)
        assert len(logs) == 12
        assert [r.episode for r in logs] == list(range(1, 13))
        assert all(r.steps == 50 for r in logs)
        assert agent.global_step == 600

    def test_partial_episode_logged(self):
        agent, env, _ = self._setup(n=620)
        logs = train(agent, env, self.reward)
        assert len(logs) == 13 and logs[-1].steps == 20

    def test_deterministic(self):
        runs = []
        for _ in range(2):
            agent, env, _ = self._setup(n=300)
            logs = train(agent, env, self.reward)
            runs.append((logs, agent.net.params.tobytes()))
        assert runs[0][0] == runs[1][0] and runs[0][1] == runs[1][1]

    def test_epsilon_logged_per_step_schedule(self):
        agent, env, _ = self._setup(n=200, epsilon_decay=2e-3)
        logs = train(agent, env, self.reward)
        # epsilon of each episode's last step
        assert [r.epsilon for r in logs] == [max(0.01, 1 - 2e-3 * (50 * k - 1)) for k in range(1, 5)]


class TestEvaluate:
    def test_deterministic_greedy(self):
        agent = DqnAgent(3, small_config(), seed=1)
        data = make_transactions([0, 1] * 20, features=np.random.default_rng(0).normal(size=(40, 1)))
        a1 = evaluate(agent, data, EnvConfig(episode_length=10))[0]
        a2 = evaluate(agent, data, EnvConfig(episode_length=10))[0]
        assert np.array_equal(a1, a2)
        assert len(agent.memory) == 0

    def test_always_approve(self):
        agent = linear_agent(0.0, 0.0, b0=5.0, b1=-5.0)
        agent = DqnAgent(3, AgentConfig(hidden_layers=()), net=Mlp([3, 2], np.array([0, 0, 0, 0, 0, 0, 5.0, -5.0])))
        labels = [0, 1, 0, 0, 1]
        data = make_transactions(labels)
        actions = evaluate(agent, data, EnvConfig())[0]
        assert approval_pct(actions) == 100.0
        assert classification_report(actions, labels)[1] == 0.0

    def test_scripted_tiny_net(self):
        # Q = [x, 1 - x] on feature x plus zero weight on dr/fr
        net = Mlp([3, 2], np.array([1.0, 0, 0, -1.0, 0, 0, 0.0, 1.0]))
        agent = DqnAgent(3, AgentConfig(hidden_layers=()), net=net)
        xs = [0.2, 0.7, 0.5, 0.9, 0.1]
        data = make_transactions([0, 0, 1, 1, 0], features=np.array(xs)[:, None])
        actions = evaluate(agent, data, EnvConfig())[0]
        expected = [1 if (1 - x) > x else 0 for x in xs]  # tie at 0.5 -> approve
        assert actions.tolist() == expected

    def test_feature_mismatch(self):
        agent = DqnAgent(4, small_config())
        with pytest.raises(ShapeError):
            evaluate(agent, make_transactions([0, 1]), EnvConfig())
