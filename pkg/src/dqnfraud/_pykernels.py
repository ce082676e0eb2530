"""Pure numpy implementations of the hot kernels.

These are the reference versions. The compiled module ``_kernels`` must
produce bit-identical results for the same inputs, so operation order here
is deliberate: keep it in sync with ``_kernels.pyx``.
"""

import numpy as np

_TINY = np.finfo(np.float64).tiny


def adam_update(params, grads, m, v, lr, beta1, beta2, eps, bias1, bias2):
    """In-place Adam update over flat float64 buffers.

    ``bias1`` and ``bias2`` are the bias-correction denominators
    ``1 - beta1**t`` and ``1 - beta2**t``.
    """
    m *= beta1
    m += (1.0 - beta1) * grads
    v *= beta2
    v += (1.0 - beta2) * (grads * grads)
    # moments of never-updated weights decay into subnormals, which are very
    # slow on x86; their contribution to the step is far below rounding anyway
    m[np.abs(m) < _TINY] = 0.0
    v[v < _TINY] = 0.0
    m_hat = m / bias1
    v_hat = v / bias2
    params -= lr * m_hat / (np.sqrt(v_hat) + eps)


def huber(pred, target, delta):
    """Mean Huber loss and its gradient with respect to ``pred``."""
    err = pred - target
    abs_err = np.abs(err)
    quad = abs_err <= delta
    per = np.where(quad, 0.5 * err * err, delta * (abs_err - 0.5 * delta))
    n = err.shape[0]
    grad = np.clip(err, -delta, delta) / n
    return float(per.sum() / n), grad


def rolling_rates(actions, labels, window, episode_length, reset_each_episode):
    """Decline and fraud rates after every decision in a stream.

    Entry ``t`` covers the decisions in ``[start, t]`` where ``start`` is
    ``t - window + 1`` (clipped at 0), and additionally clipped to the first
    index of the current episode when ``reset_each_episode`` is set.
    """
    actions = np.asarray(actions, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    n = actions.shape[0]
    if n == 0:
        return np.zeros(0), np.zeros(0)
    genuine = labels == 0
    fraud = ~genuine
    c_gen = np.concatenate(([0], np.cumsum(genuine)))
    c_dec_gen = np.concatenate(([0], np.cumsum(genuine & (actions == 1))))
    c_fraud = np.concatenate(([0], np.cumsum(fraud)))
    c_app_fraud = np.concatenate(([0], np.cumsum(fraud & (actions == 0))))

    t = np.arange(n)
    start = np.maximum(t - window + 1, 0)
    if reset_each_episode:
        start = np.maximum(start, (t // episode_length) * episode_length)
    end = t + 1
    n_gen = c_gen[end] - c_gen[start]
    n_dec = c_dec_gen[end] - c_dec_gen[start]
    n_fr = c_fraud[end] - c_fraud[start]
    n_app = c_app_fraud[end] - c_app_fraud[start]
    dr = np.zeros(n)
    fr = np.zeros(n)
    np.divide(n_dec, n_gen, out=dr, where=n_gen > 0)
    np.divide(n_app, n_fr, out=fr, where=n_fr > 0)
    return dr, fr
