"""Dense ReLU network with hand-written backprop, Huber/BCE losses and Adam.

Parameters live in one flat float64 buffer; per-layer weights and biases are
views into it. That keeps the optimizer, target-network copies and
checkpointing to single array operations.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import _backend

FORMAT_VERSION = 1


class ShapeError(ValueError):
    """Array dimensions do not match the network."""


class CheckpointError(ValueError):
    """A checkpoint file could not be read back into a network."""


def _layer_slices(layer_sizes):
    slices = []
    offset = 0
    for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        w = slice(offset, offset + n_out * n_in)
        offset += n_out * n_in
        b = slice(offset, offset + n_out)
        offset += n_out
        slices.append((w, b, n_out, n_in))
    return slices, offset


def _validate_sizes(layer_sizes):
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2:
        raise ValueError(f"need at least input and output sizes, got {layer_sizes!r}")
    if any(s < 1 for s in sizes) or any(s != raw for s, raw in zip(sizes, layer_sizes)):
        raise ValueError(f"layer sizes must be positive integers, got {layer_sizes!r}")
    return sizes


class Mlp:
    """Feedforward net: ReLU on hidden layers, identity on the output."""

    activation = "relu"

    def __init__(self, layer_sizes, params=None):
        self.layer_sizes = _validate_sizes(layer_sizes)
        self._slices, n_params = _layer_slices(self.layer_sizes)
        if params is None:
            params = np.zeros(n_params)
        params = np.ascontiguousarray(params, dtype=np.float64)
        if params.shape != (n_params,):
            raise ShapeError(f"expected {n_params} parameters, got shape {params.shape}")
        self.params = params
        self._bind_views()

    def _bind_views(self):
        self.weights = [self.params[w].reshape(n_out, n_in) for w, _, n_out, n_in in self._slices]
        self.biases = [self.params[b] for _, b, _, _ in self._slices]

    @property
    def n_params(self):
        return self.params.shape[0]

    @property
    def n_inputs(self):
        return self.layer_sizes[0]

    @property
    def n_outputs(self):
        return self.layer_sizes[-1]

    def copy(self):
        return Mlp(self.layer_sizes, self.params.copy())

    def load_params(self, other):
        """Copy another net's parameters into this one (views stay valid)."""
        if other.layer_sizes != self.layer_sizes:
            raise ShapeError(f"layer sizes differ: {other.layer_sizes} vs {self.layer_sizes}")
        np.copyto(self.params, other.params)

    def zeros_like(self):
        return Gradients(self.layer_sizes)

    def __call__(self, batch):
        return forward(self, batch)[0]


class Gradients(Mlp):
    """Partial derivatives laid out exactly like an ``Mlp``'s parameters."""


def mlp_init(layer_sizes, seed):
    """Uniform ±sqrt(6/(fan_in+fan_out)) weights, zero biases."""
    net = Mlp(layer_sizes)
    rng = np.random.default_rng(seed)
    for w in net.weights:
        n_out, n_in = w.shape
        limit = math.sqrt(6.0 / (n_in + n_out))
        w[...] = rng.uniform(-limit, limit, size=w.shape)
    return net


@dataclass
class ForwardCache:
    layer_sizes: list
    inputs: list = field(default_factory=list)  # input to each layer
    pre: list = field(default_factory=list)  # pre-activation of each layer


def forward(net, batch):
    """Return ``(outputs [B x out], cache)`` for a ``[B x in]`` batch."""
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.n_inputs:
        raise ShapeError(f"batch shape {x.shape} does not fit input size {net.n_inputs}")
    cache = ForwardCache(list(net.layer_sizes))
    last = len(net.weights) - 1
    a = x
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        cache.inputs.append(a)
        z = a @ w.T + b
        cache.pre.append(z)
        a = z if i == last else np.maximum(z, 0.0)
    return a, cache


def backward(net, cache, output_grad):
    """Backpropagate ``dLoss/dOutputs`` into parameter gradients.

    ``output_grad`` must already carry any batch-mean factor of the loss.
    """
    if cache.layer_sizes != net.layer_sizes or len(cache.inputs) != len(net.weights):
        raise ShapeError("forward cache does not belong to this network")
    g = np.asarray(output_grad, dtype=np.float64)
    batch = cache.inputs[0].shape[0]
    if g.shape != (batch, net.n_outputs):
        raise ShapeError(f"output grad shape {g.shape}, expected {(batch, net.n_outputs)}")
    grads = Gradients(net.layer_sizes)
    for i in range(len(net.weights) - 1, -1, -1):
        grads.weights[i][...] = g.T @ cache.inputs[i]
        grads.biases[i][...] = g.sum(axis=0)
        if i > 0:
            g = (g @ net.weights[i]) * (cache.pre[i - 1] > 0.0)
    return grads


def huber_loss(pred, target, delta=1.0):
    """Mean Huber loss and its gradient with respect to ``pred``."""
    pred = np.ascontiguousarray(pred, dtype=np.float64).ravel()
    target = np.ascontiguousarray(target, dtype=np.float64).ravel()
    if pred.shape != target.shape:
        raise ShapeError(f"pred length {pred.shape[0]} != target length {target.shape[0]}")
    if delta <= 0:
        raise ValueError("delta must be positive")
    if pred.shape[0] == 0:
        return 0.0, pred.copy()
    return _backend.huber(pred, target, float(delta))


def bce_with_logits(logits, labels):
    """Mean binary cross-entropy on raw logits; returns ``(loss, dloss/dlogits)``."""
    z = np.asarray(logits, dtype=np.float64).ravel()
    y = np.asarray(labels, dtype=np.float64).ravel()
    if z.shape != y.shape:
        raise ShapeError(f"logits length {z.shape[0]} != labels length {y.shape[0]}")
    # log(1 + exp(z)) - y*z, written to stay finite for large |z|
    loss = np.maximum(z, 0.0) - y * z + np.log1p(np.exp(-np.abs(z)))
    grad = (sigmoid(z) - y) / z.shape[0]
    return float(loss.mean()), grad


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_net(cls, net, beta1=0.9, beta2=0.999, eps=1e-8):
        return cls(np.zeros(net.n_params), np.zeros(net.n_params), 0, beta1, beta2, eps)

    def copy(self):
        return AdamState(self.m.copy(), self.v.copy(), self.t, self.beta1, self.beta2, self.eps)


def adam_step(net, grads, state, lr):
    """One bias-corrected Adam update, applied to ``net`` in place."""
    if not lr > 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    n = net.n_params
    if grads.params.shape != (n,) or state.m.shape != (n,) or state.v.shape != (n,):
        raise ShapeError("gradient/optimizer buffers do not mirror the network")
    state.t += 1
    bias1 = 1.0 - state.beta1 ** state.t
    bias2 = 1.0 - state.beta2 ** state.t
    _backend.adam_update(
        net.params, grads.params, state.m, state.v,
        float(lr), state.beta1, state.beta2, state.eps, bias1, bias2,
    )
    return net, state


def checkpoint_dict(net, state=None, **extra):
    doc = {
        "format_version": FORMAT_VERSION,
        "layer_sizes": list(net.layer_sizes),
        "activation": net.activation,
        "layers": [
            {"weights": w.ravel().tolist(), "biases": b.tolist()}
            for w, b in zip(net.weights, net.biases)
        ],
    }
    if state is not None:
        doc["adam"] = {
            "t": state.t,
            "beta1": state.beta1,
            "beta2": state.beta2,
            "eps": state.eps,
            "m": state.m.tolist(),
            "v": state.v.tolist(),
        }
    doc.update(extra)
    return doc


def checkpoint_save(net, state, path, **extra):
    """Write a JSON checkpoint. Extra keyword fields are stored at top level."""
    text = json.dumps(checkpoint_dict(net, state, **extra), separators=(",", ":"))
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def checkpoint_from_dict(doc, expected_layer_sizes=None):
    try:
        version = doc["format_version"]
        if version != FORMAT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version!r}")
        if doc.get("activation", "relu") != "relu":
            raise CheckpointError(f"unsupported activation {doc['activation']!r}")
        sizes = _validate_sizes(doc["layer_sizes"])
        slices, n_params = _layer_slices(sizes)
        layers = doc["layers"]
        if len(layers) != len(slices):
            raise CheckpointError(f"{len(layers)} layers stored for layer sizes {sizes}")
        params = np.empty(n_params)
        for layer, (w, b, n_out, n_in) in zip(layers, slices):
            weights = np.asarray(layer["weights"], dtype=np.float64)
            biases = np.asarray(layer["biases"], dtype=np.float64)
            if weights.shape != (n_out * n_in,) or biases.shape != (n_out,):
                raise CheckpointError(f"layer {n_in}->{n_out} has inconsistent parameter counts")
            params[w] = weights
            params[b] = biases
        if not np.all(np.isfinite(params)):
            raise CheckpointError("checkpoint contains non-finite parameters")
        net = Mlp(sizes, params)
        state = None
        if "adam" in doc:
            a = doc["adam"]
            m = np.asarray(a["m"], dtype=np.float64)
            v = np.asarray(a["v"], dtype=np.float64)
            if m.shape != (n_params,) or v.shape != (n_params,):
                raise CheckpointError("optimizer moments do not match the parameter count")
            state = AdamState(m, v, int(a["t"]), float(a["beta1"]), float(a["beta2"]), float(a["eps"]))
    except CheckpointError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"malformed checkpoint: {exc}") from exc
    if expected_layer_sizes is not None and list(expected_layer_sizes) != sizes:
        raise CheckpointError(
            f"checkpoint layer sizes {sizes} do not match expected {list(expected_layer_sizes)}"
        )
    return net, state


def checkpoint_load(path, expected_layer_sizes=None):
    """Read a checkpoint written by :func:`checkpoint_save`.

    Returns ``(net, adam_state_or_None, doc)``; ``doc`` carries any extra
    top-level fields (head, threshold, ...).
    """
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"corrupt checkpoint {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise CheckpointError(f"corrupt checkpoint {path}: not a JSON object")
    net, state = checkpoint_from_dict(doc, expected_layer_sizes)
    return net, state, doc
