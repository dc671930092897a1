"""Dense feed-forward networks with hand-rolled exact backprop.

Everything is float64 and functional: forward, backward, and optimizer
steps return fresh structures and never mutate their arguments, which
keeps finite-difference checks and bitwise reproducibility honest.
Hidden layers are ReLU, the output layer is linear.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class Mlp:
    """Weights are (fan_out, fan_in) per layer; biases are (fan_out,)."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[1], *(w.shape[0] for w in self.weights))

    def copy(self) -> "Mlp":
        return Mlp([w.copy() for w in self.weights], [b.copy() for b in self.biases])


@dataclass
class ForwardCache:
    """Intermediates retained by mlp_forward for the matching backward pass."""

    activations: list[np.ndarray]  # inputs to each layer; activations[0] is x
    preacts: list[np.ndarray]  # pre-activation z per layer
    single: bool  # input was a single vector, not a batch


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    inputs: np.ndarray  # gradient with respect to the network input


def mlp_init(layer_sizes, seed) -> Mlp:
    """Glorot-uniform weights, zero biases; deterministic in the seed."""
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 2:
        raise ValueError("need at least an input and an output layer")
    if any(s < 1 for s in sizes):
        raise ValueError("layer sizes must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Mlp(weights, biases)


def mlp_forward(params: Mlp, inputs) -> tuple[np.ndarray, ForwardCache]:
    """Evaluate the network on a vector or a (batch, in) matrix."""
    x = np.asarray(inputs, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != params.weights[0].shape[1]:
        raise ValueError(
            f"input of shape {np.shape(inputs)} does not match first layer "
            f"width {params.weights[0].shape[1]}"
        )
    activations = [x]
    preacts = []
    last = len(params.weights) - 1
    for layer, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = activations[-1] @ w.T + b
        preacts.append(z)
        activations.append(np.maximum(z, 0.0) if layer < last else z)
    out = activations[-1]
    cache = ForwardCache(activations=activations, preacts=preacts, single=single)
    return (out[0] if single else out), cache


def mlp_backward(params: Mlp, cache: ForwardCache, grad_output) -> Gradients:
    """Exact reverse-mode gradients of sum(output * grad_output).

    Parameter gradients are summed over the batch; the input gradient keeps
    the batch dimension.
    """
    num_layers = len(params.weights)
    if len(cache.preacts) != num_layers or cache.preacts[-1].shape[1] != len(
        params.biases[-1]
    ):
        raise ValueError("cache does not match network shape")
    g = np.asarray(grad_output, dtype=np.float64)
    if cache.single:
        g = g[None, :]
    if g.shape != cache.preacts[-1].shape:
        raise ValueError(
            f"grad_output shape {np.shape(grad_output)} does not match output "
            f"shape {cache.preacts[-1].shape}"
        )
    weight_grads: list[np.ndarray] = [None] * num_layers  # type: ignore[list-item]
    bias_grads: list[np.ndarray] = [None] * num_layers  # type: ignore[list-item]
    last = num_layers - 1
    for layer in range(last, -1, -1):
        if layer != last:
            g = g * (cache.preacts[layer] > 0)
        weight_grads[layer] = g.T @ cache.activations[layer]
        bias_grads[layer] = g.sum(axis=0)
        g = g @ params.weights[layer]
    return Gradients(
        weights=weight_grads,
        biases=bias_grads,
        inputs=g[0] if cache.single else g,
    )


@dataclass
class AdamState:
    """First/second moment accumulators shaped like the network."""

    weight_m: list[np.ndarray]
    weight_v: list[np.ndarray]
    bias_m: list[np.ndarray]
    bias_v: list[np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: Mlp) -> "AdamState":
        return cls(
            weight_m=[np.zeros_like(w) for w in params.weights],
            weight_v=[np.zeros_like(w) for w in params.weights],
            bias_m=[np.zeros_like(b) for b in params.biases],
            bias_v=[np.zeros_like(b) for b in params.biases],
        )


def adam_step(
    params: Mlp, grads: Gradients, state: AdamState, lr: float
) -> tuple[Mlp, AdamState]:
    """One bias-corrected Adam update; returns fresh params and state."""
    t = state.t + 1
    corr1 = 1.0 - state.beta1**t
    corr2 = 1.0 - state.beta2**t

    def update(p, g, m, v):
        m_new = state.beta1 * m + (1.0 - state.beta1) * g
        v_new = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        p_new = p - lr * (m_new / corr1) / (np.sqrt(v_new / corr2) + state.eps)
        return p_new, m_new, v_new

    new_w, new_b = [], []
    wm, wv, bm, bv = [], [], [], []
    for p, g, m, v in zip(params.weights, grads.weights, state.weight_m, state.weight_v):
        p_new, m_new, v_new = update(p, g, m, v)
        new_w.append(p_new)
        wm.append(m_new)
        wv.append(v_new)
    for p, g, m, v in zip(params.biases, grads.biases, state.bias_m, state.bias_v):
        p_new, m_new, v_new = update(p, g, m, v)
        new_b.append(p_new)
        bm.append(m_new)
        bv.append(v_new)
    new_state = AdamState(
        weight_m=wm,
        weight_v=wv,
        bias_m=bm,
        bias_v=bv,
        t=t,
        beta1=state.beta1,
        beta2=state.beta2,
        eps=state.eps,
    )
    return Mlp(new_w, new_b), new_state


def soft_update(target: Mlp, online: Mlp, tau: float) -> Mlp:
    """Elementwise convex step of the target toward the online network."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    if [w.shape for w in target.weights] != [w.shape for w in online.weights]:
        raise ValueError("target and online networks have different shapes")
    return Mlp(
        [tau * wo + (1.0 - tau) * wt for wt, wo in zip(target.weights, online.weights)],
        [tau * bo + (1.0 - tau) * bt for bt, bo in zip(target.biases, online.biases)],
    )


def softmax(x, axis: int = -1) -> np.ndarray:
    z = np.asarray(x, dtype=np.float64)
    z = z - np.max(z, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def one_hot(index: int, size: int) -> np.ndarray:
    v = np.zeros(size)
    v[index] = 1.0
    return v


def gumbel_softmax_sample(
    logits,
    temperature: float,
    rng: np.random.Generator | None = None,
    noise: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Sample a categorical relaxation; returns (hard one-hot, relaxed probs).

    With noise, argmax(logits + gumbel) is an exact categorical draw and the
    relaxed vector is the tempered softmax of the perturbed logits.  Without
    noise, the hard vector is the greedy argmax of the raw logits.
    """
    l = np.asarray(logits, dtype=np.float64)
    if not temperature > 0:
        raise ValueError("temperature must be positive")
    if noise:
        if rng is None:
            raise ValueError("rng is required when sampling with noise")
        relaxed = softmax((l + rng.gumbel(size=l.shape)) / temperature)
        hard = one_hot(int(np.argmax(relaxed)), l.shape[-1])
    else:
        relaxed = softmax(l / temperature)
        hard = one_hot(int(np.argmax(l)), l.shape[-1])
    return hard, relaxed
