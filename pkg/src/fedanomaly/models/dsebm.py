"""Deep structured energy-based model with one fully connected hidden layer.

Energy::

    E(x) = 0.5 * ||x - b'||^2 - sum_j softplus((x W + b)_j)

Training reconstructs ``x`` as ``x - grad_x E(x)`` and minimises the mean
squared difference, i.e. ``mean(grad_x E(x) ** 2)``. The default anomaly score
is the energy; the reconstruction error is available with
``dsebm_score="reconstruction"``. The hidden width is ``latent_dim``.
"""

from __future__ import annotations

import numpy as np

from ..nn import MlpSpec, init_params, sigmoid, softplus, unflatten
from .base import Block, ModelConfig, ModelState, ParamLayout, mlp_block


def layout(config: ModelConfig, input_dim: int) -> ParamLayout:
    spec = MlpSpec((input_dim, config.latent_dim), ("linear",), (True,))
    return ParamLayout((mlp_block("energy", spec), Block("b_prime", (input_dim,))))


def initialize(lay: ParamLayout, config: ModelConfig, rng: np.random.Generator) -> np.ndarray:
    return np.concatenate([init_params(lay.spec("energy"), rng), np.zeros(lay.blocks[1].size)])


def _parts(state: ModelState):
    (w, b), = unflatten(state.layout.spec("energy"), state.view("energy"))
    return w, b, state.view("b_prime")


def energy(state: ModelState, x: np.ndarray) -> np.ndarray:
    w, b, bp = _parts(state)
    d = x - bp
    return 0.5 * np.sum(d * d, axis=1) - softplus(x @ w + b).sum(axis=1)


def energy_grad_x(state: ModelState, x: np.ndarray) -> np.ndarray:
    w, b, bp = _parts(state)
    return (x - bp) - sigmoid(x @ w + b) @ w.T


def loss_and_grad(state: ModelState, x: np.ndarray) -> tuple[float, np.ndarray]:
    w, b, bp = _parts(state)
    s = sigmoid(x @ w + b)
    r = (x - bp) - s @ w.T
    loss = float(np.mean(r * r))
    g_r = 2.0 * r / r.size

    g_s = -(g_r @ w)
    g_a = g_s * s * (1.0 - s)
    g_w = -(g_r.T @ s) + x.T @ g_a
    g_b = g_a.sum(axis=0)
    g_bp = -g_r.sum(axis=0)

    grad = np.zeros_like(state.params)
    lay = state.layout
    grad[lay.slices["energy"]] = np.concatenate([g_w.ravel(), g_b])
    grad[lay.slices["b_prime"]] = g_bp
    return loss, grad


def scores(state: ModelState, x: np.ndarray) -> np.ndarray:
    if state.config.dsebm_score == "reconstruction":
        r = energy_grad_x(state, x)
        return np.mean(r * r, axis=1)
    return energy(state, x)
