"""One-class Deep SVDD: bias-free ReLU network, squared distance to a fixed center."""

from __future__ import annotations

import numpy as np

from ..errors import UsageError
from ..nn import MlpSpec, backward, forward, init_params
from .base import ModelConfig, ModelState, ParamLayout, encoder_widths, mlp_block

CENTER_EPS = 0.1


def layout(config: ModelConfig, input_dim: int) -> ParamLayout:
    widths = encoder_widths(config, input_dim, config.svdd_output_features)
    return ParamLayout((mlp_block("net", MlpSpec.build(widths, bias=False)),))


def initialize(lay: ParamLayout, config: ModelConfig, rng: np.random.Generator) -> np.ndarray:
    return init_params(lay.spec("net"), rng)


def embed(state: ModelState, x: np.ndarray) -> np.ndarray:
    return forward(state.layout.spec("net"), state.view("net"), x)[0]


def clamp_center(c: np.ndarray, eps: float = CENTER_EPS) -> np.ndarray:
    """Push near-zero coordinates out to +-eps; exact zeros go to +eps."""
    c = np.array(c, dtype=np.float64)
    small = np.abs(c) < eps
    c[small] = np.where(c[small] < 0, -eps, eps)
    return c


def _require_center(state: ModelState) -> np.ndarray:
    if state.center is None:
        raise UsageError("DeepSVDD center is not initialised; call init_svdd_center first")
    return state.center


def loss_and_grad(state: ModelState, x: np.ndarray) -> tuple[float, np.ndarray]:
    c = _require_center(state)
    spec = state.layout.spec("net")
    phi, cache = forward(spec, state.view("net"), x)
    d = phi - c
    loss = float(np.mean(np.sum(d * d, axis=1)))
    g, _ = backward(spec, cache, 2.0 * d / x.shape[0])
    return loss, g


def scores(state: ModelState, x: np.ndarray) -> np.ndarray:
    c = _require_center(state)
    d = embed(state, x) - c
    return np.sum(d * d, axis=1)
