"""Memory-augmented autoencoder.

The latent code addresses a memory of ``memory_dim`` prototypes through a
softmax over dot products. Weights below the shrink threshold are zeroed and
the rest renormalised to sum to one. The decoder only ever sees the convex
combination of memory rows.
"""

from __future__ import annotations

import numpy as np

from ..nn import MlpSpec, backward, forward, init_params
from .base import ModelConfig, ModelState, ParamLayout, encoder_widths, mlp_block, Block


def layout(config: ModelConfig, input_dim: int) -> ParamLayout:
    enc = encoder_widths(config, input_dim, config.latent_dim)
    return ParamLayout((
        mlp_block("encoder", MlpSpec.build(enc)),
        Block("memory", (config.memae_memory_dim, config.latent_dim)),
        mlp_block("decoder", MlpSpec.build(enc[::-1])),
    ))


def initialize(lay: ParamLayout, config: ModelConfig, rng: np.random.Generator) -> np.ndarray:
    enc = init_params(lay.spec("encoder"), rng)
    stdv = 1.0 / np.sqrt(config.latent_dim)
    mem = rng.uniform(-stdv, stdv, size=(config.memae_memory_dim, config.latent_dim)).ravel()
    dec = init_params(lay.spec("decoder"), rng)
    return np.concatenate([enc, mem, dec])


def softmax_rows(a: np.ndarray) -> np.ndarray:
    e = np.exp(a - a.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def address(z: np.ndarray, memory: np.ndarray, shrink: float):
    """Return softmax weights, the shrink mask and the renormalised weights."""
    w = softmax_rows(z @ memory.T)
    keep = w > shrink
    s = w * keep
    w_hat = s / s.sum(axis=1, keepdims=True)
    return w, keep, w_hat


def _forward(state: ModelState, x: np.ndarray):
    lay, cfg = state.layout, state.config
    memory = state.view("memory")
    z, c_enc = forward(lay.spec("encoder"), state.view("encoder"), x)
    w, keep, w_hat = address(z, memory, cfg.memae_shrink_threshold)
    z_hat = w_hat @ memory
    xh, c_dec = forward(lay.spec("decoder"), state.view("decoder"), z_hat)
    return xh, z, w, keep, w_hat, c_enc, c_dec


def _entropy(w_hat: np.ndarray) -> np.ndarray:
    logs = np.log(np.where(w_hat > 0, w_hat, 1.0))
    return -(w_hat * logs).sum(axis=1)


def loss_and_grad(state: ModelState, x: np.ndarray) -> tuple[float, np.ndarray]:
    lay, cfg = state.layout, state.config
    memory = state.view("memory")
    xh, z, w, keep, w_hat, c_enc, c_dec = _forward(state, x)
    n = x.shape[0]
    r = xh - x
    alpha = cfg.memae_entropy_weight
    loss = float(np.mean(r * r) + alpha * np.mean(_entropy(w_hat)))

    grad = np.zeros_like(state.params)
    g_dec, g_zhat = backward(lay.spec("decoder"), c_dec, 2.0 * r / r.size)
    grad[lay.slices["decoder"]] = g_dec

    pos = w_hat > 0
    g_what = g_zhat @ memory.T
    g_what -= (alpha / n) * np.where(pos, np.log(np.where(pos, w_hat, 1.0)) + 1.0, 0.0)
    g_mem = w_hat.T @ g_zhat

    # renormalisation, hard shrink, softmax
    total = (w * keep).sum(axis=1, keepdims=True)
    g_s = (g_what - (g_what * w_hat).sum(axis=1, keepdims=True)) / total
    g_w = g_s * keep
    g_a = w * (g_w - (g_w * w).sum(axis=1, keepdims=True))

    g_z = g_a @ memory
    g_mem += g_a.T @ z
    grad[lay.slices["memory"]] = g_mem.ravel()
    g_enc, _ = backward(lay.spec("encoder"), c_enc, g_z)
    grad[lay.slices["encoder"]] = g_enc
    return loss, grad


def scores(state: ModelState, x: np.ndarray) -> np.ndarray:
    xh = _forward(state, x)[0]
    return np.mean((xh - x) ** 2, axis=1)


def addressing_weights(state: ModelState, x: np.ndarray) -> np.ndarray:
    return _forward(state, x)[4]
