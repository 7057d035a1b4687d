"""Deep autoencoder: score = per-sample mean squared reconstruction error."""

from __future__ import annotations

import numpy as np

from ..nn import MlpSpec, backward, forward, init_params
from .base import ModelConfig, ModelState, ParamLayout, encoder_widths, mlp_block


def layout(config: ModelConfig, input_dim: int) -> ParamLayout:
    enc = encoder_widths(config, input_dim, config.latent_dim)
    return ParamLayout((
        mlp_block("encoder", MlpSpec.build(enc)),
        mlp_block("decoder", MlpSpec.build(enc[::-1])),
    ))


def initialize(lay: ParamLayout, config: ModelConfig, rng: np.random.Generator) -> np.ndarray:
    return np.concatenate([init_params(b.spec, rng) for b in lay.blocks])


def reconstruct(state: ModelState, x: np.ndarray):
    enc, dec = state.layout.spec("encoder"), state.layout.spec("decoder")
    z, c_enc = forward(enc, state.view("encoder"), x)
    xh, c_dec = forward(dec, state.view("decoder"), z)
    return xh, (c_enc, c_dec)


def loss_and_grad(state: ModelState, x: np.ndarray) -> tuple[float, np.ndarray]:
    xh, (c_enc, c_dec) = reconstruct(state, x)
    r = xh - x
    loss = float(np.mean(r * r))
    g_out = 2.0 * r / r.size
    lay = state.layout
    grad = np.zeros_like(state.params)
    g_dec, g_z = backward(lay.spec("decoder"), c_dec, g_out)
    g_enc, _ = backward(lay.spec("encoder"), c_enc, g_z)
    grad[lay.slices["decoder"]] = g_dec
    grad[lay.slices["encoder"]] = g_enc
    return loss, grad


def scores(state: ModelState, x: np.ndarray) -> np.ndarray:
    xh, _ = reconstruct(state, x)
    return np.mean((xh - x) ** 2, axis=1)
