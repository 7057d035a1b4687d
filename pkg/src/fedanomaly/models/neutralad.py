"""Neural transformation learning with the deterministic contrastive loss (DCL).

``K`` learnable transformations map a sample to ``K`` views; a shared encoder
embeds the sample and every view. For view ``k`` the DCL term is::

    -log( h(z_k, z) / (h(z_k, z) + sum_{l != k} h(z_k, z_l)) ),   h(a, b) = exp(cos(a, b) / tau)

The per-sample sum over ``k`` is both the training objective and the anomaly
score.
"""

from __future__ import annotations

import numpy as np

from ..nn import MlpSpec, backward, forward, init_params
from .base import ModelConfig, ModelState, ParamLayout, encoder_widths, mlp_block

NORM_EPS = 1e-12


def _transform_names(config: ModelConfig) -> list[str]:
    return [f"transform.{k}" for k in range(config.neutralad_num_transforms)]


def layout(config: ModelConfig, input_dim: int) -> ParamLayout:
    out_act = "sigmoid" if config.neutralad_trans_type == "multiplicative" else "linear"
    t_spec = MlpSpec.build((input_dim, input_dim, input_dim), output=out_act)
    widths = encoder_widths(config, input_dim, config.latent_dim)
    if len(widths) == 2 and config.encoder_widths is None:
        # no halving layer fits above the latent size; keep one nonlinearity
        widths = [input_dim, config.latent_dim, config.latent_dim]
    blocks = [mlp_block(name, t_spec) for name in _transform_names(config)]
    blocks.append(mlp_block("encoder", MlpSpec.build(widths)))
    return ParamLayout(tuple(blocks))


def initialize(lay: ParamLayout, config: ModelConfig, rng: np.random.Generator) -> np.ndarray:
    return np.concatenate([init_params(b.spec, rng) for b in lay.blocks])


def transform_views(state: ModelState, x: np.ndarray):
    residual = state.config.neutralad_trans_type == "residual"
    views, caches = [], []
    for name in _transform_names(state.config):
        m, cache = forward(state.layout.spec(name), state.view(name), x)
        views.append(x + m if residual else x * m)
        caches.append(cache)
    return views, caches


def _dcl(state: ModelState, x: np.ndarray):
    n = x.shape[0]
    views, t_caches = transform_views(state, x)
    k1 = len(views) + 1
    stacked = np.concatenate([x, *views], axis=0)
    z, e_cache = forward(state.layout.spec("encoder"), state.view("encoder"), stacked)
    z = z.reshape(k1, n, -1).transpose(1, 0, 2)  # (n, K+1, L)
    r = np.sqrt(np.sum(z * z, axis=2, keepdims=True) + NORM_EPS)
    u = z / r
    sim = np.einsum("nil,njl->nij", u, u) / state.config.neutralad_temperature
    masked = sim.copy()
    idx = np.arange(k1)
    masked[:, idx, idx] = -np.inf
    rows = masked[:, 1:, :]  # one row per transformation
    top = rows.max(axis=2, keepdims=True)
    p = np.exp(rows - top)
    denom = p.sum(axis=2, keepdims=True)
    lse = (np.log(denom) + top)[..., 0]
    per_view = lse - sim[:, 1:, 0]
    return per_view.sum(axis=1), (views, t_caches, e_cache, z, r, u, p / denom)


def loss_and_grad(state: ModelState, x: np.ndarray) -> tuple[float, np.ndarray]:
    cfg, lay = state.config, state.layout
    n = x.shape[0]
    per_sample, (views, t_caches, e_cache, z, r, u, prob) = _dcl(state, x)
    loss = float(np.mean(per_sample))
    k1 = len(views) + 1

    g_sim = np.zeros((n, k1, k1))
    g_sim[:, 1:, :] = prob
    g_sim[:, 1:, 0] -= 1.0
    g_sim /= n
    g_u = np.einsum("nij,njl->nil", g_sim + g_sim.transpose(0, 2, 1), u) / cfg.neutralad_temperature
    g_z = (g_u - u * np.sum(u * g_u, axis=2, keepdims=True)) / r
    g_z = g_z.transpose(1, 0, 2).reshape(k1 * n, -1)

    grad = np.zeros_like(state.params)
    g_enc, g_stacked = backward(lay.spec("encoder"), e_cache, g_z)
    grad[lay.slices["encoder"]] = g_enc
    residual = cfg.neutralad_trans_type == "residual"
    for k, name in enumerate(_transform_names(cfg)):
        g_view = g_stacked[(k + 1) * n : (k + 2) * n]
        g_m = g_view if residual else g_view * x
        g_t, _ = backward(lay.spec(name), t_caches[k], g_m)
        grad[lay.slices[name]] = g_t
    return loss, grad


def scores(state: ModelState, x: np.ndarray) -> np.ndarray:
    return _dcl(state, x)[0]
