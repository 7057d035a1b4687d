"""The five detectors behind one interface.

Every kind supplies ``layout``, ``initialize``, ``loss_and_grad`` and
``scores``; the functions here dispatch on :class:`ModelKind` and own the
optimizer step, the FedProx term and input validation.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from ..errors import ConfigError, NumericError, UsageError
from ..nn import AdamState, adam_step, as_matrix, l2_distance_sq
from . import dae, dsebm, memae, neutralad, svdd
from .base import (
    AUTOENCODER_KINDS,
    ModelConfig,
    ModelKind,
    ModelState,
    ParamLayout,
    halving_widths,
)
from .checkpoint import load_checkpoint, save_checkpoint

_IMPL = {
    ModelKind.DAE: dae,
    ModelKind.DSEBM: dsebm,
    ModelKind.DEEPSVDD: svdd,
    ModelKind.NEUTRALAD: neutralad,
    ModelKind.MEMAE: memae,
}

__all__ = [
    "ModelConfig",
    "ModelKind",
    "ModelState",
    "ParamLayout",
    "anomaly_scores",
    "build_model",
    "halving_widths",
    "init_svdd_center",
    "load_checkpoint",
    "loss_and_grad",
    "save_checkpoint",
    "train_step",
]


def model_layout(config: ModelConfig, input_dim: int) -> ParamLayout:
    if input_dim < 1:
        raise ConfigError("input_dim must be >= 1")
    if config.kind in AUTOENCODER_KINDS and config.latent_dim >= input_dim:
        raise ConfigError(
            f"{config.kind.value}: latent_dim {config.latent_dim} >= input_dim {input_dim} "
            "gives no compression"
        )
    return _IMPL[config.kind].layout(config, input_dim)


def build_model(
    config: ModelConfig,
    input_dim: int,
    seed: int,
    lr: float = 1e-4,
    weight_decay: float = 1e-4,
) -> ModelState:
    lay = model_layout(config, input_dim)
    rng = np.random.default_rng(seed)
    params = _IMPL[config.kind].initialize(lay, config, rng)
    assert params.size == lay.size
    return ModelState(
        config=config,
        input_dim=input_dim,
        layout=lay,
        params=params,
        optimizer=AdamState.zeros(lay.size, lr=lr, weight_decay=weight_decay),
    )


def _check_batch(state: ModelState, batch) -> np.ndarray:
    x = as_matrix(batch)
    if x.shape[1] != state.input_dim:
        raise ConfigError(f"batch has {x.shape[1]} features, model expects {state.input_dim}")
    if x.shape[0] == 0:
        raise UsageError("empty batch")
    return x


def loss_and_grad(state: ModelState, batch) -> tuple[float, np.ndarray]:
    """Objective of the model kind and its gradient w.r.t. the trainable parameters."""
    x = _check_batch(state, batch)
    return _IMPL[state.kind].loss_and_grad(state, x)


def train_step(state: ModelState, batch, prox: tuple[float, np.ndarray] | None = None):
    """One Adam step; ``prox=(mu, global_params)`` adds the FedProx term.

    Returns the new state and ``L_obj + mu/2 * ||w - w_t||^2`` evaluated at the
    parameters before the step.
    """
    loss, grad = loss_and_grad(state, batch)
    if prox is not None:
        mu, anchor = prox
        if mu < 0:
            raise ConfigError("mu must be >= 0")
        anchor = np.asarray(anchor, dtype=np.float64)
        if anchor.shape != state.params.shape:
            raise UsageError("proximal anchor does not match the parameter layout")
        diff = state.params - anchor
        grad = grad + mu * diff
        loss = loss + 0.5 * mu * float(np.dot(diff, diff))
    if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
        raise NumericError(f"{state.kind.value}: non-finite loss or gradient")
    params, opt = adam_step(state.params, grad, state.optimizer)
    return replace(state, params=params, optimizer=opt), loss


def anomaly_scores(state: ModelState, batch) -> np.ndarray:
    x = _check_batch(state, batch)
    s = _IMPL[state.kind].scores(state, x)
    bad = np.flatnonzero(~np.isfinite(s))
    if bad.size:
        raise NumericError(f"{state.kind.value}: non-finite anomaly score for sample {int(bad[0])}")
    return s


def init_svdd_center(state: ModelState, train_data) -> ModelState:
    if state.kind is not ModelKind.DEEPSVDD:
        raise UsageError(f"init_svdd_center called on a {state.kind.value} model")
    x = np.asarray(train_data, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise UsageError("cannot initialise the DeepSVDD center from empty data")
    x = _check_batch(state, x)
    center = svdd.clamp_center(svdd.embed(state, x).mean(axis=0))
    return replace(state, center=center)


def proximal_distance(state: ModelState, anchor: np.ndarray) -> float:
    return l2_distance_sq(state.params, anchor)
