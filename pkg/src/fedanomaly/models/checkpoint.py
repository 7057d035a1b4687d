"""Model checkpoints as ``.npz`` archives.

Archive members:

``header``
    UTF-8 JSON (stored as a 0-d unicode array) with ``format``, ``version``,
    ``config``, ``input_dim``, ``layout`` (block list), ``layout_checksum`` and
    the optimizer hyperparameters and step.
``params``
    float64 flat trainable-parameter vector.
``adam_m``, ``adam_v``
    float64 optimizer moments, same length as ``params``.
``center``
    float64 DeepSVDD center; present only when set.

Loading rebuilds the layout from ``(config, input_dim)`` and refuses files whose
checksum disagrees, so a checkpoint can only be restored into the architecture
that wrote it.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..nn import AdamState
from .base import ModelConfig, ModelState

FORMAT = "fedanomaly-checkpoint"
VERSION = 1


def save_checkpoint(state: ModelState, path) -> Path:
    path = Path(path)
    opt = state.optimizer
    header = {
        "format": FORMAT,
        "version": VERSION,
        "config": state.config.to_dict(),
        "input_dim": state.input_dim,
        "layout": state.layout.describe(),
        "layout_checksum": state.layout.checksum(),
        "optimizer": {
            "step": opt.step,
            "lr": opt.lr,
            "weight_decay": opt.weight_decay,
            "beta1": opt.beta1,
            "beta2": opt.beta2,
            "eps": opt.eps,
        },
    }
    arrays = {
        "header": np.array(json.dumps(header, sort_keys=True)),
        "params": state.params,
        "adam_m": opt.m,
        "adam_v": opt.v,
    }
    if state.center is not None:
        arrays["center"] = state.center
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    return path


def load_checkpoint(path) -> ModelState:
    from . import model_layout

    with np.load(Path(path), allow_pickle=False) as z:
        header = json.loads(str(z["header"]))
        if header.get("format") != FORMAT or header.get("version") != VERSION:
            raise ConfigError(f"{path}: not a version-{VERSION} checkpoint")
        config = ModelConfig.from_dict(header["config"])
        layout = model_layout(config, int(header["input_dim"]))
        if layout.checksum() != header["layout_checksum"]:
            raise ConfigError(f"{path}: layout checksum mismatch")
        o = header["optimizer"]
        opt = AdamState(
            np.array(z["adam_m"]), np.array(z["adam_v"]), int(o["step"]), o["lr"],
            o["weight_decay"], o["beta1"], o["beta2"], o["eps"],
        )
        center = np.array(z["center"]) if "center" in z.files else None
        params = np.array(z["params"])
    if params.size != layout.size:
        raise ConfigError(f"{path}: parameter vector has wrong length")
    return ModelState(config, int(header["input_dim"]), layout, params, opt, center)
