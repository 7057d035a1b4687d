"""Experiment grid files.

A YAML (or JSON) file with three top-level keys::

    output_dir: runs/table2
    datasets:
      thyroid: {path: data/thyroid.csv}          # schema defaults to the shipped one of the same name
    defaults: {epochs: 200, val_fraction: 0.5}   # optional, merged into every experiment
    experiments:
      - dataset: [thyroid]
        model: [DAE, MEMAE]                      # or {kind: DAE, latent_dim: 2}
        mode: [centralized, federated]
        n_clients: [3, 5, 7]
        seeds: [0, 1, 2]

``dataset``, ``model``, ``mode``, ``n_clients``, ``aggregator``, ``mu`` and
``seeds`` may be lists; every experiment block expands to the cartesian
product. Centralized cells ignore the federated keys and are deduplicated.
"""

from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from ..errors import ConfigError
from ..federation import FedConfig
from ..models import ModelConfig, ModelKind
from . import presets

EXPERIMENT_KEYS = {
    "dataset", "model", "mode", "n_clients", "aggregator", "mu", "seeds", "epochs",
    "local_epochs", "rounds", "batch_size", "val_fraction", "lr", "weight_decay",
    "subsample", "exhaustive_threshold", "reset_optimizer",
}
GRID_KEYS = ("dataset", "model", "mode", "n_clients", "aggregator", "mu", "seeds")
DATASET_KEYS = {"path", "schema", "batch_size"}
TOP_KEYS = {"output_dir", "datasets", "defaults", "experiments"}
MODES = ("centralized", "federated")


@dataclass
class ExperimentSpec:
    dataset_id: str
    data_path: str
    schema: str
    model: ModelConfig
    epochs: int
    mode: str
    seed: int
    fed: FedConfig | None = None
    batch_size: int = presets.DEFAULT_BATCH_SIZE
    val_fraction: float = 0.5
    lr: float = presets.LR
    weight_decay: float = presets.WEIGHT_DECAY
    subsample: float | None = None
    exhaustive_threshold: bool = False
    output_dir: str = "runs"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "federated" and self.fed is None:
            raise ConfigError("federated mode requires a federated configuration")
        if self.mode == "centralized":
            self.fed = None
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["model"] = self.model.to_dict()
        if self.fed is not None:
            d["fed"] = asdict(self.fed)
            d["fed"].pop("threads", None)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        d = dict(d)
        d["model"] = ModelConfig.from_dict(d["model"])
        if d.get("fed") is not None:
            d["fed"] = FedConfig(**d["fed"])
        return cls(**d)

    def spec_hash(self) -> str:
        d = self.to_dict()
        d.pop("output_dir")
        blob = json.dumps(d, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    @property
    def label(self) -> str:
        if self.mode == "centralized":
            return f"{self.dataset_id}/{self.model.kind.value}/centralized/seed{self.seed}"
        f = self.fed
        extra = f"/mu{f.mu:g}" if f.aggregator == "fedprox" else ""
        return f"{self.dataset_id}/{self.model.kind.value}/{f.aggregator}-{f.n_clients}{extra}/seed{self.seed}"


def _as_list(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


def _model_config(entry, dataset_id: str, where: str) -> ModelConfig:
    if isinstance(entry, str):
        entry = {"kind": entry}
    if not isinstance(entry, dict) or "kind" not in entry:
        raise ConfigError(f"{where}: model must be a kind name or a mapping with 'kind'")
    try:
        kind = ModelKind.parse(entry["kind"])
        fields = presets.model_defaults(dataset_id, kind)
        fields.update({k: v for k, v in entry.items() if k != "kind"})
        return ModelConfig.from_dict({"kind": kind, **fields})
    except (ConfigError, TypeError) as e:
        raise ConfigError(f"{where}: {e}") from None


def _expand(block: dict, datasets: dict, output_dir: str, where: str) -> list[ExperimentSpec]:
    unknown = set(block) - EXPERIMENT_KEYS
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    if "dataset" not in block or "model" not in block:
        raise ConfigError(f"{where}: 'dataset' and 'model' are required")
    axes = {}
    for key in GRID_KEYS:
        if key == "seeds":
            axes[key] = _as_list(block.get("seeds", list(presets.DEFAULT_SEEDS)))
        elif key in block:
            axes[key] = _as_list(block[key])
        else:
            axes[key] = [None]
    if not all(axes[k] for k in axes):
        raise ConfigError(f"{where}: empty list in grid axis")

    specs = []
    for values in itertools.product(*(axes[k] for k in GRID_KEYS)):
        cell = dict(zip(GRID_KEYS, values))
        ds_id = str(cell["dataset"])
        if ds_id not in datasets:
            raise ConfigError(f"{where}: dataset {ds_id!r} is not declared under 'datasets'")
        ds = datasets[ds_id]
        mode = cell["mode"] or "centralized"
        if mode not in MODES:
            raise ConfigError(f"{where}: mode must be one of {MODES}, got {mode!r}")
        epochs = int(block.get("epochs", presets.DEFAULT_EPOCHS))
        batch = int(block.get("batch_size", ds.get("batch_size", presets.BATCH_SIZE.get(ds_id, presets.DEFAULT_BATCH_SIZE))))
        fed = None
        if mode == "federated":
            aggregator = cell["aggregator"] or ("fedprox" if cell["mu"] is not None else "fedavg")
            local = int(block.get("local_epochs", presets.LOCAL_EPOCHS))
            rounds = int(block.get("rounds", max(1, epochs // local)))
            try:
                fed = FedConfig(
                    n_clients=int(cell["n_clients"] or 3),
                    local_epochs=local,
                    rounds=rounds,
                    aggregator=aggregator,
                    mu=float(cell["mu"] or 0.0) if aggregator == "fedprox" else 0.0,
                    batch_size=batch,
                    reset_optimizer=bool(block.get("reset_optimizer", False)),
                )
            except ConfigError as e:
                raise ConfigError(f"{where}: {e}") from None
        try:
            spec = ExperimentSpec(
                dataset_id=ds_id,
                data_path=str(ds["path"]),
                schema=str(ds.get("schema", ds_id)),
                model=_model_config(cell["model"], ds_id, where),
                epochs=epochs,
                mode=mode,
                seed=int(cell["seeds"]),
                fed=fed,
                batch_size=batch,
                val_fraction=float(block.get("val_fraction", 0.5)),
                lr=float(block.get("lr", presets.LR)),
                weight_decay=float(block.get("weight_decay", presets.WEIGHT_DECAY)),
                subsample=block.get("subsample"),
                exhaustive_threshold=bool(block.get("exhaustive_threshold", False)),
                output_dir=output_dir,
            )
        except (ConfigError, ValueError, TypeError) as e:
            raise ConfigError(f"{where}: {e}") from None
        specs.append(spec)
    return specs


def parse_config_dict(cfg: dict, base_dir: Path | None = None) -> list[ExperimentSpec]:
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a mapping")
    unknown = set(cfg) - TOP_KEYS
    if unknown:
        raise ConfigError(f"top level: unknown keys {sorted(unknown)}")
    datasets = cfg.get("datasets") or {}
    for ds_id, ds in datasets.items():
        if not isinstance(ds, dict) or "path" not in ds:
            raise ConfigError(f"datasets.{ds_id}: needs a 'path'")
        bad = set(ds) - DATASET_KEYS
        if bad:
            raise ConfigError(f"datasets.{ds_id}: unknown keys {sorted(bad)}")
        if base_dir is not None and not Path(ds["path"]).is_absolute():
            ds["path"] = str((base_dir / ds["path"]))
    defaults = cfg.get("defaults") or {}
    bad = set(defaults) - EXPERIMENT_KEYS
    if bad:
        raise ConfigError(f"defaults: unknown keys {sorted(bad)}")
    blocks = cfg.get("experiments") or []
    output_dir = str(cfg.get("output_dir", "runs"))
    specs: list[ExperimentSpec] = []
    seen = set()
    for i, block in enumerate(blocks):
        if not isinstance(block, dict):
            raise ConfigError(f"experiments[{i}]: must be a mapping")
        for spec in _expand({**defaults, **block}, datasets, output_dir, f"experiments[{i}]"):
            h = spec.spec_hash()
            if h not in seen:
                seen.add(h)
                specs.append(spec)
    if not specs:
        raise ConfigError("the experiment grid is empty")
    return specs


def parse_config(path) -> list[ExperimentSpec]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} not found")
    try:
        cfg = yaml.safe_load(path.read_text())
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: {e}") from None
    return parse_config_dict(cfg or {}, base_dir=path.parent)
