"""Configuration, parameter layout and state shared by all detectors."""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import asdict, dataclass, field
from functools import cached_property

import numpy as np

from ..errors import ConfigError
from ..nn import AdamState, MlpSpec


class ModelKind(str, enum.Enum):
    DAE = "DAE"
    DSEBM = "DSEBM"
    DEEPSVDD = "DeepSVDD"
    NEUTRALAD = "NeuTraLAD"
    MEMAE = "MemAE"

    @classmethod
    def parse(cls, value) -> "ModelKind":
        if isinstance(value, cls):
            return value
        key = str(value).upper().replace("-", "").replace("_", "")
        for kind in cls:
            if kind.value.upper() == key:
                return kind
        raise ConfigError(f"unknown model kind {value!r}; expected one of {[k.value for k in cls]}")


AUTOENCODER_KINDS = (ModelKind.DAE, ModelKind.MEMAE)


@dataclass(frozen=True)
class ModelConfig:
    """Hyperparameters of one detector.

    ``encoder_widths`` optionally fixes the hidden widths of the encoder
    (or of the DeepSVDD / NeuTraLAD feature network); the input and
    output widths always come from the data and the latent size.
    """

    kind: ModelKind
    latent_dim: int = 2
    memae_memory_dim: int = 50
    svdd_output_features: int = 32
    neutralad_trans_type: str = "residual"
    neutralad_num_transforms: int = 11
    neutralad_temperature: float = 0.1
    memae_shrink_threshold: float = 0.0025
    memae_entropy_weight: float = 0.0002
    dsebm_score: str = "energy"
    encoder_widths: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind.parse(self.kind))
        if self.encoder_widths is not None:
            object.__setattr__(self, "encoder_widths", tuple(int(w) for w in self.encoder_widths))
            if any(w < 1 for w in self.encoder_widths):
                raise ConfigError("encoder_widths entries must be >= 1")
        for name in ("latent_dim", "memae_memory_dim", "svdd_output_features", "neutralad_num_transforms"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.neutralad_num_transforms < 2:
            raise ConfigError("NeuTraLAD needs at least 2 transformations")
        if self.neutralad_trans_type not in ("residual", "multiplicative"):
            raise ConfigError(f"unknown transformation type {self.neutralad_trans_type!r}")
        if not self.neutralad_temperature > 0:
            raise ConfigError("temperature must be > 0")
        if not 0 <= self.memae_shrink_threshold < 1.0 / self.memae_memory_dim:
            # the largest addressing weight is >= 1/N, so a larger threshold can empty a row
            raise ConfigError("shrink threshold must lie in [0, 1/memory_dim)")
        if self.memae_entropy_weight < 0:
            raise ConfigError("entropy weight must be >= 0")
        if self.dsebm_score not in ("energy", "reconstruction"):
            raise ConfigError(f"unknown DSEBM score {self.dsebm_score!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        d["encoder_widths"] = list(self.encoder_widths) if self.encoder_widths else None
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown model config keys {sorted(unknown)}")
        return cls(**d)


def halving_widths(input_dim: int, output_dim: int, max_hidden: int = 2) -> list[int]:
    """input -> input//2 -> input//4 -> output, keeping only hidden widths above output."""
    widths = [input_dim]
    w = input_dim
    for _ in range(max_hidden):
        w //= 2
        if w <= output_dim:
            break
        widths.append(w)
    widths.append(output_dim)
    return widths


def encoder_widths(config: ModelConfig, input_dim: int, output_dim: int) -> list[int]:
    if config.encoder_widths is not None:
        return [input_dim, *config.encoder_widths, output_dim]
    return halving_widths(input_dim, output_dim)


@dataclass(frozen=True)
class Block:
    name: str
    shape: tuple[int, ...]
    spec: MlpSpec | None = None

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))


def mlp_block(name: str, spec: MlpSpec) -> Block:
    return Block(name, (spec.n_params,), spec)


@dataclass(frozen=True)
class ParamLayout:
    """Ordered named blocks of one flat trainable-parameter vector."""

    blocks: tuple[Block, ...]

    @cached_property
    def slices(self) -> dict[str, slice]:
        out, off = {}, 0
        for b in self.blocks:
            out[b.name] = slice(off, off + b.size)
            off += b.size
        return out

    @property
    def size(self) -> int:
        return sum(b.size for b in self.blocks)

    def spec(self, name: str) -> MlpSpec:
        for b in self.blocks:
            if b.name == name and b.spec is not None:
                return b.spec
        raise KeyError(name)

    def view(self, params: np.ndarray, name: str) -> np.ndarray:
        block = next(b for b in self.blocks if b.name == name)
        v = params[self.slices[name]]
        return v if block.spec is not None else v.reshape(block.shape)

    def describe(self) -> list[dict]:
        return [
            {"name": b.name, "shape": list(b.shape), "mlp": b.spec.describe() if b.spec else None}
            for b in self.blocks
        ]

    def checksum(self) -> str:
        blob = json.dumps(self.describe(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class ModelState:
    config: ModelConfig
    input_dim: int
    layout: ParamLayout
    params: np.ndarray
    optimizer: AdamState
    center: np.ndarray | None = None
    extras: dict = field(default_factory=dict)

    @property
    def kind(self) -> ModelKind:
        return self.config.kind

    @property
    def specs(self) -> dict[str, MlpSpec]:
        return {b.name: b.spec for b in self.layout.blocks if b.spec is not None}

    def view(self, name: str) -> np.ndarray:
        return self.layout.view(self.params, name)
