"""Dense float64 multilayer perceptrons with hand-written backprop and Adam.

Parameters of a network live in one flat ``float64`` vector. The layout is
fixed by the :class:`MlpSpec`: layers in order, each layer's weight matrix
(``fan_in x fan_out``, row-major) followed by its bias when the layer has one.
Two networks with equal specs therefore have interchangeable vectors, which is
what federated averaging and the proximal term operate on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericError, UsageError

ACTIVATIONS = ("relu", "tanh", "sigmoid", "linear")


def as_matrix(x, name: str = "batch") -> np.ndarray:
    """Coerce to a finite 2-D float64 array or raise."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ConfigError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} contains NaN or Inf")
    return arr


@dataclass(frozen=True)
class MlpSpec:
    widths: tuple[int, ...]
    activations: tuple[str, ...]
    use_bias: tuple[bool, ...]

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        object.__setattr__(self, "activations", tuple(self.activations))
        object.__setattr__(self, "use_bias", tuple(bool(b) for b in self.use_bias))
        if len(self.widths) < 2:
            raise ConfigError("an MLP needs at least an input and an output width")
        if any(w < 1 for w in self.widths):
            raise ConfigError(f"all widths must be >= 1, got {self.widths}")
        n = len(self.widths) - 1
        if len(self.activations) != n or len(self.use_bias) != n:
            raise ConfigError(
                f"{n} layers need {n} activations and bias flags, got "
                f"{len(self.activations)} and {len(self.use_bias)}"
            )
        bad = [a for a in self.activations if a not in ACTIVATIONS]
        if bad:
            raise ConfigError(f"unknown activation(s) {bad}; expected one of {ACTIVATIONS}")

    @classmethod
    def build(cls, widths, hidden: str = "relu", output: str = "linear", bias: bool = True):
        n = len(widths) - 1
        acts = tuple([hidden] * (n - 1) + [output]) if n >= 1 else ()
        return cls(tuple(widths), acts, tuple([bias] * max(n, 0)))

    @property
    def n_layers(self) -> int:
        return len(self.widths) - 1

    @property
    def input_dim(self) -> int:
        return self.widths[0]

    @property
    def output_dim(self) -> int:
        return self.widths[-1]

    def segments(self) -> list[tuple[int, tuple[int, ...]]]:
        """(layer index, shape) for every weight and bias block, in vector order."""
        segs = []
        for i in range(self.n_layers):
            segs.append((i, (self.widths[i], self.widths[i + 1])))
            if self.use_bias[i]:
                segs.append((i, (self.widths[i + 1],)))
        return segs

    @property
    def n_params(self) -> int:
        return sum(int(np.prod(shape)) for _, shape in self.segments())

    def describe(self) -> dict:
        return {
            "widths": list(self.widths),
            "activations": list(self.activations),
            "use_bias": list(self.use_bias),
        }


def unflatten(spec: MlpSpec, params: np.ndarray) -> list[tuple[np.ndarray, np.ndarray | None]]:
    """Split a flat vector into per-layer ``(W, b)`` views (no copies)."""
    params = np.asarray(params)
    if params.ndim != 1 or params.size != spec.n_params:
        raise ConfigError(
            f"parameter vector has {params.size} entries, spec expects {spec.n_params}"
        )
    layers = []
    off = 0
    for i in range(spec.n_layers):
        fi, fo = spec.widths[i], spec.widths[i + 1]
        w = params[off : off + fi * fo].reshape(fi, fo)
        off += fi * fo
        b = None
        if spec.use_bias[i]:
            b = params[off : off + fo]
            off += fo
        layers.append((w, b))
    return layers


def flatten(layers) -> np.ndarray:
    parts = []
    for w, b in layers:
        parts.append(np.asarray(w, dtype=np.float64).ravel())
        if b is not None:
            parts.append(np.asarray(b, dtype=np.float64).ravel())
    if not parts:
        return np.zeros(0)
    return np.concatenate(parts)


def init_params(spec: MlpSpec, rng: np.random.Generator) -> np.ndarray:
    """Glorot-uniform weights, zero biases."""
    layers = []
    for i in range(spec.n_layers):
        fi, fo = spec.widths[i], spec.widths[i + 1]
        limit = np.sqrt(6.0 / (fi + fo))
        w = rng.uniform(-limit, limit, size=(fi, fo))
        b = np.zeros(fo) if spec.use_bias[i] else None
        layers.append((w, b))
    return flatten(layers)


def _activate(kind: str, a: np.ndarray) -> np.ndarray:
    if kind == "relu":
        return np.maximum(a, 0.0)
    if kind == "tanh":
        return np.tanh(a)
    if kind == "sigmoid":
        return sigmoid(a)
    return a


def _activation_grad(kind: str, a: np.ndarray, h: np.ndarray, g: np.ndarray) -> np.ndarray:
    if kind == "relu":
        return g * (a > 0)
    if kind == "tanh":
        return g * (1.0 - h * h)
    if kind == "sigmoid":
        return g * h * (1.0 - h)
    return g


def sigmoid(a: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    out = np.empty_like(a, dtype=np.float64)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    e = np.exp(a[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def softplus(a: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, a)


@dataclass
class ForwardCache:
    spec: MlpSpec
    params: np.ndarray
    inputs: list = field(default_factory=list)  # input to each layer
    pre: list = field(default_factory=list)  # pre-activations
    post: list = field(default_factory=list)  # post-activations


def forward(spec: MlpSpec, params: np.ndarray, batch: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != spec.input_dim:
        raise ConfigError(
            f"batch shape {batch.shape} does not match MLP input width {spec.input_dim}"
        )
    layers = unflatten(spec, params)
    cache = ForwardCache(spec=spec, params=params)
    h = batch
    for i, (w, b) in enumerate(layers):
        cache.inputs.append(h)
        a = h @ w
        if b is not None:
            a = a + b
        h = _activate(spec.activations[i], a)
        if not np.all(np.isfinite(h)):
            raise NumericError(f"non-finite activation in layer {i} of MLP {spec.widths}")
        cache.pre.append(a)
        cache.post.append(h)
    return h, cache


def backward(spec: MlpSpec, cache: ForwardCache, grad_output: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (gradient w.r.t. the flat parameters, gradient w.r.t. the input batch)."""
    if cache.spec != spec or len(cache.pre) != spec.n_layers:
        raise UsageError("forward cache was produced by a different MLP spec")
    g = np.asarray(grad_output, dtype=np.float64)
    if g.shape != cache.post[-1].shape:
        raise UsageError(
            f"grad_output shape {g.shape} does not match forward output {cache.post[-1].shape}"
        )
    layers = unflatten(spec, cache.params)
    grads: list[tuple[np.ndarray, np.ndarray | None]] = [None] * spec.n_layers  # type: ignore[list-item]
    for i in reversed(range(spec.n_layers)):
        w, b = layers[i]
        g = _activation_grad(spec.activations[i], cache.pre[i], cache.post[i], g)
        gw = cache.inputs[i].T @ g
        gb = g.sum(axis=0) if b is not None else None
        grads[i] = (gw, gb)
        g = g @ w.T
    return flatten(grads), g


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 1e-4
    weight_decay: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.m.shape != self.v.shape:
            raise UsageError("Adam moment vectors must have the same shape")
        if self.step < 0:
            raise UsageError("Adam step count must be >= 0")
        if self.lr < 0:
            raise ConfigError("learning rate must be >= 0")

    @classmethod
    def zeros(cls, n: int, lr: float = 1e-4, weight_decay: float = 1e-4, **kw) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0, lr, weight_decay, **kw)

    def reset(self) -> "AdamState":
        return AdamState.zeros(
            self.m.size, self.lr, self.weight_decay,
            beta1=self.beta1, beta2=self.beta2, eps=self.eps,
        )


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState) -> tuple[np.ndarray, AdamState]:
    """One Adam update with decoupled weight decay; inputs are not modified."""
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise UsageError(
            f"length mismatch: params {params.shape}, grads {grads.shape}, state {state.m.shape}"
        )
    t = state.step + 1
    p = params - state.lr * state.weight_decay * params
    m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    p = p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    new_state = AdamState(m, v, t, state.lr, state.weight_decay, state.beta1, state.beta2, state.eps)
    return p, new_state


def l2_distance_sq(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise UsageError(f"length mismatch: {a.shape} vs {b.shape}")
    d = a - b
    return float(np.dot(d, d))
