"""Simulated federated training: local epochs on client shards, FedAvg / FedProx rounds.

Randomness is keyed, never sequential: the batch order of client ``c`` in its
``e``-th epoch (counted across rounds) comes from
``default_rng([seed, 3, client_seed[c], e])``. Results therefore do not depend
on the order in which clients run, and a one-client federation with ``R``
rounds of ``L`` epochs replays exactly the batches of ``R * L`` centralized
epochs.

Clients keep their own Adam moments across rounds unless
``FedConfig.reset_optimizer`` is set. Only trainable parameters are
aggregated; the DeepSVDD center is fixed before round one and broadcast
unchanged.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .data import ClientShards, DataSplit, Dataset, partition
from .errors import ConfigError, NumericError, UsageError
from .models import ModelConfig, ModelKind, ModelState, build_model, init_svdd_center, train_step
from .nn import AdamState

log = logging.getLogger(__name__)

_STREAM_BATCHES = 3


@dataclass
class FedConfig:
    n_clients: int = 3
    local_epochs: int = 10
    rounds: int = 1
    aggregator: str = "fedavg"
    mu: float = 0.0
    batch_size: int = 128
    client_seeds: list[int] | None = None
    reset_optimizer: bool = False
    min_batch: int = 8
    threads: int = 1

    def __post_init__(self):
        if self.n_clients < 1:
            raise ConfigError("n_clients must be >= 1")
        if self.rounds < 1 or self.local_epochs < 1:
            raise ConfigError("rounds and local_epochs must be >= 1")
        if self.aggregator not in ("fedavg", "fedprox"):
            raise ConfigError(f"unknown aggregator {self.aggregator!r}")
        if self.mu < 0:
            raise ConfigError("mu must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.client_seeds is not None and len(self.client_seeds) != self.n_clients:
            raise ConfigError("client_seeds needs one entry per client")

    def seeds(self) -> list[int]:
        return list(self.client_seeds) if self.client_seeds is not None else list(range(self.n_clients))

    def client_batch_size(self, shard_size: int) -> int:
        # shrink for small shards; a single client keeps the centralized batch size
        if self.n_clients == 1:
            return self.batch_size
        return min(self.batch_size, max(self.min_batch, shard_size // 4))


@dataclass
class RoundLog:
    round: int
    client_losses: list[float]
    client_sizes: list[int]
    client_batch_sizes: list[int]
    client_drift: list[float]  # ||w_local - w_t|| before aggregation
    global_param_norm: float
    wall_time: float

    def to_dict(self) -> dict:
        return asdict(self)


class FederationError(NumericError):
    pass


def fedavg(states, weights) -> np.ndarray:
    """Weighted element-wise mean, weights proportional to client sample counts.

    Summed in client order as ``w_0 + sum_i a_i (w_i - w_0)`` and clipped to
    the per-coordinate client range, which makes identical inputs come back
    exactly and keeps every coordinate inside the clients' convex hull.
    """
    states = [np.asarray(s, dtype=np.float64) for s in states]
    if not states:
        raise UsageError("fedavg needs at least one client state")
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (len(states),):
        raise UsageError("one weight per client state is required")
    if np.any(weights < 0) or weights.sum() <= 0:
        raise UsageError("weights must be non-negative with a positive sum")
    shape = states[0].shape
    if any(s.shape != shape for s in states):
        raise UsageError("client parameter vectors have different layouts")
    coef = weights / weights.sum()
    base = states[0]
    out = base.copy()
    for a, s in zip(coef[1:], states[1:]):
        out += a * (s - base)
    stack = np.stack(states)
    return np.clip(out, stack.min(axis=0), stack.max(axis=0))


def local_train(
    state: ModelState,
    X: np.ndarray,
    epochs: int,
    batch_size: int,
    rng_key: tuple[int, int],
    epoch_offset: int = 0,
    prox: tuple[float, np.ndarray] | None = None,
) -> tuple[ModelState, float, int]:
    """Mini-batch epochs over ``X``; returns (state, mean loss of last epoch, steps)."""
    n = X.shape[0]
    if n == 0:
        raise UsageError("cannot train on an empty shard")
    steps = 0
    last = float("nan")
    for e in range(epochs):
        order = np.random.default_rng([rng_key[0], _STREAM_BATCHES, rng_key[1], epoch_offset + e]).permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            batch = X[order[start : start + batch_size]]
            try:
                state, loss = train_step(state, batch, prox)
            except NumericError as err:
                raise NumericError(f"{err} (epoch {epoch_offset + e}, step {steps})") from err
            total += loss * batch.shape[0]
            steps += 1
        last = total / n
    return state, last, steps


def run_round(
    global_state: ModelState,
    shards: ClientShards,
    cfg: FedConfig,
    *,
    seed: int = 0,
    round_index: int = 0,
    client_optimizers: dict | None = None,
) -> tuple[ModelState, RoundLog]:
    """Broadcast, train every client locally, aggregate.

    ``client_optimizers`` maps client id to its persisted :class:`AdamState`
    and is updated in place; pass the same dict to every round.
    """
    if len(shards) != cfg.n_clients:
        raise ConfigError(f"{len(shards)} shards for {cfg.n_clients} clients")
    t0 = time.perf_counter()
    if client_optimizers is None:
        client_optimizers = {}
    anchor = global_state.params.copy()
    prox = (cfg.mu, anchor) if cfg.aggregator == "fedprox" else None
    client_seeds = cfg.seeds()

    def work(c: int):
        opt = client_optimizers.get(c)
        if opt is None or cfg.reset_optimizer:
            opt = global_state.optimizer.reset()
        local = replace(global_state, params=anchor.copy(), optimizer=opt)
        shard = shards[c]
        bs = cfg.client_batch_size(shard.n_samples)
        try:
            local, loss, _ = local_train(
                local, shard.X, cfg.local_epochs, bs, (seed, client_seeds[c]),
                epoch_offset=round_index * cfg.local_epochs, prox=prox,
            )
        except NumericError as err:
            raise FederationError(f"round {round_index}, client {c}: {err}") from err
        return c, local, loss, bs

    if cfg.threads > 1 and cfg.n_clients > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(work, range(cfg.n_clients)))
    else:
        results = [work(c) for c in range(cfg.n_clients)]
    results.sort(key=lambda r: r[0])

    for c, local, _, _ in results:
        client_optimizers[c] = local.optimizer
    params = fedavg([r[1].params for r in results], shards.sizes)
    new_global = replace(global_state, params=params)
    entry = RoundLog(
        round=round_index,
        client_losses=[float(r[2]) for r in results],
        client_sizes=list(shards.sizes),
        client_batch_sizes=[int(r[3]) for r in results],
        client_drift=[float(np.linalg.norm(r[1].params - anchor)) for r in results],
        global_param_norm=float(np.linalg.norm(params)),
        wall_time=time.perf_counter() - t0,
    )
    return new_global, entry


def initial_state(model_cfg: ModelConfig, train: Dataset, seed: int, lr: float, weight_decay: float) -> ModelState:
    state = build_model(model_cfg, train.n_features_encoded, seed, lr=lr, weight_decay=weight_decay)
    if model_cfg.kind is ModelKind.DEEPSVDD:
        state = init_svdd_center(state, train.X)
    return state


def run_training(
    model_cfg: ModelConfig,
    split: DataSplit,
    cfg: FedConfig,
    seed: int,
    *,
    total_epochs: int | None = None,
    lr: float = 1e-4,
    weight_decay: float = 1e-4,
    on_round=None,
) -> tuple[ModelState, list[RoundLog]]:
    """Full federated run. ``on_round`` receives each :class:`RoundLog` as it completes."""
    if total_epochs is not None and cfg.rounds * cfg.local_epochs != total_epochs:
        log.warning(
            "rounds x local_epochs = %d differs from the epoch budget E = %d",
            cfg.rounds * cfg.local_epochs, total_epochs,
        )
    state = initial_state(model_cfg, split.train, seed, lr, weight_decay)
    shards = partition(split.train, cfg.n_clients, seed)
    optimizers: dict[int, AdamState] = {}
    logs = []
    for r in range(cfg.rounds):
        state, entry = run_round(state, shards, cfg, seed=seed, round_index=r, client_optimizers=optimizers)
        logs.append(entry)
        if on_round is not None:
            on_round(entry)
    return state, logs


def train_centralized(
    model_cfg: ModelConfig,
    train: Dataset,
    epochs: int,
    batch_size: int,
    seed: int,
    *,
    lr: float = 1e-4,
    weight_decay: float = 1e-4,
) -> tuple[ModelState, list[float]]:
    """Plain mini-batch training on the whole train set.

    Uses the same batch schedule as a single client holding the full train
    set (the one-client partition), so it is bit-identical to
    ``run_training`` with ``n_clients=1`` and the same epoch count.
    """
    state = initial_state(model_cfg, train, seed, lr, weight_decay)
    shard = partition(train, 1, seed)[0]
    losses = []
    for e in range(epochs):
        state, loss, _ = local_train(state, shard.X, 1, batch_size, (seed, 0), epoch_offset=e)
        losses.append(loss)
    return state, losses
