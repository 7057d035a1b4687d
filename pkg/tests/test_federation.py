from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import blobs
from fedanomaly.data import Dataset, partition, split
from fedanomaly.errors import ConfigError, UsageError
from fedanomaly.federation import (
    FedConfig,
    FederationError,
    fedavg,
    initial_state,
    run_round,
    run_training,
    train_centralized,
)
from fedanomaly.models import ModelConfig, ModelKind, train_step

ALL_KINDS = list(ModelKind)
SMALL = {"latent_dim": 2, "memae_memory_dim": 8, "svdd_output_features": 3, "neutralad_num_transforms": 4}


def toy_split(n=200, d=6, seed=0):
    X, y = blobs(n, d, seed=seed)
    return split(Dataset(X, y, d), seed)


def cfg_for(kind):
    kw = dict(SMALL)
    if kind is ModelKind.DSEBM:
        kw["latent_dim"] = 5
    return ModelConfig(kind, **kw)


def test_fedavg_examples():
    np.testing.assert_array_equal(fedavg([np.array([1.0, 2.0]), np.array([3.0, 4.0])], [5, 5]), [2.0, 3.0])
    np.testing.assert_array_equal(fedavg([np.array([0.0]), np.array([4.0])], [1, 3]), [3.0])
    w = np.array([0.1, -0.7, 1e-17, 3.3])
    np.testing.assert_array_equal(fedavg([w, w.copy(), w.copy()], [3, 1, 7]), w)
    np.testing.assert_array_equal(fedavg([w], [42]), w)


def test_fedavg_errors():
    with pytest.raises(UsageError):
        fedavg([], [])
    with pytest.raises(UsageError):
        fedavg([np.zeros(2), np.zeros(3)], [1, 1])
    with pytest.raises(UsageError):
        fedavg([np.zeros(2)], [0])


@given(st.integers(1, 6), st.integers(1, 20), st.integers(0, 2**31 - 1))
def test_fedavg_convex(k, n, seed):
    rng = np.random.default_rng(seed)
    states = [rng.normal(size=n) * 10.0 ** rng.integers(-3, 3) for _ in range(k)]
    weights = rng.integers(1, 100, size=k)
    out = fedavg(states, weights)
    stack = np.stack(states)
    assert np.all(out >= stack.min(axis=0)) and np.all(out <= stack.max(axis=0))
    ref = (stack * weights[:, None]).sum(axis=0) / weights.sum()
    np.testing.assert_allclose(out, ref, rtol=1e-12, atol=1e-12 * np.abs(stack).max())


def test_client_batch_size_rule():
    cfg = FedConfig(n_clients=3, batch_size=128)
    assert cfg.client_batch_size(1000) == 128
    assert cfg.client_batch_size(200) == 50
    assert cfg.client_batch_size(20) == 8
    assert FedConfig(n_clients=1, batch_size=128).client_batch_size(20) == 128


@pytest.mark.parametrize("bad", [
    {"n_clients": 0}, {"rounds": 0}, {"aggregator": "scaffold"}, {"mu": -1.0}, {"n_clients": 2, "client_seeds": [1]},
])
def test_fed_config_validation(bad):
    with pytest.raises(ConfigError):
        FedConfig(**bad)


def test_two_clients_one_step_is_mean_of_updates():
    sp = toy_split()
    state = initial_state(cfg_for(ModelKind.DAE), sp.train, 0, lr=1e-2, weight_decay=1e-4)
    shards = partition(sp.train, 2, 0)
    cfg = FedConfig(n_clients=2, local_epochs=1, batch_size=256, min_batch=256)
    new, log = run_round(state, shards, cfg, seed=0)
    # replay each client by hand with the same batch order
    manual = []
    for c, shard in enumerate(shards):
        order = np.random.default_rng([0, 3, c, 0]).permutation(shard.n_samples)
        s, _ = train_step(state, shard.X[order])
        manual.append(s.params)
    assert shards.sizes[0] == shards.sizes[1]
    np.testing.assert_allclose(new.params, (manual[0] + manual[1]) / 2, rtol=1e-14, atol=1e-16)
    assert log.client_batch_sizes == [256, 256]


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_single_client_equals_centralized(kind):
    sp = toy_split()
    cfg = FedConfig(n_clients=1, local_epochs=2, rounds=3, batch_size=16)
    fl, _ = run_training(cfg_for(kind), sp, cfg, seed=7, lr=1e-3)
    cen, _ = train_centralized(cfg_for(kind), sp.train, 6, 16, seed=7, lr=1e-3)
    assert np.array_equal(fl.params, cen.params)


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_fedprox_mu_zero_equals_fedavg(kind):
    sp = toy_split()
    base = FedConfig(n_clients=3, local_epochs=2, rounds=2, batch_size=16)
    a, la = run_training(cfg_for(kind), sp, base, seed=1, lr=1e-3)
    b, lb = run_training(cfg_for(kind), sp, replace(base, aggregator="fedprox", mu=0.0), seed=1, lr=1e-3)
    assert np.array_equal(a.params, b.params)
    assert [x.client_losses for x in la] == [x.client_losses for x in lb]


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_fedprox_drift_shrinks_with_mu(kind):
    sp = toy_split()
    drifts = []
    for mu in (0.0, 0.01, 0.1, 1.0):
        cfg = FedConfig(n_clients=3, local_epochs=5, rounds=1, batch_size=16, aggregator="fedprox", mu=mu)
        _, logs = run_training(cfg_for(kind), sp, cfg, seed=2, lr=1e-2)
        drifts.append(logs[0].client_drift)
    drifts = np.array(drifts)  # (mu, client)
    assert np.all(np.diff(drifts, axis=0) <= 0)


def test_training_is_deterministic_and_seeded():
    sp = toy_split()
    cfg = FedConfig(n_clients=3, local_epochs=2, rounds=2, batch_size=16)
    a, la = run_training(cfg_for(ModelKind.MEMAE), sp, cfg, seed=3)
    b, lb = run_training(cfg_for(ModelKind.MEMAE), sp, cfg, seed=3)
    c, _ = run_training(cfg_for(ModelKind.MEMAE), sp, cfg, seed=4)
    assert np.array_equal(a.params, b.params)
    assert [x.client_losses for x in la] == [x.client_losses for x in lb]
    assert not np.array_equal(a.params, c.params)


def test_threads_do_not_change_results():
    sp = toy_split()
    cfg = FedConfig(n_clients=3, local_epochs=2, rounds=2, batch_size=16)
    a, _ = run_training(cfg_for(ModelKind.NEUTRALAD), sp, cfg, seed=5)
    b, _ = run_training(cfg_for(ModelKind.NEUTRALAD), sp, replace(cfg, threads=3), seed=5)
    assert np.array_equal(a.params, b.params)


def test_svdd_center_fixed_from_full_train():
    sp = toy_split()
    cfg = FedConfig(n_clients=3, local_epochs=1, rounds=2, batch_size=16)
    state, _ = run_training(cfg_for(ModelKind.DEEPSVDD), sp, cfg, seed=0)
    start = initial_state(cfg_for(ModelKind.DEEPSVDD), sp.train, 0, 1e-4, 1e-4)
    assert np.array_equal(state.center, start.center)


def test_round_logs():
    sp = toy_split()
    seen = []
    cfg = FedConfig(n_clients=3, local_epochs=1, rounds=3, batch_size=16)
    _, logs = run_training(cfg_for(ModelKind.DAE), sp, cfg, seed=0, total_epochs=3, on_round=seen.append)
    assert [e.round for e in logs] == [0, 1, 2] and seen == logs
    assert sum(logs[0].client_sizes) == sp.train.n_samples
    assert all(len(e.client_drift) == 3 for e in logs)


def test_optimizer_reset_flag_changes_later_rounds():
    sp = toy_split()
    cfg = FedConfig(n_clients=2, local_epochs=1, rounds=2, batch_size=16)
    a, _ = run_training(cfg_for(ModelKind.DAE), sp, cfg, seed=0, lr=1e-2)
    b, _ = run_training(cfg_for(ModelKind.DAE), sp, replace(cfg, reset_optimizer=True), seed=0, lr=1e-2)
    assert not np.array_equal(a.params, b.params)


def test_client_failure_names_client():
    sp = toy_split()
    state = initial_state(cfg_for(ModelKind.DAE), sp.train, 0, 1e-3, 0.0)
    state = replace(state, params=np.full_like(state.params, np.inf))
    with pytest.raises(FederationError, match="client 0"):
        run_round(state, partition(sp.train, 2, 0), FedConfig(n_clients=2, local_epochs=1))


def test_shard_count_must_match():
    sp = toy_split()
    state = initial_state(cfg_for(ModelKind.DAE), sp.train, 0, 1e-3, 0.0)
    with pytest.raises(ConfigError):
        run_round(state, partition(sp.train, 2, 0), FedConfig(n_clients=3))
