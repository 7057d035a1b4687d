"""Tabular ingestion, encoding, the inlier-only train split and client partitioning.

Labels are binary everywhere: 1 = anomaly, 0 = inlier. Each dataset's native
labels are mapped through its schema file.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from importlib import resources
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import ConfigError, SchemaError

log = logging.getLogger(__name__)

SCHEMA_NAMES = ("arrhythmia", "thyroid", "kdd10", "nslkdd")

# independent RNG streams per seed
_STREAM_SPLIT = 0
_STREAM_PARTITION = 1
_STREAM_SUBSAMPLE = 2


def round_half_up(x: float) -> int:
    return int(Decimal(repr(float(x))).quantize(Decimal(1), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class Column:
    name: str
    kind: str  # "continuous" | "categorical"


@dataclass(frozen=True)
class DatasetSchema:
    name: str
    features: tuple[Column, ...]
    label_column: str
    anomaly_values: tuple[str, ...] = ()
    normal_values: tuple[str, ...] = ()
    expected: dict | None = None

    def __post_init__(self):
        if not self.features:
            raise SchemaError(f"schema {self.name!r} has no feature columns")
        names = [c.name for c in self.features]
        if len(set(names)) != len(names):
            raise SchemaError(f"schema {self.name!r} has duplicate feature names")
        if self.label_column in names:
            raise SchemaError("the label column cannot also be a feature")
        for c in self.features:
            if c.kind not in ("continuous", "categorical"):
                raise SchemaError(f"column {c.name!r}: unknown kind {c.kind!r}")
        if bool(self.anomaly_values) == bool(self.normal_values):
            raise SchemaError("give exactly one of anomaly_values / normal_values")

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetSchema":
        try:
            feats = tuple(Column(f["name"], f["kind"]) for f in d["features"])
            return cls(
                name=d.get("name", "dataset"),
                features=feats,
                label_column=d["label_column"],
                anomaly_values=tuple(str(v) for v in d.get("anomaly_values", ())),
                normal_values=tuple(str(v) for v in d.get("normal_values", ())),
                expected=d.get("expected"),
            )
        except KeyError as e:
            raise SchemaError(f"schema is missing key {e}") from None

    @classmethod
    def load(cls, path_or_name) -> "DatasetSchema":
        """Load a schema JSON file, or one of the shipped schemas by name."""
        p = Path(str(path_or_name))
        if p.suffix != ".json" and str(path_or_name) in SCHEMA_NAMES:
            text = resources.files("fedanomaly.schemas").joinpath(f"{path_or_name}.json").read_text()
        else:
            if not p.exists():
                raise SchemaError(f"schema file {p} not found")
            text = p.read_text()
        return cls.from_dict(json.loads(text))

    @property
    def continuous(self) -> list[str]:
        return [c.name for c in self.features if c.kind == "continuous"]

    @property
    def categorical(self) -> list[str]:
        return [c.name for c in self.features if c.kind == "categorical"]

    def label_to_binary(self, values) -> np.ndarray:
        vals = [_canon(v) for v in values]
        if self.anomaly_values:
            hit = {_canon(v) for v in self.anomaly_values}
            return np.array([v in hit for v in vals], dtype=np.int8)
        hit = {_canon(v) for v in self.normal_values}
        return np.array([v not in hit for v in vals], dtype=np.int8)


def _canon(v) -> str:
    s = str(v).strip()
    try:
        f = float(s)
        return repr(f)
    except ValueError:
        return s


@dataclass
class RawTable:
    schema: DatasetSchema
    features: pd.DataFrame  # continuous as float64, categorical as str
    labels: np.ndarray
    source: str = ""

    @property
    def n_rows(self) -> int:
        return len(self.labels)

    def take(self, idx) -> "RawTable":
        idx = np.asarray(idx)
        return RawTable(self.schema, self.features.iloc[idx].reset_index(drop=True), self.labels[idx], self.source)


def load_csv(path, schema: DatasetSchema) -> RawTable:
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"{path} does not exist")
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise SchemaError(f"{path} is empty") from None
    df.columns = [c.strip() for c in df.columns]
    needed = [c.name for c in schema.features] + [schema.label_column]
    for name in needed:
        if name not in df.columns:
            raise SchemaError(f"{path}: column {name!r} required by schema {schema.name!r} is missing")
    if len(df) == 0:
        raise SchemaError(f"{path} has a header but no data rows")
    col_index = {c: i for i, c in enumerate(df.columns)}

    out = {}
    for col in schema.features:
        s = df[col.name].str.strip()
        empty = np.flatnonzero((s == "").to_numpy())
        if empty.size:
            r = int(empty[0])
            raise SchemaError(f"{path}: empty cell at row {r + 1}, column {col_index[col.name]} ({col.name})")
        if col.kind == "continuous":
            num = pd.to_numeric(s, errors="coerce").to_numpy(dtype=np.float64)
            bad = np.flatnonzero(~np.isfinite(num))
            if bad.size:
                r = int(bad[0])
                raise SchemaError(
                    f"{path}: cannot parse {s.iloc[r]!r} as a number at row {r + 1}, "
                    f"column {col_index[col.name]} ({col.name})"
                )
            out[col.name] = num
        else:
            out[col.name] = s.to_numpy(dtype=object)
    labels = df[schema.label_column].str.strip()
    empty = np.flatnonzero((labels == "").to_numpy())
    if empty.size:
        raise SchemaError(f"{path}: empty label at row {int(empty[0]) + 1}")
    log.info("loaded %s: %d rows", path, len(df))
    return RawTable(schema, pd.DataFrame(out), schema.label_to_binary(labels), str(path))


@dataclass
class FitStats:
    mins: dict[str, float]
    maxs: dict[str, float]
    vocab: dict[str, list[str]]

    def feature_names(self, schema: DatasetSchema) -> list[str]:
        names = []
        for c in schema.features:
            if c.kind == "continuous":
                names.append(c.name)
            else:
                names.extend(f"{c.name}={v}" for v in self.vocab[c.name])
        return names


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    n_features_raw: int
    feature_names: list[str] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int8)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise ConfigError(f"X shape {self.X.shape} does not match {self.y.shape[0]} labels")

    @property
    def n_samples(self) -> int:
        return int(self.X.shape[0])

    @property
    def n_features_encoded(self) -> int:
        return int(self.X.shape[1])

    @property
    def n_anomalies(self) -> int:
        return int(self.y.sum())

    @property
    def anomaly_ratio(self) -> float:
        return self.n_anomalies / self.n_samples if self.n_samples else 0.0

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        meta = dict(self.meta)
        parent = self.meta.get("indices")
        meta["indices"] = np.asarray(parent)[idx] if parent is not None else idx
        return Dataset(self.X[idx], self.y[idx], self.n_features_raw, list(self.feature_names), meta)


def fit_stats(raw: RawTable) -> FitStats:
    mins, maxs, vocab = {}, {}, {}
    for name in raw.schema.continuous:
        col = raw.features[name].to_numpy(dtype=np.float64)
        mins[name] = float(col.min())
        maxs[name] = float(col.max())
    for name in raw.schema.categorical:
        vocab[name] = sorted(set(raw.features[name]))
    return FitStats(mins, maxs, vocab)


def encode_and_scale(raw: RawTable, schema: DatasetSchema | None = None, stats: FitStats | None = None):
    """One-hot categoricals and min-max scale continuous columns.

    Fits the statistics when ``stats`` is None. Returns ``(Dataset, FitStats)``;
    unseen categories (encoded as all zeros) and values outside the fitted range
    are counted in ``dataset.meta["unseen_categories"]`` / ``["out_of_range"]``.
    """
    schema = schema or raw.schema
    if stats is None:
        stats = fit_stats(raw)
    blocks = []
    unseen, out_of_range = {}, {}
    for c in schema.features:
        col = raw.features[c.name].to_numpy()
        if c.kind == "continuous":
            col = col.astype(np.float64)
            lo, hi = stats.mins[c.name], stats.maxs[c.name]
            span = hi - lo
            scaled = (col - lo) / span if span > 0 else np.zeros_like(col)
            n_out = int(np.sum((col < lo) | (col > hi)))
            if n_out:
                out_of_range[c.name] = n_out
            blocks.append(scaled[:, None])
        else:
            cats = stats.vocab[c.name]
            pos = {v: i for i, v in enumerate(cats)}
            onehot = np.zeros((len(col), len(cats)))
            idx = np.array([pos.get(v, -1) for v in col], dtype=np.int64)
            known = idx >= 0
            onehot[np.flatnonzero(known), idx[known]] = 1.0
            if (~known).any():
                unseen[c.name] = int((~known).sum())
            blocks.append(onehot)
    X = np.hstack(blocks) if blocks else np.zeros((raw.n_rows, 0))
    if unseen or out_of_range:
        log.info("encoding: unseen categories %s, out-of-range values %s", unseen, out_of_range)
    ds = Dataset(
        X, raw.labels.copy(), len(schema.features), stats.feature_names(schema),
        {"unseen_categories": unseen, "out_of_range": out_of_range},
    )
    return ds, stats


@dataclass
class DataSplit:
    train: Dataset
    val: Dataset
    test: Dataset
    seed: int
    indices: dict = field(default_factory=dict)  # part -> source row indices
    stats: FitStats | None = None


def split_indices(y, seed: int, val_fraction: float = 0.5) -> dict[str, np.ndarray]:
    """Row indices of the train / val / test parts.

    Half of the shuffled inliers (rounded down) train the model; the other half
    plus every anomaly form the evaluation pool, which is split per class into
    validation and test with ``round_half_up(val_fraction * class_count)``
    rows of each class going to validation.
    """
    y = np.asarray(y)
    if not 0 < val_fraction < 1:
        raise ConfigError(f"val_fraction must be in (0, 1), got {val_fraction}")
    inliers = np.flatnonzero(y == 0)
    anomalies = np.flatnonzero(y == 1)
    if anomalies.size < 1 or inliers.size < 4:
        raise ConfigError(
            f"need >= 1 anomaly and >= 4 inliers, got {anomalies.size} and {inliers.size}"
        )
    rng = np.random.default_rng([seed, _STREAM_SPLIT])
    inl = rng.permutation(inliers)
    ano = rng.permutation(anomalies)
    n_train = inl.size // 2
    train, pool_in = inl[:n_train], inl[n_train:]
    n_val_an = round_half_up(val_fraction * ano.size)
    n_val_in = round_half_up(val_fraction * pool_in.size)
    if n_val_an == 0 or n_val_an == ano.size:
        raise ConfigError(
            f"val_fraction {val_fraction} puts {n_val_an} of {ano.size} anomalies in validation; "
            "both validation and test need at least one anomaly - choose a larger val_fraction"
            if n_val_an == 0 else
            f"val_fraction {val_fraction} leaves no anomaly for the test set; choose a smaller value"
        )
    if n_val_in == 0 or n_val_in == pool_in.size:
        raise ConfigError(f"val_fraction {val_fraction} leaves validation or test without inliers")
    val = np.concatenate([pool_in[:n_val_in], ano[:n_val_an]])
    test = np.concatenate([pool_in[n_val_in:], ano[n_val_an:]])
    return {"train": np.sort(train), "val": np.sort(val), "test": np.sort(test)}


def split(dataset: Dataset, seed: int, val_fraction: float = 0.5) -> DataSplit:
    idx = split_indices(dataset.y, seed, val_fraction)
    return DataSplit(
        dataset.subset(idx["train"]), dataset.subset(idx["val"]), dataset.subset(idx["test"]),
        seed, idx,
    )


def prepare_split(raw: RawTable, seed: int, val_fraction: float = 0.5) -> DataSplit:
    """Split raw rows, fit scaling on the train inliers only, encode every part."""
    idx = split_indices(raw.labels, seed, val_fraction)
    train, stats = encode_and_scale(raw.take(idx["train"]))
    val, _ = encode_and_scale(raw.take(idx["val"]), stats=stats)
    test, _ = encode_and_scale(raw.take(idx["test"]), stats=stats)
    for part, ds in (("train", train), ("val", val), ("test", test)):
        ds.meta["indices"] = idx[part]
    return DataSplit(train, val, test, seed, idx, stats)


@dataclass
class ClientShards:
    shards: list[Dataset]
    indices: list[np.ndarray]

    def __len__(self) -> int:
        return len(self.shards)

    def __iter__(self):
        return iter(self.shards)

    def __getitem__(self, i) -> Dataset:
        return self.shards[i]

    @property
    def sizes(self) -> list[int]:
        return [s.n_samples for s in self.shards]


def partition(train: Dataset, n_clients: int, seed: int) -> ClientShards:
    """Seeded shuffle, then deal rows round-robin to the clients."""
    if n_clients < 1:
        raise ConfigError("n_clients must be >= 1")
    if n_clients > train.n_samples:
        raise ConfigError(f"{n_clients} clients but only {train.n_samples} training rows")
    perm = np.random.default_rng([seed, _STREAM_PARTITION]).permutation(train.n_samples)
    idx = [perm[c::n_clients] for c in range(n_clients)]
    return ClientShards([train.subset(i) for i in idx], idx)


def subsample(raw: RawTable, fraction: float, seed: int) -> RawTable:
    """Keep ``fraction`` of each class, chosen at random; row order preserved."""
    if not 0 < fraction <= 1:
        raise ConfigError(f"subsample fraction must be in (0, 1], got {fraction}")
    if fraction == 1:
        return raw
    rng = np.random.default_rng([seed, _STREAM_SUBSAMPLE])
    keep = []
    for cls in (0, 1):
        rows = np.flatnonzero(raw.labels == cls)
        k = max(1, round_half_up(fraction * rows.size)) if rows.size else 0
        keep.append(rng.choice(rows, size=k, replace=False))
    return raw.take(np.sort(np.concatenate(keep)))


def validate_against_expected(raw: RawTable, n_features_encoded: int | None = None) -> list[str]:
    """Compare sample count, raw feature count and anomaly ratio with the schema."""
    exp = raw.schema.expected or {}
    warnings = []
    n = raw.n_rows
    ratio = float(raw.labels.mean()) if n else 0.0
    if "n_samples" in exp and exp["n_samples"] != n:
        warnings.append(f"expected {exp['n_samples']} samples, found {n}")
    if "n_features" in exp and exp["n_features"] != len(raw.schema.features):
        warnings.append(f"expected {exp['n_features']} features, schema has {len(raw.schema.features)}")
    if "anomaly_ratio" in exp and abs(exp["anomaly_ratio"] - ratio) > 5e-4:
        warnings.append(f"expected anomaly ratio {exp['anomaly_ratio']:.4f}, found {ratio:.4f}")
    for w in warnings:
        log.warning("%s: %s", raw.schema.name, w)
    return warnings


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
