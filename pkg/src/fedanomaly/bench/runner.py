"""Run experiment grids and persist results.

Run directory layout::

    <out>/config.yaml         copy of the config file, when one was given
    <out>/specs.json          the expanded grid
    <out>/datasets.json       sha256 of every dataset file used
    <out>/results.jsonl       one record per finished cell (ok or failed)
    <out>/results.csv         flat mirror of results.jsonl
    <out>/rounds/<hash>.jsonl per-round federated logs
    <out>/checkpoints/<hash>.npz

Cells are keyed by :meth:`ExperimentSpec.spec_hash`; rerunning a suite skips
cells that already have an ``ok`` record.
"""

from __future__ import annotations

import csv
import json
import logging
import threading
import time
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .. import __version__
from ..data import DatasetSchema, file_sha256, load_csv, prepare_split, subsample, validate_against_expected
from ..federation import run_training, train_centralized
from ..metrics import MetricsReport, evaluate
from ..models import save_checkpoint
from .config import ExperimentSpec

log = logging.getLogger(__name__)

METRICS = ("precision", "recall", "f1", "auroc", "aupr")
CSV_FIELDS = [
    "spec_hash", "status", "dataset", "model", "mode", "n_clients", "aggregator", "mu", "seed",
    "precision", "recall", "f1", "auroc", "aupr", "threshold", "tp", "fp", "tn", "fn",
    "epochs", "rounds", "local_epochs", "batch_size", "wall_time", "code_version", "error",
]


@dataclass
class ResultRow:
    spec_hash: str
    status: str
    dataset: str
    model: str
    mode: str
    n_clients: int | None
    aggregator: str | None
    mu: float | None
    seed: int
    epochs: int
    rounds: int | None
    local_epochs: int | None
    batch_size: int
    precision: float | None = None
    recall: float | None = None
    f1: float | None = None
    auroc: float | None = None
    aupr: float | None = None
    threshold: float | None = None
    tp: int | None = None
    fp: int | None = None
    tn: int | None = None
    fn: int | None = None
    wall_time: float = 0.0
    code_version: str = __version__
    error: str | None = None
    spec: dict = field(default_factory=dict)

    @classmethod
    def for_spec(cls, spec: ExperimentSpec, status: str = "ok") -> "ResultRow":
        f = spec.fed
        return cls(
            spec_hash=spec.spec_hash(),
            status=status,
            dataset=spec.dataset_id,
            model=spec.model.kind.value,
            mode=spec.mode,
            n_clients=f.n_clients if f else None,
            aggregator=f.aggregator if f else None,
            mu=f.mu if f and f.aggregator == "fedprox" else None,
            seed=spec.seed,
            epochs=spec.epochs,
            rounds=f.rounds if f else None,
            local_epochs=f.local_epochs if f else None,
            batch_size=spec.batch_size,
            spec=spec.to_dict(),
        )

    def fill(self, report: MetricsReport):
        for k in ("precision", "recall", "f1", "auroc", "aupr", "threshold", "tp", "fp", "tn", "fn"):
            setattr(self, k, getattr(report, k))

    def to_dict(self) -> dict:
        return asdict(self)

    def metric_values(self) -> dict:
        return {k: getattr(self, k) for k in METRICS}


class ResultSink:
    """Append-only JSONL + CSV writer shared by all worker threads."""

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.jsonl = self.out_dir / "results.jsonl"
        self.csv = self.out_dir / "results.csv"
        self._lock = threading.Lock()

    def completed(self) -> dict[str, dict]:
        return {r["spec_hash"]: r for r in load_results(self.out_dir) if r.get("status") == "ok"}

    def write(self, row: ResultRow):
        rec = row.to_dict()
        with self._lock:
            with open(self.jsonl, "a") as fh:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
            new = not self.csv.exists()
            with open(self.csv, "a", newline="") as fh:
                w = csv.DictWriter(fh, fieldnames=CSV_FIELDS, extrasaction="ignore")
                if new:
                    w.writeheader()
                w.writerow(rec)


def load_results(out_dir) -> list[dict]:
    p = Path(out_dir) / "results.jsonl"
    if not p.exists():
        return []
    with open(p) as fh:
        return [json.loads(line) for line in fh if line.strip()]


class _DataCache:
    def __init__(self):
        self._lock = threading.Lock()
        self._tables = {}

    def raw(self, spec: ExperimentSpec):
        key = (spec.data_path, spec.schema)
        with self._lock:
            if key not in self._tables:
                schema = DatasetSchema.load(spec.schema)
                table = load_csv(spec.data_path, schema)
                validate_against_expected(table)
                self._tables[key] = table
            return self._tables[key]


def run_spec(spec: ExperimentSpec, out_dir: Path, cache: _DataCache | None = None) -> ResultRow:
    """Split, (partition,) train, evaluate and checkpoint one grid cell."""
    cache = cache or _DataCache()
    t0 = time.perf_counter()
    row = ResultRow.for_spec(spec)
    raw = cache.raw(spec)
    if spec.subsample:
        raw = subsample(raw, float(spec.subsample), spec.seed)
    split = prepare_split(raw, spec.seed, spec.val_fraction)
    h = row.spec_hash
    if spec.mode == "centralized":
        state, _ = train_centralized(
            spec.model, split.train, spec.epochs, spec.batch_size, spec.seed,
            lr=spec.lr, weight_decay=spec.weight_decay,
        )
    else:
        rounds_dir = out_dir / "rounds"
        rounds_dir.mkdir(parents=True, exist_ok=True)
        round_file = rounds_dir / f"{h}.jsonl"
        round_file.unlink(missing_ok=True)

        def on_round(entry):
            with open(round_file, "a") as fh:
                fh.write(json.dumps(entry.to_dict()) + "\n")

        state, _ = run_training(
            spec.model, split, spec.fed, spec.seed, total_epochs=spec.epochs,
            lr=spec.lr, weight_decay=spec.weight_decay, on_round=on_round,
        )
    report = evaluate(state, split, exhaustive=spec.exhaustive_threshold)
    ckpt = out_dir / "checkpoints"
    ckpt.mkdir(parents=True, exist_ok=True)
    save_checkpoint(state, ckpt / f"{h}.npz")
    row.fill(report)
    row.wall_time = time.perf_counter() - t0
    return row


def run_suite(specs: list[ExperimentSpec], out_dir=None, threads: int = 1, resume: bool = True) -> list[ResultRow]:
    """Run every cell; failures become ``status="failed"`` rows instead of aborting."""
    if not specs:
        return []
    out = Path(out_dir or specs[0].output_dir)
    sink = ResultSink(out)
    (out / "specs.json").write_text(json.dumps([s.to_dict() for s in specs], indent=2, sort_keys=True, default=str))
    _write_checksums(specs, out)
    done = sink.completed() if resume else {}
    cache = _DataCache()

    def one(spec: ExperimentSpec) -> ResultRow:
        h = spec.spec_hash()
        if h in done:
            log.info("skip %s (already completed)", spec.label)
            return _row_from_record(done[h])
        log.info("run %s", spec.label)
        try:
            row = run_spec(spec, out, cache)
        except Exception as e:  # noqa: BLE001 - recorded as a failed row
            row = ResultRow.for_spec(spec, status="failed")
            row.error = f"{type(e).__name__}: {e}"
            log.error("%s failed: %s\n%s", spec.label, row.error, traceback.format_exc())
        sink.write(row)
        return row

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, specs))
    return [one(s) for s in specs]


def _row_from_record(rec: dict) -> ResultRow:
    return ResultRow(**{k: v for k, v in rec.items() if k in ResultRow.__dataclass_fields__})


def _write_checksums(specs, out: Path):
    sums = {}
    for s in specs:
        p = Path(s.data_path)
        if p.exists() and s.data_path not in sums:
            sums[s.data_path] = file_sha256(p)
    (out / "datasets.json").write_text(json.dumps(sums, indent=2, sort_keys=True))
