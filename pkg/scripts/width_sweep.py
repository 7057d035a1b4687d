"""Sweep encoder hidden widths for one (dataset, model) cell, centralized.

Hidden widths are a free choice for every detector, so when a cell
misses its target this sweep shows how sensitive it is to the choice:

    python3 scripts/width_sweep.py data/arrhythmia.csv --schema arrhythmia --model MemAE \
        --widths 137,68 --widths 64 --widths 128,32 --widths none
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from fedanomaly.bench.presets import BATCH_SIZE, DEFAULT_EPOCHS, model_defaults
from fedanomaly.data import DatasetSchema, load_csv, prepare_split
from fedanomaly.federation import train_centralized
from fedanomaly.metrics import evaluate
from fedanomaly.models import ModelConfig, ModelKind


def parse_widths(text: str):
    if text.lower() in ("none", "default"):
        return None
    if text.lower() in ("direct", "empty"):
        return ()
    return tuple(int(w) for w in text.split(","))


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("csv")
    p.add_argument("--schema", required=True)
    p.add_argument("--model", default="MemAE")
    p.add_argument("--widths", action="append", default=[], help="comma list of hidden widths, 'none' for the halving rule, 'direct' for no hidden layer")
    p.add_argument("--epochs", type=int, default=DEFAULT_EPOCHS)
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--out", help="CSV file for the per-seed rows")
    args = p.parse_args(argv)

    schema = DatasetSchema.load(args.schema)
    raw = load_csv(args.csv, schema)
    kind = ModelKind.parse(args.model)
    batch = BATCH_SIZE.get(schema.name, 128)
    rows = []
    for spec in args.widths or ["none"]:
        widths = parse_widths(spec)
        cfg = ModelConfig(kind, **{**model_defaults(schema.name, kind), "encoder_widths": widths})
        aurocs, f1s = [], []
        for seed in args.seeds:
            sp = prepare_split(raw, seed)
            state, _ = train_centralized(cfg, sp.train, args.epochs, batch, seed)
            rep = evaluate(state, sp)
            aurocs.append(rep.auroc)
            f1s.append(rep.f1)
            rows.append({"widths": spec, "seed": seed, "auroc": rep.auroc, "f1": rep.f1, "aupr": rep.aupr})
        print(f"widths {spec:>12}: AUROC {np.mean(aurocs):.4f} +- {np.std(aurocs):.4f}  F1 {np.mean(f1s):.4f}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
