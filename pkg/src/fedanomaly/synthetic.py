"""Synthetic tables that follow a dataset schema, for smoke runs and tests.

Inliers are Gaussian around a random per-feature centre. About half of the
continuous features move anomalies by ``shift`` standard deviations, and
anomalous categorical values come from a reversed level distribution.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pandas as pd

from .data import DatasetSchema

_LEVELS = ("c0", "c1", "c2", "c3")
_P_INLIER = np.array([0.55, 0.3, 0.1, 0.05])


def _free_label(used) -> str:
    for cand in ("0", "attack", "anomaly", "other"):
        if cand not in used:
            return cand
    raise ValueError("no free label value")


def synthesize(schema: DatasetSchema, n_rows: int, anomaly_ratio: float, seed: int = 0, shift: float = 3.0) -> pd.DataFrame:
    rng = np.random.default_rng(seed)
    n_anom = min(n_rows - 1, max(2, int(round(anomaly_ratio * n_rows))))
    is_anom = np.zeros(n_rows, dtype=bool)
    is_anom[rng.choice(n_rows, n_anom, replace=False)] = True
    cols = {}
    for col in schema.features:
        if col.kind == "categorical":
            inl = rng.choice(4, n_rows, p=_P_INLIER)
            out = rng.choice(4, n_rows, p=_P_INLIER[::-1])
            cols[col.name] = np.array(_LEVELS)[np.where(is_anom, out, inl)]
        else:
            x = rng.normal(rng.normal(0, 5), 1.0, n_rows)
            if rng.random() < 0.5:
                x[is_anom] += shift * rng.choice([-1, 1])
            cols[col.name] = x
    df = pd.DataFrame(cols)
    if schema.anomaly_values:
        pos, neg = schema.anomaly_values[0], _free_label(schema.anomaly_values)
    else:
        neg, pos = schema.normal_values[0], _free_label(schema.normal_values)
    df[schema.label_column] = np.where(is_anom, pos, neg)
    return df


def write_synthetic(schema, path, n_rows: int, anomaly_ratio: float | None = None, seed: int = 0, shift: float = 3.0) -> Path:
    schema = schema if isinstance(schema, DatasetSchema) else DatasetSchema.load(schema)
    if anomaly_ratio is None:
        anomaly_ratio = (schema.expected or {}).get("anomaly_ratio", 0.1)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    synthesize(schema, n_rows, anomaly_ratio, seed, shift).to_csv(path, index=False)
    return path
