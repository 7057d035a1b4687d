"""Result tables: one row per (dataset, model), metric columns split by a setting.

Printed values are seed means rounded half away from zero to two decimals
(``0.955 -> 0.96``). The machine-readable dump keeps unrounded means and
the per-seed values.
"""

from __future__ import annotations

import json
from collections import defaultdict
from decimal import ROUND_HALF_UP, Decimal

from .presets import DATASET_ORDER, MODEL_ORDER

METRICS = ("precision", "recall", "auroc", "aupr", "f1")
HEADERS = {"precision": "Precision", "recall": "Recall", "auroc": "AUROC", "aupr": "AUPR", "f1": "F1"}
GROUPINGS = ("mode", "n_clients", "mu")


def round2(x: float) -> str:
    return str(Decimal(repr(float(x))).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def _setting(row: dict, group_by: str):
    if group_by == "mode":
        return "Centralized" if row["mode"] == "centralized" else "FL"
    if group_by == "n_clients":
        return row.get("n_clients")
    if group_by == "mu":
        return row.get("mu")
    raise ValueError(f"group_by must be one of {GROUPINGS}")


def _order(values, canonical):
    known = [v for v in canonical if v in values]
    return known + sorted(v for v in values if v not in canonical)


def _setting_order(settings, group_by):
    if group_by == "mode":
        return [s for s in ("Centralized", "FL") if s in settings]
    return sorted(settings, key=lambda s: (s is None, s if s is not None else 0))


def render_report(rows, group_by: str = "mode") -> tuple[str, dict]:
    """Return (fixed-width table text, JSON-serialisable dump)."""
    rows = [r if isinstance(r, dict) else r.to_dict() for r in rows]
    rows = [r for r in rows if r.get("status", "ok") == "ok"]
    if not rows:
        raise ValueError("no completed result rows to report")
    cells = defaultdict(list)
    for r in rows:
        cells[(r["dataset"], r["model"], _setting(r, group_by))].append(r)

    datasets = _order({k[0] for k in cells}, DATASET_ORDER)
    models = _order({k[1] for k in cells}, MODEL_ORDER)
    settings = _setting_order({k[2] for k in cells}, group_by)

    dump = {"group_by": group_by, "settings": [s for s in settings], "cells": []}
    for (ds, model, setting), rs in sorted(cells.items(), key=lambda kv: (datasets.index(kv[0][0]), models.index(kv[0][1]), settings.index(kv[0][2]))):
        rs = sorted(rs, key=lambda r: r["seed"])
        mean = {m: sum(r[m] for r in rs) / len(rs) for m in METRICS}
        dump["cells"].append({
            "dataset": ds, "model": model, "setting": setting, "n_seeds": len(rs),
            "mean": mean,
            "per_seed": [{"seed": r["seed"], **{m: r[m] for m in METRICS}} for r in rs],
        })
    means = {(c["dataset"], c["model"], c["setting"]): c["mean"] for c in dump["cells"]}

    labels = [str(s) for s in settings]
    col_w = max(5, *(len(l) for l in labels))
    group_w = len(labels) * (col_w + 1) - 1
    lead = f"{'Dataset':<12} {'Model':<10}"
    head1 = lead + "".join(f" | {HEADERS[m]:^{group_w}}" for m in METRICS)
    head2 = " " * len(lead) + "".join(" | " + " ".join(f"{l:>{col_w}}" for l in labels) for _ in METRICS)
    lines = [head1, head2, "-" * len(head1)]
    for ds in datasets:
        for model in models:
            if not any((ds, model, s) in means for s in settings):
                continue
            line = f"{ds:<12} {model:<10}"
            for m in METRICS:
                vals = []
                for s in settings:
                    v = means.get((ds, model, s))
                    vals.append(f"{round2(v[m]) if v else '-':>{col_w}}")
                line += " | " + " ".join(vals)
            lines.append(line)
    return "\n".join(lines) + "\n", dump


def dump_json(dump: dict) -> str:
    return json.dumps(dump, indent=2, sort_keys=True, default=str) + "\n"
