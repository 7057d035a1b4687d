"""Command line entry point: ``fedanomaly run | report | validate-data``.

Exit codes: 0 success, 1 some grid cells failed, 2 configuration or schema error.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import shutil
import sys
from pathlib import Path

from .bench.config import parse_config
from .bench.report import GROUPINGS, dump_json, render_report
from .bench.runner import load_results, run_suite
from .data import DatasetSchema, encode_and_scale, load_csv, subsample, validate_against_expected
from .errors import ConfigError, SchemaError

log = logging.getLogger("fedanomaly")


def _override(specs, args):
    out = []
    for s in specs:
        changes = {}
        if args.seed is not None:
            changes["seed"] = args.seed
        if args.out is not None:
            changes["output_dir"] = str(args.out)
        if args.subsample is not None:
            changes["subsample"] = args.subsample
        if args.exhaustive_threshold:
            changes["exhaustive_threshold"] = True
        out.append(dataclasses.replace(s, **changes) if changes else s)
    seen, unique = set(), []
    for s in out:
        if s.spec_hash() not in seen:
            seen.add(s.spec_hash())
            unique.append(s)
    return unique


def _write_report(out_dir: Path, rows, group_by: str) -> str:
    text, dump = render_report(rows, group_by)
    (out_dir / f"report_{group_by}.txt").write_text(text)
    (out_dir / f"report_{group_by}.json").write_text(dump_json(dump))
    return text


def cmd_run(args) -> int:
    specs = _override(parse_config(args.config), args)
    out = Path(specs[0].output_dir)
    out.mkdir(parents=True, exist_ok=True)
    shutil.copyfile(args.config, out / "config.yaml")
    rows = run_suite(specs, out, threads=args.threads, resume=not args.no_resume)
    failed = [r for r in rows if r.status != "ok"]
    ok = [r for r in rows if r.status == "ok"]
    if ok:
        print(_write_report(out, ok, "mode"), end="")
    print(f"{len(ok)} cells ok, {len(failed)} failed; results in {out}")
    for r in failed:
        print(f"  FAILED {r.dataset}/{r.model}/{r.mode} seed {r.seed}: {r.error}", file=sys.stderr)
    return 1 if failed else 0


def cmd_report(args) -> int:
    rows = [r for r in load_results(args.results_dir) if r.get("status") == "ok"]
    if not rows:
        print(f"no completed results in {args.results_dir}", file=sys.stderr)
        return 1
    # keep the latest record per cell
    latest = {r["spec_hash"]: r for r in rows}
    print(_write_report(Path(args.results_dir), list(latest.values()), args.group_by), end="")
    return 0


def cmd_validate(args) -> int:
    schema = DatasetSchema.load(args.schema)
    raw = load_csv(args.csv, schema)
    if args.subsample:
        raw = subsample(raw, args.subsample, seed=0)
    warnings = validate_against_expected(raw)
    ds, _ = encode_and_scale(raw)
    print(f"schema:            {schema.name}")
    print(f"rows:              {raw.n_rows}")
    print(f"raw features:      {len(schema.features)} ({len(schema.continuous)} continuous, {len(schema.categorical)} categorical)")
    print(f"encoded features:  {ds.n_features_encoded}")
    print(f"anomalies:         {ds.n_anomalies} (ratio {ds.anomaly_ratio:.4f})")
    for w in warnings:
        print(f"warning: {w}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fedanomaly", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment grid")
    r.add_argument("config")
    r.add_argument("--seed", type=int, help="replace the grid's seed list with one seed")
    r.add_argument("--out", type=Path, help="output directory (overrides output_dir)")
    r.add_argument("--subsample", type=float, help="keep this fraction of each class at load time")
    r.add_argument("--threads", type=int, default=1, help="grid cells run in parallel")
    r.add_argument("--exhaustive-threshold", action="store_true", help="search every score midpoint in the threshold window")
    r.add_argument("--no-resume", action="store_true", help="rerun cells that already completed")
    r.set_defaults(func=cmd_run)

    rep = sub.add_parser("report", help="render result tables from a run directory")
    rep.add_argument("results_dir", type=Path)
    rep.add_argument("--group-by", choices=GROUPINGS, default="mode")
    rep.set_defaults(func=cmd_report)

    v = sub.add_parser("validate-data", help="check a CSV against a schema")
    v.add_argument("schema", help="schema JSON path or shipped name (thyroid, arrhythmia, kdd10, nslkdd)")
    v.add_argument("csv")
    v.add_argument("--subsample", type=float)
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ConfigError, SchemaError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
