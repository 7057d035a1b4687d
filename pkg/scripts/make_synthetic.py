"""Write a synthetic CSV that follows one of the dataset schemas.

Useful for smoke runs when the real files are not available:

    python3 scripts/make_synthetic.py thyroid data/synthetic/thyroid.csv --rows 1000
"""

from __future__ import annotations

import argparse
from pathlib import Path

from fedanomaly.synthetic import write_synthetic


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("schema", help="shipped schema name or JSON path")
    p.add_argument("out", type=Path)
    p.add_argument("--rows", type=int, default=1000)
    p.add_argument("--anomaly-ratio", type=float, default=None, help="defaults to the schema's expected ratio")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shift", type=float, default=3.0, help="anomaly offset in inlier standard deviations")
    args = p.parse_args(argv)
    path = write_synthetic(args.schema, args.out, args.rows, args.anomaly_ratio, args.seed, args.shift)
    print(f"wrote {args.rows} rows to {path}")


if __name__ == "__main__":
    main()
