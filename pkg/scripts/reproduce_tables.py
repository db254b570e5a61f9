"""Run the rejection-rate tables at desk scale.

Usage::

    python3 scripts/reproduce_tables.py [TABLE ...] [--out results] [--workers 4] [--scale 0.25]

Each table file in ``scripts/specs`` lists experiments. Every experiment
writes its own report files under ``<out>/<table>/``; a combined
``<out>/<table>.csv`` holds one row per cell.
"""

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

from metricnoise.harness import ExperimentSpec, run_experiment

SPECS = Path(__file__).resolve().parent / "specs"


def load_table(name: str) -> list[ExperimentSpec]:
    doc = json.loads((SPECS / f"table_{name}.json").read_text())
    return [ExperimentSpec.from_dict(e) for e in doc["experiments"]]


def scaled(spec: ExperimentSpec, scale: float) -> ExperimentSpec:
    return dataclasses.replace(spec, M=max(1, round(spec.M * scale)))


def main(argv=None) -> int:
    tables = sorted(p.stem.removeprefix("table_") for p in SPECS.glob("table_*.json"))
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("tables", nargs="*", help=f"subset of {tables}")
    parser.add_argument("--out", default="results")
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("--scale", type=float, default=1.0, help="multiply every M by this factor")
    args = parser.parse_args(argv)

    unknown = set(args.tables) - set(tables)
    if unknown:
        parser.error(f"unknown tables {sorted(unknown)}; choose from {tables}")
    for table in args.tables or tables:
        folder = Path(args.out) / table
        rows = []
        for spec in load_table(table):
            spec = scaled(spec, args.scale)
            report = run_experiment(
                spec, workers=args.workers,
                progress=lambda d, m, name=spec.name: (d == m or d % 20 == 0)
                and print(f"[{table}/{name}] {d}/{m}", file=sys.stderr),
            )
            report.write(str(folder / spec.name))
            rows.extend(report.rows())
            for cell in report.cells:
                print(f"{table:14s} {spec.name:18s} {cell.metric.value:14s} {cell.statistic.value:4s} "
                      f"{cell.method.value:12s} {cell.rate:.3f} (se {cell.mc_se:.3f})")
        with open(Path(args.out) / f"{table}.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
