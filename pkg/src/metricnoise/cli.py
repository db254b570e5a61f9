"""Command-line front end.

Subcommands::

    metricnoise test       --input data.csv --config run.json [--out result.json] [--dump-process s.csv]
    metricnoise adcv       --input data.csv --config run.json [--out adcv.json]
    metricnoise simulate   --config dgp.json --seed 7 --out data.csv
    metricnoise experiment --config experiment.json --out results/table

Exit status is 0 on success, 2 when a test ran on a degenerate sample and 1
on any error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, fields
from enum import Enum

import numpy as np

from .adcv import MIN_SERIES_LENGTH, adcv_all, pairwise_distances
from .dgp import DgpSpec, Family, generate
from .harness import ExperimentSpec, SpecError, run_experiment, worker_count
from .objects import MetricKind, ObjectKind, ObjectSeries, _derive_density_array, check_metric
from .resampling import FLAG_DEGENERATE, Method, ResamplingConfig, WeightLaw, run_test
from .spectral import SpectralConfig, StatisticKind, ks_grid, sn_process

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_DEGENERATE = 2

REPRESENTATIONS = ("quantile", "cdf", "density")


class CliError(Exception):
    pass


def fmt(x: float) -> str:
    """Shortest decimal that round-trips through ``float``."""
    return "%.17g" % x


# ---------------------------------------------------------------------------
# run configuration


@dataclass(frozen=True)
class RunConfig:
    object_kind: ObjectKind
    metric: MetricKind
    statistic: StatisticKind = StatisticKind.CVM
    method: Method = Method.BOOTSTRAP
    B: int = 300
    alpha: float = 0.05
    seed: int = 0
    max_lag: int | None = None
    ks_grid_size: int = 512
    output_path: str | None = None
    spd_dim: int | None = None
    representation: str | None = None
    weight_law: WeightLaw = WeightLaw.RADEMACHER

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        if not isinstance(doc, dict):
            raise CliError("config: must be a JSON object")
        names = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - names)
        if unknown:
            raise CliError(f"config.{unknown[0]}: unknown field")
        for required in ("object_kind", "metric"):
            if required not in doc:
                raise CliError(f"config.{required}: required")
        kw = dict(doc)
        for name, enum in (("object_kind", ObjectKind), ("metric", MetricKind),
                           ("statistic", StatisticKind), ("method", Method),
                           ("weight_law", WeightLaw)):
            if name in kw:
                try:
                    kw[name] = enum(kw[name])
                except ValueError:
                    choices = ", ".join(e.value for e in enum)
                    raise CliError(f"config.{name}: {kw[name]!r} is not one of {choices}") from None
        for name in ("B", "seed", "max_lag", "ks_grid_size", "spd_dim"):
            value = kw.get(name)
            if value is not None and (isinstance(value, bool) or not isinstance(value, int)):
                raise CliError(f"config.{name}: expected an integer, got {value!r}")
        alpha = kw.get("alpha", 0.05)
        if isinstance(alpha, bool) or not isinstance(alpha, (int, float)) or not 0 < alpha < 1:
            raise CliError(f"config.alpha: must be a number in (0, 1), got {alpha!r}")
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        try:
            check_metric(self.object_kind, self.metric)
        except ValueError as exc:
            raise CliError(f"config.metric: {exc}") from None
        if self.B < 1:
            raise CliError("config.B: must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise CliError("config.seed: must be a 64-bit unsigned integer")
        if self.ks_grid_size < 2:
            raise CliError("config.ks_grid_size: must be at least 2")
        if self.max_lag is not None and self.max_lag < 1:
            raise CliError("config.max_lag: must be positive")
        if self.object_kind is ObjectKind.SPD and (self.spd_dim is None or self.spd_dim < 1):
            raise CliError("config.spd_dim: required positive integer for spd input")
        if self.object_kind is ObjectKind.DISTRIBUTION:
            if self.representation not in REPRESENTATIONS:
                raise CliError(f"config.representation: must be one of {', '.join(REPRESENTATIONS)}")
            need = {MetricKind.DIST_W1: "quantile", MetricKind.DIST_W2: "quantile",
                    MetricKind.DIST_KS: "cdf"}
            rep = need.get(self.metric)
            if rep is not None and self.representation != rep:
                raise CliError(f"config.representation: metric {self.metric.value} needs {rep} input")
            if rep is None and self.representation == "quantile":
                raise CliError(
                    f"config.representation: metric {self.metric.value} needs cdf or density input")

    def resampling(self) -> ResamplingConfig:
        return ResamplingConfig(self.method, self.B, self.weight_law, self.alpha, self.seed)

    def spectral(self) -> SpectralConfig:
        return SpectralConfig(self.ks_grid_size, self.max_lag)

    def echo(self) -> dict:
        return {f.name: (getattr(self, f.name).value if isinstance(getattr(self, f.name), Enum)
                         else getattr(self, f.name)) for f in fields(self)}


def load_json(path: str, what: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read {what} {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise CliError(f"{what} {path} is not valid JSON: {exc}") from None


# ---------------------------------------------------------------------------
# CSV input/output


def read_table(path: str) -> np.ndarray:
    """Rectangular table of finite reals; errors name the 1-based row and column."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise CliError(f"cannot read input {path}: {exc.strerror}") from None
    if not rows:
        raise CliError(f"input {path} is empty")
    width = len(rows[0])
    out = np.empty((len(rows), width))
    for i, row in enumerate(rows, start=1):
        if len(row) != width:
            raise CliError(f"input row {i}: expected {width} columns, got {len(row)}")
        for j, cell in enumerate(row, start=1):
            try:
                value = float(cell)
            except ValueError:
                raise CliError(f"input row {i}, column {j}: cannot parse {cell.strip()!r} as a number") from None
            if not math.isfinite(value):
                raise CliError(f"input row {i}, column {j}: value {cell.strip()!r} is not finite")
            out[i - 1, j - 1] = value
    return out


def write_table(path: str, rows, header=None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if header is not None:
            writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(x) for x in np.atleast_1d(row)])


def series_from_table(table: np.ndarray, cfg: RunConfig) -> ObjectSeries:
    kind = cfg.object_kind
    if kind in (ObjectKind.CURVE, ObjectKind.DISTRIBUTION):
        grid, data = table[0], table[1:]
    else:
        grid, data = None, table
    if data.shape[0] < MIN_SERIES_LENGTH:
        raise CliError(f"input has {data.shape[0]} observations, need at least {MIN_SERIES_LENGTH}")
    try:
        if kind is ObjectKind.VECTOR:
            return ObjectSeries.vectors(data)
        if kind is ObjectKind.CURVE:
            return ObjectSeries.curves(grid, data)
        if kind is ObjectKind.SPD:
            p = cfg.spd_dim
            if data.shape[1] != p * p:
                raise CliError(f"input has {data.shape[1]} columns but spd_dim={p} needs {p * p}")
            return ObjectSeries.spd(data.reshape(-1, p, p))
        return ObjectSeries.distributions(grid, **{cfg.representation: data})
    except CliError:
        raise
    except ValueError as exc:
        raise CliError(f"input does not match config.object_kind={kind.value}: {exc}") from None


def series_to_table(series: ObjectSeries, representation: str | None = None) -> np.ndarray:
    kind = series.kind
    if kind is ObjectKind.VECTOR:
        return series.values
    if kind is ObjectKind.CURVE:
        return np.vstack([series.grid, series.values])
    if kind is ObjectKind.SPD:
        return series.values.reshape(len(series), -1)
    data = getattr(series, representation or "quantile")
    if data is None:
        raise CliError(f"series has no {representation} representation")
    return np.vstack([series.grid, data])


# ---------------------------------------------------------------------------
# subcommands


def _emit(doc: dict, path: str | None) -> None:
    text = json.dumps(doc, indent=2) + "\n"
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_run(args) -> tuple[RunConfig, ObjectSeries]:
    if not args.input or not args.config:
        raise CliError("--input and --config are required")
    doc = load_json(args.config, "config")
    if args.seed is not None and isinstance(doc, dict):
        doc = {**doc, "seed": args.seed}
    cfg = RunConfig.from_dict(doc)
    return cfg, series_from_table(read_table(args.input), cfg)


def result_document(result, cfg: RunConfig) -> dict:
    crit = result.critical_value
    return {
        "statistic_kind": result.statistic.kind.value,
        "statistic_value": result.statistic.value,
        "p_value": result.p_value,
        "reject": result.reject,
        "critical_value": None if math.isinf(crit) else crit,
        "adcv": [float(x) for x in result.adcv.v],
        "flags": list(result.flags),
        "config_echo": cfg.echo(),
    }


def cmd_test(args) -> int:
    cfg, series = _load_run(args)
    if cfg.max_lag is not None and cfg.max_lag > len(series) - 4:
        raise CliError(f"config.max_lag: {cfg.max_lag} exceeds n - 4 = {len(series) - 4}")
    result = run_test(series, cfg.metric, cfg.statistic, cfg.resampling(), cfg.spectral())
    _emit(result_document(result, cfg), args.out or cfg.output_path)
    if args.dump_process:
        grid = ks_grid(cfg.ks_grid_size)
        values = sn_process(result.adcv, grid)
        write_table(args.dump_process, np.column_stack([grid, values]), header=["zeta", "S_n"])
    return EXIT_DEGENERATE if FLAG_DEGENERATE in result.flags else EXIT_OK


def cmd_adcv(args) -> int:
    cfg, series = _load_run(args)
    D = pairwise_distances(series, cfg.metric)
    if cfg.max_lag is not None and cfg.max_lag > len(series) - 4:
        raise CliError(f"config.max_lag: {cfg.max_lag} exceeds n - 4 = {len(series) - 4}")
    v = adcv_all(D, cfg.max_lag)
    doc = {"n": v.n, "metric": cfg.metric.value, "adcv": [float(x) for x in v.v]}
    _emit(doc, args.out or cfg.output_path)
    return EXIT_DEGENERATE if D.degenerate else EXIT_OK


def dgp_from_dict(doc) -> DgpSpec:
    if not isinstance(doc, dict):
        raise CliError("dgp: must be a JSON object")
    names = {f.name for f in fields(DgpSpec)}
    unknown = sorted(set(doc) - names)
    if unknown:
        raise CliError(f"dgp.{unknown[0]}: unknown field")
    if "family" not in doc:
        raise CliError("dgp.family: required")
    try:
        Family(doc["family"])
        return DgpSpec(**doc)
    except (TypeError, ValueError) as exc:
        raise CliError(f"dgp: {exc}") from None


def cmd_simulate(args) -> int:
    if not args.config or not args.out:
        raise CliError("--config and --out are required")
    doc = load_json(args.config, "dgp spec")
    representation = None
    if isinstance(doc, dict) and "representation" in doc:
        doc = dict(doc)
        representation = doc.pop("representation")
        if representation not in REPRESENTATIONS:
            raise CliError(f"dgp.representation: must be one of {', '.join(REPRESENTATIONS)}")
    spec = dgp_from_dict(doc)
    seed = 0 if args.seed is None else args.seed
    series = generate(spec, seed)
    if series.kind is ObjectKind.DISTRIBUTION and representation is None:
        representation = "quantile"
    if representation == "density" and series.density is None:
        series = ObjectSeries.distributions(
            series.grid, density=_derive_density_array(series.cdf, series.grid))
    write_table(args.out, series_to_table(series, representation))
    meta = {
        "object_kind": series.kind.value,
        "n": len(series),
        "seed": seed,
        "dgp": {**doc, "family": spec.family.value},
        "flags": list(series.flags),
    }
    if series.kind is ObjectKind.SPD:
        meta["spd_dim"] = int(series.values.shape[1])
    if representation is not None:
        meta["representation"] = representation
    _emit(meta, args.out + ".meta.json")
    return EXIT_OK


def cmd_experiment(args) -> int:
    if not args.config:
        raise CliError("--config is required")
    doc = load_json(args.config, "experiment spec")
    if args.seed is not None and isinstance(doc, dict):
        doc = {**doc, "base_seed": args.seed}
    try:
        spec = ExperimentSpec.from_dict(doc)
    except SpecError as exc:
        raise CliError(str(exc)) from None
    stem = args.out or (spec.name or os.path.splitext(os.path.basename(args.config))[0])
    step = max(1, spec.M // 20)

    def progress(done: int, total: int) -> None:
        if done % step == 0 or done == total:
            print(f"[{spec.name or 'experiment'}] {done}/{total} datasets", file=sys.stderr, flush=True)

    report = run_experiment(spec, workers=args.threads, progress=progress)
    parent = os.path.dirname(stem)
    if parent:
        os.makedirs(parent, exist_ok=True)
    for path in report.write(stem):
        print(f"wrote {path}", file=sys.stderr)
    return EXIT_OK


COMMANDS = {"test": cmd_test, "adcv": cmd_adcv, "simulate": cmd_simulate,
            "experiment": cmd_experiment}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="metricnoise",
                                     description="Serial independence tests for object-valued time series.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "test": "run the test on a data file",
        "adcv": "print the auto-distance covariances of a data file",
        "simulate": "simulate a series from a data-generating process",
        "experiment": "run a Monte Carlo rejection-rate experiment",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--input", help="CSV data file")
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--out", help="output path (experiment: path stem)")
        p.add_argument("--seed", type=int, help="override the configured seed")
        p.add_argument("--threads", type=int,
                       help="worker threads; defaults to $METRICNOISE_THREADS or 1")
        if name == "test":
            p.add_argument("--dump-process", metavar="CSV",
                           help="write (zeta, S_n(zeta)) on the KS grid")
    return parser


def _set_threads(threads: int | None) -> int:
    import numba

    n = worker_count(threads)
    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
    return n


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.threads is not None and args.threads < 1:
            raise CliError("--threads must be at least 1")
        args.threads = _set_threads(args.threads)
        return COMMANDS[args.command](args)
    except (CliError, ValueError, ArithmeticError, np.linalg.LinAlgError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
