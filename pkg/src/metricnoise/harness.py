"""Monte Carlo runner for empirical rejection rates.

For each repetition ``m`` a dataset is simulated with seed ``base_seed ^ m``
and every requested (metric, statistic, method) cell is evaluated on that
same dataset. The resampling seed of repetition ``m`` is derived from the
dataset seed, so a repetition's outcome never depends on which worker ran it
or in which order.
"""

from __future__ import annotations

import csv
import io
import json
import multiprocessing
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from enum import Enum
from typing import Callable

import numpy as np

from . import rng
from .adcv import pairwise_distances
from .dgp import DgpSpec, Family, generate, object_kind
from .objects import THEORY_UNVERIFIED, MetricKind, check_metric
from .resampling import FLAG_THEORY_UNVERIFIED, Method, ResamplingConfig, WeightLaw, evaluate_distances
from .spectral import SpectralConfig, StatisticKind


class SpecError(ValueError):
    """Invalid experiment specification; the message starts with a field path."""


@dataclass(frozen=True)
class ExperimentSpec:
    dgp: DgpSpec
    metrics: tuple[MetricKind, ...]
    statistics: tuple[StatisticKind, ...] = (StatisticKind.CVM, StatisticKind.KS)
    methods: tuple[Method, ...] = (Method.BOOTSTRAP, Method.PERMUTATION)
    M: int = 500
    B: int = 200
    alpha: float = 0.05
    base_seed: int = 0
    weight_law: WeightLaw = WeightLaw.RADEMACHER
    ks_grid_size: int = 512
    max_lag: int | None = None
    name: str = ""

    def __post_init__(self):
        for name, low in (("M", 1), ("B", 1), ("ks_grid_size", 2), ("base_seed", 0)):
            value = _as_int(name, getattr(self, name))
            if value < low:
                raise SpecError(f"experiment.{name}: must be at least {low}, got {value}")
            object.__setattr__(self, name, value)
        if self.base_seed >= 2**64:
            raise SpecError("experiment.base_seed: must fit in 64 bits")
        if self.max_lag is not None:
            object.__setattr__(self, "max_lag", _as_int("max_lag", self.max_lag))
            if self.max_lag < 1:
                raise SpecError("experiment.max_lag: must be positive")
        if isinstance(self.alpha, bool) or not isinstance(self.alpha, (int, float)):
            raise SpecError(f"experiment.alpha: expected a number, got {self.alpha!r}")
        if not 0 < self.alpha < 1:
            raise SpecError(f"experiment.alpha: must lie in (0, 1), got {self.alpha}")
        for name, enum in (("metrics", MetricKind), ("statistics", StatisticKind),
                           ("methods", Method)):
            values = getattr(self, name)
            if isinstance(values, (str, Enum)):
                values = (values,)
            if not values:
                raise SpecError(f"experiment.{name}: must not be empty")
            try:
                values = tuple(enum(v) for v in values)
            except ValueError as exc:
                raise SpecError(f"experiment.{name}: {exc}") from None
            object.__setattr__(self, name, values)
        try:
            object.__setattr__(self, "weight_law", WeightLaw(self.weight_law))
        except ValueError as exc:
            raise SpecError(f"experiment.weight_law: {exc}") from None

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentSpec":
        if not isinstance(doc, dict):
            raise SpecError("experiment: must be a JSON object")
        allowed = {f.name for f in fields(cls)}
        unknown = set(doc) - allowed
        if unknown:
            raise SpecError(f"experiment.{sorted(unknown)[0]}: unknown field")
        if "dgp" not in doc or not isinstance(doc["dgp"], dict):
            raise SpecError("experiment.dgp: required object")
        dgp_fields = {f.name for f in fields(DgpSpec)}
        bad = set(doc["dgp"]) - dgp_fields
        if bad:
            raise SpecError(f"experiment.dgp.{sorted(bad)[0]}: unknown field")
        if "family" not in doc["dgp"]:
            raise SpecError("experiment.dgp.family: required")
        try:
            Family(doc["dgp"]["family"])
        except ValueError as exc:
            raise SpecError(f"experiment.dgp.family: {exc}") from None
        try:
            dgp = DgpSpec(**doc["dgp"])
        except (TypeError, ValueError) as exc:
            raise SpecError(f"experiment.dgp: {exc}") from None
        if "metrics" not in doc:
            raise SpecError("experiment.metrics: required")
        kwargs = {k: v for k, v in doc.items() if k != "dgp"}
        try:
            spec = cls(dgp=dgp, **kwargs)
        except SpecError:
            raise
        except (TypeError, ValueError) as exc:
            raise SpecError(f"experiment: {exc}") from None
        for i, metric in enumerate(spec.metrics):
            try:
                check_metric(object_kind(dgp.family), metric)
            except ValueError as exc:
                raise SpecError(f"experiment.metrics[{i}]: {exc}") from None
        return spec

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "dgp":
                value = _dgp_dict(value)
            elif isinstance(value, tuple):
                value = [v.value if isinstance(v, Enum) else v for v in value]
            elif isinstance(value, Enum):
                value = value.value
            out[f.name] = value
        return out


def _as_int(name: str, value) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise SpecError(f"experiment.{name}: expected an integer, got {value!r}")
    return int(value)


def _dgp_dict(dgp: DgpSpec) -> dict:
    d = asdict(dgp)
    d["family"] = dgp.family.value
    if d["beta"] is not None:
        d["beta"] = list(d["beta"])
    return d


@dataclass
class CellResult:
    metric: MetricKind
    statistic: StatisticKind
    method: Method
    rejections: int = 0
    completed: int = 0
    failed: int = 0
    wall_time: float = 0.0

    @property
    def rate(self) -> float:
        return self.rejections / self.completed if self.completed else float("nan")

    @property
    def mc_se(self) -> float:
        r = self.rate
        return float(np.sqrt(r * (1 - r) / self.completed)) if self.completed else float("nan")

    @property
    def key(self) -> tuple:
        return (self.metric, self.statistic, self.method)


@dataclass
class ExperimentReport:
    spec: ExperimentSpec
    cells: list[CellResult]
    wall_time: float = 0.0
    theory_unverified: tuple[str, ...] = ()

    def cell(self, metric, statistic, method) -> CellResult:
        key = (MetricKind(metric), StatisticKind(statistic), Method(method))
        for c in self.cells:
            if c.key == key:
                return c
        raise KeyError(key)

    def rows(self) -> list[dict]:
        spec = self.spec
        return [
            {
                "name": spec.name,
                "family": spec.dgp.family.value,
                "n": spec.dgp.n,
                "rho": spec.dgp.rho,
                "metric": c.metric.value,
                "statistic": c.statistic.value,
                "method": c.method.value,
                "M": spec.M,
                "B": spec.B,
                "alpha": spec.alpha,
                "rejections": c.rejections,
                "completed": c.completed,
                "failed": c.failed,
                "rate": c.rate,
                "mc_se": c.mc_se,
            }
            for c in self.cells
        ]

    def to_csv(self) -> str:
        buf = io.StringIO()
        rows = self.rows()
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "spec": self.spec.to_dict(),
            "cells": self.rows(),
            "theory_unverified_metrics": list(self.theory_unverified),
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def timing_json(self) -> str:
        doc = {
            "wall_time": self.wall_time,
            "cells": [
                {"metric": c.metric.value, "statistic": c.statistic.value,
                 "method": c.method.value, "wall_time": c.wall_time}
                for c in self.cells
            ],
        }
        return json.dumps(doc, indent=2) + "\n"

    def write(self, stem: str) -> list[str]:
        """Write ``<stem>.csv``, ``<stem>.json`` and ``<stem>.timing.json``."""
        parent = os.path.dirname(stem)
        if parent:
            os.makedirs(parent, exist_ok=True)
        paths = []
        for suffix, text in ((".csv", self.to_csv()), (".json", self.to_json()),
                             (".timing.json", self.timing_json())):
            path = stem + suffix
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
            paths.append(path)
        return paths


def dataset_seed(base_seed: int, m: int) -> int:
    return (int(base_seed) ^ int(m)) & (2**64 - 1)


def resampling_seed(data_seed: int) -> int:
    return int(rng.keyed_generator(data_seed, rng.RESAMPLE).integers(0, 2**63))


def run_replicate(spec: ExperimentSpec, m: int) -> dict:
    """Outcomes of every cell on dataset ``m``.

    Returns ``{(metric, statistic, method): (rejected or None, seconds)}``
    where ``None`` marks a failed cell.
    """
    seed = dataset_seed(spec.base_seed, m)
    series = generate(spec.dgp, seed)
    spectral = SpectralConfig(spec.ks_grid_size, spec.max_lag)
    out = {}
    for metric in spec.metrics:
        t0 = time.perf_counter()
        try:
            D = pairwise_distances(series, metric)
        except Exception:  # noqa: BLE001 - recorded as a failed cell
            D = None
        dist_time = time.perf_counter() - t0
        for method in spec.methods:
            t0 = time.perf_counter()
            cfg = ResamplingConfig(method, spec.B, spec.weight_law, spec.alpha,
                                   resampling_seed(seed))
            try:
                if D is None:
                    raise RuntimeError("distance computation failed")
                results = evaluate_distances(D, spec.statistics, cfg, spectral)
                decisions = [r.reject for r in results]
            except Exception:  # noqa: BLE001
                decisions = [None] * len(spec.statistics)
            elapsed = dist_time / len(spec.methods) + time.perf_counter() - t0
            for stat, decision in zip(spec.statistics, decisions):
                out[(metric, stat, method)] = (decision, elapsed / len(spec.statistics))
    return out


def _replicate_chunk(args):
    spec, ms = args
    import numba

    numba.set_num_threads(1)
    return [run_replicate(spec, m) for m in ms]


def worker_count(threads: int | None = None) -> int:
    if threads is None:
        threads = int(os.environ.get("METRICNOISE_THREADS", "1"))
    return max(1, int(threads))


def run_experiment(
    spec: ExperimentSpec,
    workers: int | None = None,
    progress: Callable[[int, int], None] | None = None,
) -> ExperimentReport:
    """Simulate ``spec.M`` datasets and tabulate rejection rates per cell."""
    workers = worker_count(workers)
    cells = {
        (metric, stat, method): CellResult(metric, stat, method)
        for metric in spec.metrics
        for stat in spec.statistics
        for method in spec.methods
    }
    start = time.perf_counter()
    done = 0

    def absorb(outcome):
        nonlocal done
        for key, (decision, seconds) in outcome.items():
            cell = cells[key]
            cell.wall_time += seconds
            if decision is None:
                cell.failed += 1
            else:
                cell.completed += 1
                cell.rejections += int(decision)
        done += 1
        if progress is not None:
            progress(done, spec.M)

    if workers == 1:
        for m in range(spec.M):
            absorb(run_replicate(spec, m))
    else:
        size = max(1, spec.M // (4 * workers))
        chunks = [list(range(i, min(i + size, spec.M))) for i in range(0, spec.M, size)]
        # spawn: forking after the OpenMP runtime has started is unsafe
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            for outcomes in pool.map(_replicate_chunk, [(spec, c) for c in chunks]):
                for outcome in outcomes:
                    absorb(outcome)
    unverified = tuple(m.value for m in spec.metrics if m in THEORY_UNVERIFIED)
    return ExperimentReport(
        spec=spec,
        cells=list(cells.values()),
        wall_time=time.perf_counter() - start,
        theory_unverified=unverified,
    )


__all__ = [
    "CellResult", "ExperimentReport", "ExperimentSpec", "SpecError",
    "FLAG_THEORY_UNVERIFIED", "run_experiment", "run_replicate",
]
