"""Random objects, their validation, and the metrics between them.

Four object kinds are supported: real vectors, curves sampled on a common
grid, symmetric positive-definite (SPD) matrices, and univariate
distributions on [0, 1] given by quantile, CDF and/or density values on a
grid. Integrals over a grid use the trapezoidal rule on that grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Sequence

import numpy as np

SPD_FLOOR = 1e-10
SYMMETRY_TOL = 1e-10
DENSITY_FLOOR = 1e-12


class ObjectError(ValueError):
    """An object or series violates its type invariants."""


class MetricError(ValueError):
    """A distance cannot be evaluated for the given pair and metric."""


class ObjectKind(str, Enum):
    VECTOR = "vector"
    CURVE = "curve"
    SPD = "spd"
    DISTRIBUTION = "distribution"


class MetricKind(str, Enum):
    VECTOR_EUCLIDEAN = "euclidean"
    CURVE_L2 = "l2"
    SPD_FROBENIUS = "frobenius"
    SPD_LOG_EUCLIDEAN = "log_euclidean"
    SPD_CHOLESKY = "cholesky"
    SPD_RIEMANN = "riemann"
    DIST_W1 = "w1"
    DIST_W2 = "w2"
    DIST_KS = "ks"
    DIST_KL = "kl"
    DIST_IS = "is"
    DIST_LS = "ls"


METRIC_OBJECT_KIND = {
    MetricKind.VECTOR_EUCLIDEAN: ObjectKind.VECTOR,
    MetricKind.CURVE_L2: ObjectKind.CURVE,
    MetricKind.SPD_FROBENIUS: ObjectKind.SPD,
    MetricKind.SPD_LOG_EUCLIDEAN: ObjectKind.SPD,
    MetricKind.SPD_CHOLESKY: ObjectKind.SPD,
    MetricKind.SPD_RIEMANN: ObjectKind.SPD,
    MetricKind.DIST_W1: ObjectKind.DISTRIBUTION,
    MetricKind.DIST_W2: ObjectKind.DISTRIBUTION,
    MetricKind.DIST_KS: ObjectKind.DISTRIBUTION,
    MetricKind.DIST_KL: ObjectKind.DISTRIBUTION,
    MetricKind.DIST_IS: ObjectKind.DISTRIBUTION,
    MetricKind.DIST_LS: ObjectKind.DISTRIBUTION,
}

# divergences used as if they were metrics; strong negative type is not established
THEORY_UNVERIFIED = frozenset(
    {MetricKind.DIST_KL, MetricKind.DIST_IS, MetricKind.DIST_LS}
)

_QUANTILE_METRICS = frozenset({MetricKind.DIST_W1, MetricKind.DIST_W2})
_DENSITY_METRICS = THEORY_UNVERIFIED


def check_metric(kind: ObjectKind, metric: MetricKind | str) -> MetricKind:
    metric = MetricKind(metric)
    if METRIC_OBJECT_KIND[metric] is not ObjectKind(kind):
        raise MetricError(
            f"metric {metric.value!r} is not defined for {ObjectKind(kind).value} objects"
        )
    return metric


# ---------------------------------------------------------------------------
# symmetric matrix functions


def _is_symmetric(a: np.ndarray) -> bool:
    scale = np.linalg.norm(a)
    return bool(np.linalg.norm(a - a.T) <= SYMMETRY_TOL * scale)


def sym_eig(a) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a real symmetric matrix.

    Returns
    -------
    eigenvalues : ndarray, shape (p,)
        In descending order.
    eigenvectors : ndarray, shape (p, p)
        Orthonormal columns, ``a = V @ diag(eigenvalues) @ V.T``.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ObjectError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ObjectError("matrix has non-finite entries")
    if not _is_symmetric(a):
        raise ObjectError("matrix is not symmetric")
    w, v = np.linalg.eigh(0.5 * (a + a.T))
    return w[::-1], v[:, ::-1]


def _spd_eig(a) -> tuple[np.ndarray, np.ndarray]:
    w, v = sym_eig(a)
    if not w[-1] > SPD_FLOOR * w[0]:
        raise ObjectError(
            f"matrix is not positive definite (eigenvalues {w[-1]:.3g} .. {w[0]:.3g})"
        )
    return w, v


def _eig_apply(w: np.ndarray, v: np.ndarray, f) -> np.ndarray:
    out = (v * f(w)) @ v.T
    return 0.5 * (out + out.T)


def matrix_log(a) -> np.ndarray:
    """Principal logarithm of an SPD matrix."""
    return _eig_apply(*_spd_eig(a), np.log)


def matrix_sqrt(a) -> np.ndarray:
    """Principal square root of an SPD matrix."""
    return _eig_apply(*_spd_eig(a), np.sqrt)


def matrix_inv_sqrt(a) -> np.ndarray:
    return _eig_apply(*_spd_eig(a), lambda w: 1.0 / np.sqrt(w))


def cholesky_lower(a) -> np.ndarray:
    """Lower-triangular Cholesky factor with positive diagonal."""
    _spd_eig(a)
    return np.linalg.cholesky(0.5 * (np.asarray(a, float) + np.asarray(a, float).T))


# ---------------------------------------------------------------------------
# single objects


def _as_grid(grid) -> np.ndarray:
    grid = np.array(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise ObjectError("grid must be a vector with at least 2 points")
    if not np.all(np.isfinite(grid)):
        raise ObjectError("grid has non-finite entries")
    if np.any(np.diff(grid) <= 0):
        raise ObjectError("grid must be strictly increasing")
    if grid[0] < 0 or grid[-1] > 1:
        raise ObjectError("grid must lie in [0, 1]")
    grid.flags.writeable = False
    return grid


def _frozen(a, ndim: int, what: str) -> np.ndarray:
    a = np.array(a, dtype=float)
    if a.ndim != ndim:
        raise ObjectError(f"{what} must have {ndim} dimension(s), got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ObjectError(f"{what} has non-finite entries")
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class VectorObject:
    values: np.ndarray

    def __post_init__(self):
        v = _frozen(np.atleast_1d(self.values), 1, "vector")
        if v.size < 1:
            raise ObjectError("vector must have at least one entry")
        object.__setattr__(self, "values", v)

    kind = ObjectKind.VECTOR


@dataclass(frozen=True, eq=False)
class CurveObject:
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = _as_grid(self.grid)
        values = _frozen(self.values, 1, "curve values")
        if values.shape != grid.shape:
            raise ObjectError("curve values and grid differ in length")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    kind = ObjectKind.CURVE


@dataclass(frozen=True, eq=False)
class SpdObject:
    matrix: np.ndarray

    def __post_init__(self):
        a = _frozen(self.matrix, 2, "SPD matrix")
        _spd_eig(a)
        a = 0.5 * (a + a.T)
        a.flags.writeable = False
        object.__setattr__(self, "matrix", a)

    kind = ObjectKind.SPD


def _check_distribution_arrays(grid, quantile, cdf, density, axis_len):
    if quantile is None and cdf is None and density is None:
        raise ObjectError("distribution needs at least one of quantile, cdf, density")
    for name, arr in (("quantile", quantile), ("cdf", cdf), ("density", density)):
        if arr is not None and arr.shape[-1] != axis_len:
            raise ObjectError(f"{name} length does not match the grid")
    if quantile is not None and np.any(np.diff(quantile, axis=-1) < 0):
        raise ObjectError("quantile function must be nondecreasing")
    if cdf is not None:
        if np.any(np.diff(cdf, axis=-1) < 0):
            raise ObjectError("cdf must be nondecreasing")
        if np.any(cdf < 0) or np.any(cdf > 1):
            raise ObjectError("cdf values must lie in [0, 1]")
    if density is not None and np.any(density < 0):
        raise ObjectError("density must be nonnegative")


@dataclass(frozen=True, eq=False)
class DistributionObject:
    grid: np.ndarray
    quantile: np.ndarray | None = None
    cdf: np.ndarray | None = None
    density: np.ndarray | None = None

    def __post_init__(self):
        grid = _as_grid(self.grid)
        object.__setattr__(self, "grid", grid)
        for name in ("quantile", "cdf", "density"):
            arr = getattr(self, name)
            if arr is not None:
                object.__setattr__(self, name, _frozen(arr, 1, name))
        _check_distribution_arrays(grid, self.quantile, self.cdf, self.density, grid.size)

    kind = ObjectKind.DISTRIBUTION


def _derive_density_array(cdf: np.ndarray, grid: np.ndarray) -> np.ndarray:
    edge = 2 if grid.size >= 3 else 1
    dens = np.gradient(cdf, grid, axis=-1, edge_order=edge)
    return np.maximum(dens, DENSITY_FLOOR)


def derive_density(d: DistributionObject) -> DistributionObject:
    """Fill in the density by centered finite differences of the CDF.

    The result is clipped below at ``DENSITY_FLOOR`` and not renormalized.
    """
    if d.cdf is None:
        raise ObjectError("deriving a density requires the cdf")
    return DistributionObject(
        d.grid, quantile=d.quantile, cdf=d.cdf, density=_derive_density_array(d.cdf, d.grid)
    )


# ---------------------------------------------------------------------------
# series


@dataclass(frozen=True, eq=False)
class ObjectSeries:
    """An ordered sequence of same-kind objects stored as stacked arrays.

    ``values`` holds vectors ``(n, q)``, curves ``(n, T)`` or SPD matrices
    ``(n, p, p)``. Distributions use ``quantile``/``cdf``/``density``, each
    ``(n, G)`` when present. Curves and distributions share ``grid``.
    """

    kind: ObjectKind
    values: np.ndarray | None = None
    grid: np.ndarray | None = None
    quantile: np.ndarray | None = None
    cdf: np.ndarray | None = None
    density: np.ndarray | None = None
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        kind = ObjectKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "flags", tuple(self.flags))
        if kind is ObjectKind.DISTRIBUTION:
            grid = _as_grid(self.grid)
            object.__setattr__(self, "grid", grid)
            n = None
            for name in ("quantile", "cdf", "density"):
                arr = getattr(self, name)
                if arr is None:
                    continue
                arr = _frozen(arr, 2, name)
                if n is not None and arr.shape[0] != n:
                    raise ObjectError("representations disagree on the series length")
                n = arr.shape[0]
                object.__setattr__(self, name, arr)
            _check_distribution_arrays(grid, self.quantile, self.cdf, self.density, grid.size)
            return
        ndim = {ObjectKind.VECTOR: 2, ObjectKind.CURVE: 2, ObjectKind.SPD: 3}[kind]
        values = np.asarray(self.values, dtype=float)
        if kind is ObjectKind.VECTOR and values.ndim == 1:
            values = values[:, None]
        values = _frozen(values, ndim, f"{kind.value} series")
        if values.shape[1] < 1:
            raise ObjectError("vectors must have at least one entry")
        if kind is ObjectKind.CURVE:
            grid = _as_grid(self.grid)
            if values.shape[1] != grid.size:
                raise ObjectError("curve values and grid differ in length")
            object.__setattr__(self, "grid", grid)
        if kind is ObjectKind.SPD:
            values = _validate_spd_stack(values)
        object.__setattr__(self, "values", values)

    @classmethod
    def vectors(cls, values, flags=()) -> "ObjectSeries":
        return cls(ObjectKind.VECTOR, values=values, flags=flags)

    @classmethod
    def curves(cls, grid, values, flags=()) -> "ObjectSeries":
        return cls(ObjectKind.CURVE, values=values, grid=grid, flags=flags)

    @classmethod
    def spd(cls, matrices, flags=()) -> "ObjectSeries":
        return cls(ObjectKind.SPD, values=matrices, flags=flags)

    @classmethod
    def distributions(cls, grid, quantile=None, cdf=None, density=None, flags=()):
        return cls(
            ObjectKind.DISTRIBUTION, grid=grid, quantile=quantile, cdf=cdf,
            density=density, flags=flags,
        )

    @classmethod
    def from_objects(cls, objs: Sequence) -> "ObjectSeries":
        objs = list(objs)
        if not objs:
            raise ObjectError("empty series")
        kind = objs[0].kind
        if any(o.kind is not kind for o in objs):
            raise ObjectError("objects in a series must share one kind")
        if kind is ObjectKind.VECTOR:
            return cls.vectors(np.stack([o.values for o in objs]))
        if kind is ObjectKind.SPD:
            return cls.spd(np.stack([o.matrix for o in objs]))
        grid = objs[0].grid
        if any(not np.array_equal(o.grid, grid) for o in objs):
            raise ObjectError("objects in a series must share one grid")
        if kind is ObjectKind.CURVE:
            return cls.curves(grid, np.stack([o.values for o in objs]))
        reps = {}
        for name in ("quantile", "cdf", "density"):
            arrs = [getattr(o, name) for o in objs]
            if all(a is not None for a in arrs):
                reps[name] = np.stack(arrs)
        return cls.distributions(grid, **reps)

    def __len__(self) -> int:
        if self.kind is ObjectKind.DISTRIBUTION:
            for arr in (self.quantile, self.cdf, self.density):
                if arr is not None:
                    return arr.shape[0]
        return self.values.shape[0]

    def __getitem__(self, i: int):
        if self.kind is ObjectKind.VECTOR:
            return VectorObject(self.values[i])
        if self.kind is ObjectKind.CURVE:
            return CurveObject(self.grid, self.values[i])
        if self.kind is ObjectKind.SPD:
            return SpdObject(self.values[i])
        return DistributionObject(
            self.grid,
            quantile=None if self.quantile is None else self.quantile[i],
            cdf=None if self.cdf is None else self.cdf[i],
            density=None if self.density is None else self.density[i],
        )

    def __iter__(self) -> Iterator:
        return (self[i] for i in range(len(self)))

    def take(self, index) -> "ObjectSeries":
        """Series made of the objects at ``index`` (in that order)."""
        index = np.asarray(index)

        def pick(a):
            return None if a is None else a[index]

        return ObjectSeries(
            self.kind, values=pick(self.values), grid=self.grid,
            quantile=pick(self.quantile), cdf=pick(self.cdf),
            density=pick(self.density), flags=self.flags,
        )


def _validate_spd_stack(values: np.ndarray) -> np.ndarray:
    if values.shape[1] != values.shape[2]:
        raise ObjectError(f"SPD series needs square matrices, got {values.shape[1:]}")
    for i, a in enumerate(values):
        try:
            _spd_eig(a)
        except ObjectError as exc:
            raise ObjectError(f"observation {i}: {exc}") from None
    out = 0.5 * (values + np.swapaxes(values, 1, 2))
    out.flags.writeable = False
    return out


# ---------------------------------------------------------------------------
# distances
#
# Each metric is a feature map applied once per object plus a kernel that
# compares one feature row against a batch. ``distance`` and the pairwise
# matrix share both, so they agree.


def trapezoid_weights(grid: np.ndarray) -> np.ndarray:
    """Weights ``w`` such that ``sum(w * f)`` is the trapezoidal integral."""
    h = np.diff(grid)
    w = np.zeros_like(grid)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return w


def _density_rows(quantile, cdf, density, grid) -> np.ndarray:
    if density is None:
        if cdf is None:
            raise MetricError("density-based metrics need a density or a cdf")
        density = _derive_density_array(cdf, grid)
    dens = np.maximum(density, DENSITY_FLOOR)
    dead = np.all(dens <= DENSITY_FLOOR, axis=-1)
    if np.any(dead):
        idx = int(np.flatnonzero(np.atleast_1d(dead))[0])
        raise MetricError(f"degenerate density (zero everywhere) at observation {idx}")
    return np.atleast_2d(dens)


@dataclass(frozen=True)
class _Features:
    metric: MetricKind
    rows: np.ndarray
    weights: np.ndarray | None = None
    span: float = 1.0
    extra: tuple = ()


def series_features(series: ObjectSeries, metric: MetricKind | str) -> _Features:
    """Precompute per-object features of ``series`` for ``metric``."""
    metric = check_metric(series.kind, metric)
    if metric is MetricKind.VECTOR_EUCLIDEAN:
        return _Features(metric, series.values)
    if metric is MetricKind.CURVE_L2:
        return _Features(metric, series.values, trapezoid_weights(series.grid))
    if metric in (MetricKind.SPD_FROBENIUS, MetricKind.SPD_LOG_EUCLIDEAN,
                  MetricKind.SPD_CHOLESKY):
        f = {MetricKind.SPD_FROBENIUS: lambda a: a,
             MetricKind.SPD_LOG_EUCLIDEAN: matrix_log,
             MetricKind.SPD_CHOLESKY: cholesky_lower}[metric]
        rows = np.stack([f(a) for a in series.values]).reshape(len(series), -1)
        return _Features(metric, rows)
    if metric is MetricKind.SPD_RIEMANN:
        mats = series.values
        inv_sqrt = np.stack([matrix_inv_sqrt(a) for a in mats])
        flat = mats.reshape(len(mats), -1)
        order = np.lexsort(flat.T[::-1])
        rank = np.empty(len(mats), dtype=np.int64)
        rank[order] = np.arange(len(mats))
        return _Features(metric, mats, extra=(inv_sqrt, rank))
    grid = series.grid
    w = trapezoid_weights(grid)
    if metric in _QUANTILE_METRICS:
        if series.quantile is None:
            raise MetricError(f"metric {metric.value!r} needs quantile functions")
        return _Features(metric, series.quantile, w)
    if metric is MetricKind.DIST_KS:
        if series.cdf is None:
            raise MetricError("metric 'ks' needs cdf values")
        return _Features(metric, series.cdf)
    dens = _density_rows(series.quantile, series.cdf, series.density, grid)
    logs = np.log10(dens) if metric is MetricKind.DIST_LS else np.log(dens)
    return _Features(metric, dens, w, span=float(grid[-1] - grid[0]), extra=(logs,))


def _row_kernel(feat: _Features, i: int, js: np.ndarray) -> np.ndarray:
    """Distances from object ``i`` to objects ``js``."""
    m = feat.metric
    a, b = feat.rows[i], feat.rows[js]
    if m in (MetricKind.VECTOR_EUCLIDEAN, MetricKind.SPD_FROBENIUS,
             MetricKind.SPD_LOG_EUCLIDEAN, MetricKind.SPD_CHOLESKY):
        return np.sqrt(np.sum((b - a) ** 2, axis=-1))
    if m in (MetricKind.CURVE_L2, MetricKind.DIST_W2):
        return np.sqrt(np.sum(feat.weights * (b - a) ** 2, axis=-1))
    if m is MetricKind.DIST_W1:
        return np.sum(feat.weights * np.abs(b - a), axis=-1)
    if m is MetricKind.DIST_KS:
        return np.max(np.abs(b - a), axis=-1)
    if m is MetricKind.SPD_RIEMANN:
        inv_sqrt, rank = feat.extra
        first = np.where(rank[i] <= rank[js], i, js)
        second = np.where(rank[i] <= rank[js], js, i)
        s = inv_sqrt[first]
        c = s @ feat.rows[second] @ s
        c = 0.5 * (c + np.swapaxes(c, -1, -2))
        lam = np.linalg.eigvalsh(c)
        return np.sqrt(np.sum(np.log(lam) ** 2, axis=-1))
    (logs,) = feat.extra
    la, lb = logs[i], logs[js]
    w = feat.weights
    if m is MetricKind.DIST_KL:
        return 0.5 * (np.sum(w * a * (la - lb), axis=-1) + np.sum(w * b * (lb - la), axis=-1))
    if m is MetricKind.DIST_IS:
        left = np.sum(w * (a / b - (la - lb) - 1.0), axis=-1)
        right = np.sum(w * (b / a - (lb - la) - 1.0), axis=-1)
        return (left + right) / (2.0 * feat.span)
    if m is MetricKind.DIST_LS:
        return np.sqrt(np.sum(w * (10.0 * (la - lb)) ** 2, axis=-1) / feat.span)
    raise MetricError(f"unknown metric {m!r}")  # pragma: no cover


def pairwise_matrix(series: ObjectSeries, metric: MetricKind | str) -> np.ndarray:
    """Symmetric ``(n, n)`` matrix of distances with an exactly zero diagonal."""
    feat = series_features(series, metric)
    n = len(series)
    d = np.zeros((n, n))
    for i in range(n - 1):
        js = np.arange(i + 1, n)
        row = _row_kernel(feat, i, js)
        d[i, i + 1:] = row
        d[i + 1:, i] = row
    return d


def _single_series(obj) -> ObjectSeries:
    return ObjectSeries.from_objects([obj])


def distance(a, b, metric: MetricKind | str) -> float:
    """Distance between two objects of the same kind under ``metric``."""
    if a.kind is not b.kind:
        raise MetricError(f"cannot compare {a.kind.value} with {b.kind.value}")
    metric = check_metric(a.kind, metric)
    if a.kind in (ObjectKind.CURVE, ObjectKind.DISTRIBUTION):
        if not np.array_equal(a.grid, b.grid):
            raise MetricError("objects live on different grids")
    if a.kind is ObjectKind.VECTOR and a.values.shape != b.values.shape:
        raise MetricError("vectors differ in dimension")
    if a.kind is ObjectKind.SPD and a.matrix.shape != b.matrix.shape:
        raise MetricError("matrices differ in dimension")
    if a.kind is ObjectKind.DISTRIBUTION:
        # use only representations both objects carry
        reps = {
            name: np.stack([getattr(a, name), getattr(b, name)])
            for name in ("quantile", "cdf", "density")
            if getattr(a, name) is not None and getattr(b, name) is not None
        }
        if not reps:
            raise MetricError("objects share no representation")
        pair = ObjectSeries.distributions(a.grid, **reps)
    else:
        pair = ObjectSeries.from_objects([a, b])
    feat = series_features(pair, metric)
    return float(_row_kernel(feat, 0, np.array([1]))[0])
