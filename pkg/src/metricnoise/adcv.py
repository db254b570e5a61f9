"""Auto-distance covariance estimation.

The distance matrix of a series is computed once. For lag ``k`` the
"a-block" is ``D[k:, k:]`` (pairs of ``X_i, X_j`` with ``i, j > k``) and the
"b-block" is ``D[:n-k, :n-k]`` (the same pairs shifted back by ``k``). Each
block is U-centered and the lag-``k`` estimate is their normalized inner
product.

Three routes compute the same number:

* :func:`adcv_at_lag` U-centers both blocks explicitly,
* :func:`adcv_all` uses a compiled kernel built on row sums (all lags in
  ``O(n^3)`` with no temporaries), and
* :func:`adcv_oracle` averages the order-4 symmetric kernel over every
  4-subset. It is exponentially slower and exists only to check the others.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numba
import numpy as np

from .objects import MetricError, ObjectError, ObjectSeries, distance, pairwise_matrix

MIN_SERIES_LENGTH = 8
ORACLE_MAX_BLOCK = 24


class DistanceError(ValueError):
    """A pairwise distance failed; ``pair`` holds the offending indices."""

    def __init__(self, message: str, pair: tuple[int, int] | None = None):
        super().__init__(message)
        self.pair = pair


class LagError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    d: np.ndarray

    def __post_init__(self):
        d = np.array(self.d, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError(f"distance matrix must be square, got {d.shape}")
        if not np.all(np.isfinite(d)):
            raise ValueError("distance matrix has non-finite entries")
        if np.any(d < 0):
            raise ValueError("distance matrix has negative entries")
        if np.any(np.diag(d) != 0):
            raise ValueError("distance matrix diagonal must be zero")
        if not np.array_equal(d, d.T):
            raise ValueError("distance matrix must be symmetric")
        d.flags.writeable = False
        object.__setattr__(self, "d", d)

    @property
    def n(self) -> int:
        return self.d.shape[0]

    @property
    def degenerate(self) -> bool:
        """True when every distance is zero (all objects coincide)."""
        return not np.any(self.d)

    def a_block(self, k: int) -> np.ndarray:
        return self.d[k:, k:]

    def b_block(self, k: int) -> np.ndarray:
        return self.d[: self.n - k, : self.n - k]

    def permuted(self, perm) -> "DistanceMatrix":
        perm = np.asarray(perm)
        return DistanceMatrix(self.d[np.ix_(perm, perm)])


@dataclass(frozen=True, eq=False)
class UCentered:
    values: np.ndarray

    @property
    def m(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class AdcvSequence:
    """Estimates ``V_n(k)`` for ``k = 1..len(v)`` from a sample of size ``n``."""

    n: int
    v: np.ndarray

    def __post_init__(self):
        v = np.array(self.v, dtype=float).reshape(-1)
        if v.size > self.n - 4:
            raise LagError(f"{v.size} lags exceed n - 4 = {self.n - 4}")
        if not np.all(np.isfinite(v)):
            raise ValueError("ADCV values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "v", v)

    @property
    def max_lag(self) -> int:
        return self.v.size

    @property
    def lags(self) -> np.ndarray:
        return np.arange(1, self.v.size + 1)


def pairwise_distances(series: ObjectSeries, metric) -> DistanceMatrix:
    """Distance matrix of ``series`` under ``metric``."""
    n = len(series)
    if n < 2:
        raise ValueError("need at least two observations")
    try:
        d = pairwise_matrix(series, metric)
        bad = not np.all(np.isfinite(d))
    except (MetricError, ObjectError, FloatingPointError, np.linalg.LinAlgError):
        bad = True
    if bad:
        _locate_failure(series, metric)
        raise DistanceError("pairwise distances are not finite")
    return DistanceMatrix(d)


def _locate_failure(series: ObjectSeries, metric) -> None:
    objs = list(series)
    for i in range(len(objs)):
        for j in range(i + 1, len(objs)):
            try:
                value = distance(objs[i], objs[j], metric)
            except (MetricError, ObjectError, FloatingPointError,
                    np.linalg.LinAlgError) as exc:
                raise DistanceError(f"distance({i}, {j}) failed: {exc}", (i, j)) from exc
            if not np.isfinite(value):
                raise DistanceError(f"distance({i}, {j}) is not finite", (i, j))


def u_center(block) -> UCentered:
    """U-center a square distance block.

    Off-diagonal entries become
    ``a_ij - a_i./(m-2) - a_.j/(m-2) + a../((m-1)(m-2))``; the diagonal is 0.
    """
    a = np.asarray(block, dtype=float)
    m = a.shape[0]
    if a.ndim != 2 or a.shape[1] != m:
        raise ValueError("block must be square")
    if m < 4:
        raise ValueError(f"U-centering needs m >= 4, got {m}")
    rows = a.sum(axis=1)
    cols = a.sum(axis=0)
    total = rows.sum()
    out = a - rows[:, None] / (m - 2) - cols[None, :] / (m - 2) + total / ((m - 1) * (m - 2))
    np.fill_diagonal(out, 0.0)
    return UCentered(out)


def _check_lag(n: int, k: int) -> None:
    if not 1 <= k <= n - 4:
        raise LagError(f"lag {k} outside 1..{n - 4} for n = {n}")


def lag_products(D: DistanceMatrix, k: int) -> np.ndarray:
    """Elementwise product of the U-centered a- and b-blocks at lag ``k``."""
    _check_lag(D.n, k)
    return u_center(D.a_block(k)).values * u_center(D.b_block(k)).values


def adcv_at_lag(D: DistanceMatrix, k: int) -> float:
    m = D.n - k
    return float(np.sum(lag_products(D, k))) / (m * (m - 3))


# kernel h evaluated on all 24 orderings of (i, j, q, r)
_PERMS = np.array(list(itertools.permutations(range(4))))


def adcv_oracle(D: DistanceMatrix, k: int) -> float:
    """Brute-force order-4 U-statistic for ``V_n(k)``.

    With ``Z_i = (X_i, X_{i-k})``, averages
    ``h = 1/24 sum_perm d(X_i1, X_i2) [d(Y_i3, Y_i4) + d(Y_i1, Y_i2) - 2 d(Y_i1, Y_i3)]``
    over all 4-subsets. Cost grows like ``m^4``, so ``m = n - k`` is capped.
    """
    _check_lag(D.n, k)
    m = D.n - k
    if m > ORACLE_MAX_BLOCK:
        raise ValueError(f"oracle limited to n - k <= {ORACLE_MAX_BLOCK}, got {m}")
    a = D.a_block(k)
    b = D.b_block(k)
    quads = np.array(list(itertools.combinations(range(m), 4)))
    idx = quads[:, _PERMS]  # (C, 24, 4)
    i1, i2, i3, i4 = idx[..., 0], idx[..., 1], idx[..., 2], idx[..., 3]
    terms = a[i1, i2] * (b[i3, i4] + b[i1, i2] - 2.0 * b[i1, i3])
    h = terms.sum(axis=1) / 24.0
    return float(h.mean())


@numba.njit(cache=True)
def _adcv_kernel(d, max_lag, out):
    n = d.shape[0]
    pre = np.empty((n, n + 1))
    for i in range(n):
        s = 0.0
        pre[i, 0] = 0.0
        for j in range(n):
            s += d[i, j]
            pre[i, j + 1] = s
    for k in range(1, max_lag + 1):
        m = n - k
        cross = 0.0
        for i in range(m):
            for j in range(i + 1, m):
                cross += d[i + k, j + k] * d[i, j]
        rab = 0.0
        ta = 0.0
        tb = 0.0
        for i in range(m):
            ra = pre[i + k, n] - pre[i + k, k]
            rb = pre[i, m]
            rab += ra * rb
            ta += ra
            tb += rb
        s = 2.0 * cross - 2.0 * rab / (m - 2) + ta * tb / ((m - 1) * (m - 2))
        out[k - 1] = s / (m * (m - 3))


@numba.njit(cache=True, parallel=True)
def _adcv_permuted_kernel(d, perms, max_lag, out):
    n = d.shape[0]
    for b in numba.prange(perms.shape[0]):
        dp = np.empty((n, n))
        p = perms[b]
        for i in range(n):
            for j in range(n):
                dp[i, j] = d[p[i], p[j]]
        _adcv_kernel(dp, max_lag, out[b])


def _resolve_max_lag(n: int, max_lag: int | None) -> int:
    if max_lag is None:
        max_lag = n - 4
    if not 1 <= max_lag <= n - 4:
        raise LagError(f"max_lag {max_lag} outside 1..{n - 4} for n = {n}")
    return int(max_lag)


def adcv_all(D: DistanceMatrix, max_lag: int | None = None) -> AdcvSequence:
    """``V_n(k)`` for ``k = 1..max_lag`` (default ``n - 4``)."""
    max_lag = _resolve_max_lag(D.n, max_lag)
    out = np.empty(max_lag)
    _adcv_kernel(np.ascontiguousarray(D.d), max_lag, out)
    return AdcvSequence(D.n, out)


def adcv_permuted(D: DistanceMatrix, perms: np.ndarray, max_lag: int | None = None) -> np.ndarray:
    """ADCV vectors of the series reordered by each row of ``perms``.

    Returns an array of shape ``(len(perms), max_lag)``; row ``b`` equals
    ``adcv_all(D.permuted(perms[b])).v`` bit for bit.
    """
    max_lag = _resolve_max_lag(D.n, max_lag)
    perms = np.ascontiguousarray(perms, dtype=np.int64)
    out = np.empty((perms.shape[0], max_lag))
    _adcv_permuted_kernel(np.ascontiguousarray(D.d), perms, max_lag, out)
    return out
