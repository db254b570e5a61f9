"""Spectral process and the Cramér-von Mises / Kolmogorov-Smirnov statistics.

The process is ``S_n(z) = sum_k (n - k) V_n(k) psi_k(z)`` on ``[0, pi]``.
The basis functions ``psi_k`` (k >= 1) are mutually orthogonal on that
interval with ``||psi_k||^2 = 1 / (2 pi k^2)``, so the integrated square of
``S_n`` has a closed form and no quadrature is needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numba
import numpy as np

from .adcv import AdcvSequence


class StatisticKind(str, Enum):
    CVM = "cvm"
    KS = "ks"


@dataclass(frozen=True)
class SpectralConfig:
    ks_grid_size: int = 512
    max_lag: int | None = None

    def __post_init__(self):
        if int(self.ks_grid_size) < 2:
            raise ValueError("ks_grid_size must be at least 2")
        if self.max_lag is not None and int(self.max_lag) < 1:
            raise ValueError("max_lag must be positive")


@dataclass(frozen=True)
class StatisticValue:
    kind: StatisticKind
    value: float

    def __post_init__(self):
        object.__setattr__(self, "kind", StatisticKind(self.kind))
        if not self.value >= 0:
            raise ValueError(f"statistic must be nonnegative, got {self.value}")


def psi(k, zeta):
    """``sin(k z) / (k pi)`` for ``k >= 1`` and ``z / (2 pi)`` for ``k = 0``."""
    k = np.asarray(k)
    zeta = np.asarray(zeta, dtype=float)
    if np.any(k < 0):
        raise ValueError("k must be nonnegative")
    if np.any(zeta < 0) or np.any(zeta > np.pi):
        raise ValueError("zeta must lie in [0, pi]")
    safe_k = np.where(k == 0, 1, k)
    out = np.where(k == 0, zeta / (2 * np.pi), np.sin(safe_k * zeta) / (safe_k * np.pi))
    return out if out.ndim else float(out)


def ks_grid(size: int) -> np.ndarray:
    """Uniform grid on ``[0, pi]`` with endpoints.

    The size is rounded up to the next ``2**j + 1`` so that grids are nested
    when the requested size doubles.
    """
    size = int(size)
    if size < 2:
        raise ValueError("grid size must be at least 2")
    j = max(0, math.ceil(math.log2(size - 1)))
    return np.linspace(0.0, np.pi, 2**j + 1)


def _weighted(v, n: int) -> np.ndarray:
    """``(n - k) V_n(k)`` for each lag; ``v`` may be ``(K,)`` or ``(B, K)``."""
    v = np.asarray(v, dtype=float)
    k = np.arange(1, v.shape[-1] + 1)
    return (n - k) * v


def _basis(max_lag: int, grid: np.ndarray) -> np.ndarray:
    k = np.arange(1, max_lag + 1)[:, None]
    return np.sin(k * grid[None, :]) / (k * np.pi)


def sn_process(v: AdcvSequence, grid) -> np.ndarray:
    """Evaluate ``S_n`` at the points of ``grid``."""
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if grid.size == 0:
        raise ValueError("grid is empty")
    if np.any(grid < 0) or np.any(grid > np.pi):
        raise ValueError("grid must lie in [0, pi]")
    return _weighted(v.v, v.n) @ _basis(v.max_lag, grid)


@numba.njit(cache=True)
def _cvm_rows(w, out):
    for b in range(w.shape[0]):
        s = 0.0
        for k in range(w.shape[1]):
            s += w[b, k] ** 2 / (2.0 * np.pi * (k + 1) ** 2)
        out[b] = s


@numba.njit(cache=True)
def _ks_rows(w, basis, out):
    for b in range(w.shape[0]):
        best = 0.0
        for g in range(basis.shape[1]):
            s = 0.0
            for k in range(w.shape[1]):
                s += w[b, k] * basis[k, g]
            if abs(s) > best:
                best = abs(s)
        out[b] = best


def _rowwise(kernel, v, n, *args):
    w = np.atleast_2d(_weighted(v, n))
    out = np.empty(w.shape[0])
    kernel(np.ascontiguousarray(w), *args, out)
    return out if np.ndim(v) > 1 else out[0]


def cvm_values(v, n: int):
    """Closed-form CvM for one ADCV vector or a ``(B, K)`` batch."""
    return _rowwise(_cvm_rows, v, n)


def ks_values(v, n: int, grid_size: int = 512):
    """``max |S_n|`` over the nested KS grid, for one vector or a batch."""
    basis = _basis(np.shape(v)[-1], ks_grid(grid_size))
    return _rowwise(_ks_rows, v, n, basis)


def cvm_statistic(v: AdcvSequence) -> StatisticValue:
    return StatisticValue(StatisticKind.CVM, float(cvm_values(v.v, v.n)))


def ks_statistic(v: AdcvSequence, cfg: SpectralConfig = SpectralConfig()) -> StatisticValue:
    return StatisticValue(StatisticKind.KS, float(ks_values(v.v, v.n, cfg.ks_grid_size)))


def statistic_values(kind, v, n: int, cfg: SpectralConfig = SpectralConfig()) -> np.ndarray:
    """Statistic ``kind`` for a ``(B, K)`` batch of ADCV vectors."""
    if StatisticKind(kind) is StatisticKind.CVM:
        return cvm_values(v, n)
    return ks_values(v, n, cfg.ks_grid_size)
