"""Data-generating processes for the Monte Carlo studies.

Every generator is a pure function of ``(spec, seed)``. Recursive families
run ``burn_in`` extra steps that are discarded.

Families
--------
Univariate (``d(x, y) = |x - y|``): ``univ_iid``, ``univ_nma2``,
``univ_arch2``, ``univ_tar1``.
Bivariate with innovation correlation ``rho``: ``biv_iid``, ``biv_nma2``,
``biv_arch2``, ``biv_mar2``; and ``var1`` in dimension ``dim``.
Functional on a ``grid_size``-point grid of [0, 1]: ``func_bm``, ``func_bb``,
``func_farch``, ``func_fnma``, ``func_far``.
SPD matrices: ``caw`` (conditional autoregressive Wishart, dimension ``dim``).
Distributions: ``atm`` (autoregressive transport model of order ``order``).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline

from . import rng
from .objects import SPD_FLOOR, ObjectKind, ObjectSeries, trapezoid_weights

FAR_GAUSSIAN_C = 0.2051
FAR_WIENER_C = 0.7346
ATM4_PATTERN = (0.2, -0.5, 0.1, -0.3)
SPLINE_KNOTS = ((0.0, 0.0), (0.33, 0.2), (0.66, 0.8), (1.0, 1.0))
FLAG_REGENERATED = "regenerated_non_spd"


class Family(str, Enum):
    UNIV_IID = "univ_iid"
    UNIV_NMA2 = "univ_nma2"
    UNIV_ARCH2 = "univ_arch2"
    UNIV_TAR1 = "univ_tar1"
    BIV_IID = "biv_iid"
    BIV_NMA2 = "biv_nma2"
    BIV_ARCH2 = "biv_arch2"
    BIV_MAR2 = "biv_mar2"
    VAR1 = "var1"
    FUNC_BM = "func_bm"
    FUNC_BB = "func_bb"
    FUNC_FARCH = "func_farch"
    FUNC_FNMA = "func_fnma"
    FUNC_FAR = "func_far"
    CAW = "caw"
    ATM = "atm"


NULL_FAMILIES = frozenset({Family.UNIV_IID, Family.BIV_IID, Family.FUNC_BM, Family.FUNC_BB})


def is_null(spec: "DgpSpec") -> bool:
    """True when ``spec`` generates an i.i.d. series."""
    if spec.family in NULL_FAMILIES:
        return True
    if spec.family in (Family.CAW, Family.VAR1):
        return spec.rho == 0
    return spec.family is Family.ATM and not any(spec.beta)


_FUNCTIONAL = frozenset({Family.FUNC_BM, Family.FUNC_BB, Family.FUNC_FARCH,
                         Family.FUNC_FNMA, Family.FUNC_FAR})
_BIVARIATE = frozenset({Family.BIV_IID, Family.BIV_NMA2, Family.BIV_ARCH2, Family.BIV_MAR2})


def object_kind(family) -> ObjectKind:
    """Kind of object produced by ``family``."""
    family = Family(family)
    if family in _FUNCTIONAL:
        return ObjectKind.CURVE
    if family is Family.CAW:
        return ObjectKind.SPD
    if family is Family.ATM:
        return ObjectKind.DISTRIBUTION
    return ObjectKind.VECTOR


@dataclass(frozen=True)
class DgpSpec:
    """A data-generating process and its parameters.

    ``rho`` is the dependence parameter: the innovation correlation for the
    bivariate families, the autoregressive coefficient for ``var1``, the
    kernel constant for ``func_farch``, the recursion weight for ``caw`` and
    the scale of the default ``beta`` for ``atm``.
    """

    family: Family
    n: int = 200
    rho: float = 0.0
    dim: int = 2
    noise: str = "bm"
    kernel: str = "gaussian"
    order: int = 0
    beta: tuple[float, ...] | None = None
    grid_size: int | None = None
    burn_in: int = 200

    def __post_init__(self):
        fam = Family(self.family)
        object.__setattr__(self, "family", fam)
        if int(self.n) < 1:
            raise ValueError("n must be positive")
        if int(self.burn_in) < 0:
            raise ValueError("burn_in must be nonnegative")
        if fam in _BIVARIATE and not -1 < self.rho < 1:
            raise ValueError("bivariate innovation correlation rho must lie in (-1, 1)")
        if fam is Family.VAR1 and not -1 < self.rho < 1:
            raise ValueError("VAR(1) coefficient rho must lie in (-1, 1)")
        if fam in (Family.FUNC_FARCH, Family.CAW) and self.rho < 0:
            raise ValueError("rho must be nonnegative")
        if fam in (Family.VAR1, Family.CAW) and int(self.dim) < 1:
            raise ValueError("dim must be positive")
        if self.noise not in ("bm", "bb"):
            raise ValueError("noise must be 'bm' or 'bb'")
        if self.kernel not in ("gaussian", "wiener"):
            raise ValueError("kernel must be 'gaussian' or 'wiener'")
        if self.grid_size is not None and int(self.grid_size) < 2:
            raise ValueError("grid_size must be at least 2")
        if fam is Family.ATM:
            if int(self.order) < 0:
                raise ValueError("ATM order must be nonnegative")
            beta = self.atm_beta()
            if len(beta) != self.order:
                raise ValueError(f"ATM({self.order}) needs {self.order} coefficients")
            if any(not -1 <= b <= 1 for b in beta):
                raise ValueError("ATM coefficients must lie in [-1, 1]")
            object.__setattr__(self, "beta", beta)

    @property
    def grid_points(self) -> int:
        if self.grid_size is not None:
            return int(self.grid_size)
        return 101 if self.family is Family.ATM else 1000

    def atm_beta(self) -> tuple[float, ...]:
        if self.beta is not None:
            return tuple(float(b) for b in self.beta)
        if self.order == 0:
            return ()
        if self.order == 1:
            return (0.5 * self.rho,)
        if self.order == 4:
            return tuple(self.rho * b for b in ATM4_PATTERN)
        raise ValueError(f"no default coefficients for ATM({self.order}); pass beta")


def generate(spec: DgpSpec, seed: int) -> ObjectSeries:
    """Simulate ``spec.n`` observations from ``spec``, reproducibly from ``seed``."""
    gen = rng.keyed_generator(seed, rng.DATA)
    fam = spec.family
    if fam in (Family.UNIV_IID, Family.UNIV_NMA2, Family.UNIV_ARCH2, Family.UNIV_TAR1):
        return ObjectSeries.vectors(_univariate(spec, gen)[:, None])
    if fam in _BIVARIATE:
        return ObjectSeries.vectors(_bivariate(spec, gen))
    if fam is Family.VAR1:
        return ObjectSeries.vectors(_var1(spec, gen))
    if fam in _FUNCTIONAL:
        grid = np.linspace(0.0, 1.0, spec.grid_points)
        return ObjectSeries.curves(grid, _functional(spec, gen, grid))
    if fam is Family.CAW:
        return _caw_series(spec, seed)
    return _atm_series(spec, gen)


# ---------------------------------------------------------------------------
# Euclidean families


def arch2_path(eps: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """ARCH(2) recursion driven by ``eps``; returns ``(y, sigma2)``."""
    y = np.zeros(eps.size)
    s2 = np.zeros(eps.size)
    y1 = y2 = 0.0
    for t in range(eps.size):
        s2[t] = 0.5 + 0.8 * y1 * y1 + 0.1 * y2 * y2
        y[t] = np.sqrt(s2[t]) * eps[t]
        y2, y1 = y1, y[t]
    return y, s2


def _univariate(spec: DgpSpec, gen) -> np.ndarray:
    n, burn = spec.n, spec.burn_in
    fam = spec.family
    if fam is Family.UNIV_IID:
        return gen.standard_normal(n)
    if fam is Family.UNIV_NMA2:
        e = gen.standard_normal(n + 2)
        return e[2:] * e[1:-1] * e[:-2]
    e = gen.standard_normal(n + burn)
    if fam is Family.UNIV_ARCH2:
        return arch2_path(e)[0][burn:]
    y = np.empty(n + burn)
    prev = 0.0
    for t in range(n + burn):
        prev = (-1.5 * prev if prev < 0 else 0.5 * prev) + e[t]
        y[t] = prev
    return y[burn:]


_BIV_ARCH_C = np.array([0.003, 0.005])
_BIV_ARCH_A = np.array([[0.2, 0.1], [0.1, 0.3]])
_BIV_ARCH_B = np.array([[0.4, 0.05], [0.05, 0.5]])
_BIV_MAR = np.array([[0.04, -0.1], [0.11, 0.5]])


def _bivariate(spec: DgpSpec, gen) -> np.ndarray:
    n, burn, fam = spec.n, spec.burn_in, spec.family
    chol = np.linalg.cholesky(np.array([[1.0, spec.rho], [spec.rho, 1.0]]))
    extra = {Family.BIV_IID: 0, Family.BIV_NMA2: 2}.get(fam, burn)
    e = gen.standard_normal((n + extra, 2)) @ chol.T
    if fam is Family.BIV_IID:
        return e
    if fam is Family.BIV_NMA2:
        return e[2:] * e[1:-1] * e[:-2]
    y = np.zeros_like(e)
    if fam is Family.BIV_ARCH2:
        h = _BIV_ARCH_C.copy()
        prev = np.zeros(2)
        for t in range(e.shape[0]):
            h = _BIV_ARCH_C + _BIV_ARCH_A @ prev**2 + _BIV_ARCH_B @ h
            prev = np.sqrt(h) * e[t]
            y[t] = prev
    else:
        prev = np.zeros(2)
        for t in range(e.shape[0]):
            prev = _BIV_MAR @ prev + e[t]
            y[t] = prev
    return y[burn:]


def _var1(spec: DgpSpec, gen) -> np.ndarray:
    e = gen.standard_normal((spec.n + spec.burn_in, spec.dim))
    y = np.zeros_like(e)
    prev = np.zeros(spec.dim)
    for t in range(e.shape[0]):
        prev = spec.rho * prev + e[t]
        y[t] = prev
    return y[spec.burn_in:]


# ---------------------------------------------------------------------------
# functional families


def brownian_motion(gen, count: int, grid: np.ndarray) -> np.ndarray:
    """``count`` Brownian paths on ``grid`` (first point 0), by cumulative increments."""
    steps = gen.standard_normal((count, grid.size - 1)) * np.sqrt(np.diff(grid))
    paths = np.zeros((count, grid.size))
    paths[:, 1:] = np.cumsum(steps, axis=1)
    return paths


def brownian_bridge(gen, count: int, grid: np.ndarray) -> np.ndarray:
    b = brownian_motion(gen, count, grid)
    return b - grid[None, :] * b[:, -1:]


def _noise(spec, gen, count, grid):
    return (brownian_bridge if spec.noise == "bb" else brownian_motion)(gen, count, grid)


def far_kernel(kind: str, grid: np.ndarray) -> np.ndarray:
    s, t = np.meshgrid(grid, grid, indexing="ij")
    if kind == "gaussian":
        return FAR_GAUSSIAN_C * np.exp((s**2 + t**2) / 2)
    return FAR_WIENER_C * np.minimum(s, t)


def _functional(spec: DgpSpec, gen, grid: np.ndarray) -> np.ndarray:
    n, burn, fam = spec.n, spec.burn_in, spec.family
    if fam is Family.FUNC_BM:
        return brownian_motion(gen, n, grid)
    if fam is Family.FUNC_BB:
        return brownian_bridge(gen, n, grid)
    if fam is Family.FUNC_FNMA:
        e = _noise(spec, gen, n + 1, grid)
        return e[1:] * e[:-1]
    w = trapezoid_weights(grid)
    if fam is Family.FUNC_FAR:
        op = far_kernel(spec.kernel, grid) * w[None, :]
        e = _noise(spec, gen, n + burn, grid)
        y = np.zeros_like(e)
        prev = np.zeros(grid.size)
        for t in range(e.shape[0]):
            prev = op @ prev + e[t]
            y[t] = prev
        return y[burn:]
    # FARCH: Y_t(s) = e_t(s) sqrt(s + rho exp(s^2/2) int exp(u^2/2) Y_{t-1}(u)^2 du)
    e = brownian_motion(gen, n + burn, grid)
    outer = spec.rho * np.exp(grid**2 / 2)
    inner = w * np.exp(grid**2 / 2)
    y = np.zeros_like(e)
    prev = np.zeros(grid.size)
    for t in range(e.shape[0]):
        prev = e[t] * np.sqrt(grid + outer * np.dot(inner, prev**2))
        y[t] = prev
    return y[burn:]


# ---------------------------------------------------------------------------
# covariance matrices


def wishart_bartlett(gen, df: int, p: int) -> np.ndarray:
    """One draw from ``W_p(df, I)`` via the Bartlett decomposition."""
    a = np.tril(gen.standard_normal((p, p)), -1)
    a[np.diag_indices(p)] = np.sqrt(gen.chisquare(df - np.arange(p)))
    return a @ a.T


def _spd_ok(a: np.ndarray) -> bool:
    w = np.linalg.eigvalsh(a)
    return bool(w[0] > SPD_FLOOR * w[-1])


def _caw(spec: DgpSpec, gen) -> np.ndarray | None:
    p = spec.dim
    amat, bmat, cmat = 0.7 * np.eye(p), 0.5 * np.eye(p), np.eye(p)
    cc = cmat @ cmat.T
    sigma = cc.copy()
    prev = sigma.copy()
    out = np.empty((spec.n + spec.burn_in, p, p))
    for t in range(out.shape[0]):
        sigma = cc + spec.rho * amat @ prev @ amat.T + spec.rho * bmat @ sigma @ bmat.T
        sigma = 0.5 * (sigma + sigma.T)
        low = np.linalg.cholesky(sigma)
        y = low @ wishart_bartlett(gen, 10, p) @ low.T / 10.0
        prev = 0.5 * (y + y.T)
        out[t] = prev
    out = out[spec.burn_in:]
    return out if all(_spd_ok(a) for a in out) else None


def _caw_series(spec: DgpSpec, seed: int, max_attempts: int = 10) -> ObjectSeries:
    for attempt in range(max_attempts):
        gen = rng.keyed_generator(seed, rng.DATA, attempt) if attempt else \
            rng.keyed_generator(seed, rng.DATA)
        mats = _caw(spec, gen)
        if mats is not None:
            flags = (FLAG_REGENERATED,) if attempt else ()
            return ObjectSeries.spd(mats, flags=flags)
    raise RuntimeError(f"CAW produced non-SPD matrices in {max_attempts} attempts")


# ---------------------------------------------------------------------------
# distributions


@lru_cache(maxsize=1)
def spline_g() -> CubicSpline:
    """Natural cubic spline through (0,0), (0.33,0.2), (0.66,0.8), (1,1)."""
    x, y = zip(*SPLINE_KNOTS)
    return CubicSpline(x, y, bc_type="natural")


def _inverse_on_grid(values: np.ndarray, grid: np.ndarray, at: np.ndarray) -> np.ndarray:
    """Piecewise-linear inverse of the increasing map ``grid -> values``, clamped."""
    return np.interp(at, values, grid)


def _monotone(values: np.ndarray, what: str) -> np.ndarray:
    drop = np.min(np.diff(values))
    if drop < -1e-12:
        raise RuntimeError(f"{what} is not monotone (drop {drop:.3g})")
    return np.maximum.accumulate(values)


def atm_noise(xi: float, grid: np.ndarray):
    """The random transport map for one draw ``xi`` of U(-1, 1).

    Returns a function evaluating it at arbitrary points of [0, 1].
    """
    g = spline_g()
    h_vals = 0.5 * ((1 - xi) * g(grid) + (1 + xi) * grid)

    def noise(x):
        hinv = _inverse_on_grid(h_vals, grid, x)
        return 0.5 * ((1 + xi) * g(hinv) + (1 - xi) * hinv)

    return noise


def odot(beta: float, t_vals: np.ndarray, grid: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``(beta ⊙ T)(x)`` for a map given by its values on ``grid``."""
    if beta > 0:
        return x + beta * (np.interp(x, grid, t_vals) - x)
    if beta < 0:
        return x + beta * (x - _inverse_on_grid(t_vals, grid, x))
    return x.copy()


def _atm_series(spec: DgpSpec, gen) -> ObjectSeries:
    grid = np.linspace(0.0, 1.0, spec.grid_points)
    beta = spec.beta
    p = len(beta)
    burn = spec.burn_in if p else 0
    history = [grid.copy() for _ in range(p)]  # T_{t-1}, ..., T_{t-p}
    quantiles = np.empty((spec.n + burn, grid.size))
    for t in range(spec.n + burn):
        noise = atm_noise(gen.uniform(-1.0, 1.0), grid)
        x = grid.copy()
        # innermost map is beta_p ⊙ T_{t-p}; the noise map is applied last
        for j in reversed(range(p)):
            x = odot(beta[j], history[j], grid, x)
        q = _monotone(np.clip(noise(x), 0.0, 1.0), "ATM quantile function")
        quantiles[t] = q
        if p:
            history = [q] + history[:-1]
    quantiles = quantiles[burn:]
    cdf = np.stack([np.clip(_inverse_on_grid(q, grid, grid), 0.0, 1.0) for q in quantiles])
    return ObjectSeries.distributions(grid, quantile=quantiles, cdf=cdf)
