"""Calibration of the CvM and KS statistics by resampling.

Two schemes approximate the null distribution:

* the wild bootstrap keeps the U-centered product matrix ``P(k)`` of every
  lag fixed and recomputes ``w' P(k) w / ((n-k)(n-k-3))`` with a fresh,
  independent weight vector ``w`` for each lag and replicate;
* the permutation scheme reorders the series and recomputes every lag,
  U-centering included, from the reindexed distance matrix.

Both return the statistic on each replicate. The p-value uses the add-one
convention and the rejection rule compares against an order statistic chosen
so that ``reject`` holds exactly when ``p_value <= alpha``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from fractions import Fraction

import numpy as np

from . import rng
from .adcv import (
    MIN_SERIES_LENGTH,
    AdcvSequence,
    DistanceMatrix,
    _resolve_max_lag,
    adcv_all,
    adcv_permuted,
    lag_products,
    pairwise_distances,
)
from .objects import THEORY_UNVERIFIED, MetricKind, ObjectSeries, check_metric
from .spectral import SpectralConfig, StatisticKind, StatisticValue, statistic_values

FLAG_DEGENERATE = "degenerate_sample"
FLAG_THEORY_UNVERIFIED = "theory_unverified_metric"
FLAG_KS_EMPIRICAL = "ks_empirical_only"


class Method(str, Enum):
    BOOTSTRAP = "bootstrap"
    PERMUTATION = "permutation"


class WeightLaw(str, Enum):
    RADEMACHER = "rademacher"
    NORMAL = "normal"
    ONES = "ones"  # degenerate at +1; reproduces the observed statistic


@dataclass(frozen=True)
class ResamplingConfig:
    method: Method = Method.BOOTSTRAP
    B: int = 300
    weight_law: WeightLaw = WeightLaw.RADEMACHER
    alpha: float = 0.05
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        object.__setattr__(self, "weight_law", WeightLaw(self.weight_law))
        if int(self.B) < 1:
            raise ValueError("B must be at least 1")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True, eq=False)
class TestResult:
    statistic: StatisticValue
    draws: np.ndarray
    p_value: float
    reject: bool
    critical_value: float
    adcv: AdcvSequence
    flags: tuple[str, ...] = ()
    config: dict = field(default_factory=dict)

    __test__ = False  # not a pytest class


# ---------------------------------------------------------------------------
# decision rule


def p_value(observed: float, draws) -> float:
    """``(1 + #{draws >= observed}) / (B + 1)``."""
    draws = np.asarray(draws, dtype=float)
    if draws.size < 1:
        raise ValueError("need at least one draw")
    return (1 + int(np.count_nonzero(draws >= observed))) / (draws.size + 1)


def critical_value(draws, alpha: float) -> float:
    """The ``ceil((1 - alpha)(B + 1))``-th smallest draw, or ``inf`` if B is too small."""
    draws = np.sort(np.asarray(draws, dtype=float))
    b = draws.size
    r = (b + 1) - math.floor(Fraction(repr(float(alpha))) * (b + 1))
    return float(draws[r - 1]) if r <= b else math.inf


# ---------------------------------------------------------------------------
# resampled ADCV vectors


def bootstrap_weights(seed: int, k: int, B: int, m: int, law: WeightLaw) -> np.ndarray:
    """Weights for lag ``k``; row ``b`` is the vector used by replicate ``b``."""
    law = WeightLaw(law)
    if law is WeightLaw.ONES:
        return np.ones((B, m))
    gen = rng.keyed_generator(seed, rng.BOOTSTRAP, k)
    if law is WeightLaw.RADEMACHER:
        return 2.0 * gen.integers(0, 2, size=(B, m)).astype(float) - 1.0
    return gen.standard_normal((B, m))


def bootstrap_adcv_draws(D: DistanceMatrix, max_lag: int | None, cfg: ResamplingConfig) -> np.ndarray:
    """Wild-bootstrap ADCV vectors, shape ``(B, max_lag)``."""
    max_lag = _resolve_max_lag(D.n, max_lag)
    out = np.empty((cfg.B, max_lag))
    for k in range(1, max_lag + 1):
        m = D.n - k
        prod = lag_products(D, k)
        w = bootstrap_weights(cfg.seed, k, cfg.B, m, cfg.weight_law)
        out[:, k - 1] = np.sum((w @ prod) * w, axis=1) / (m * (m - 3))
    return out


def permutations_for(seed: int, B: int, n: int) -> np.ndarray:
    return np.stack(
        [rng.keyed_generator(seed, rng.PERMUTATION, b).permutation(n) for b in range(B)]
    )


def permutation_adcv_draws(
    D: DistanceMatrix, max_lag: int | None, cfg: ResamplingConfig, perms=None
) -> np.ndarray:
    """ADCV vectors of randomly reordered series, shape ``(B, max_lag)``.

    ``perms`` overrides the seeded permutations (one row per replicate).
    """
    if perms is None:
        perms = permutations_for(cfg.seed, cfg.B, D.n)
    return adcv_permuted(D, perms, max_lag)


def resampled_adcv(D: DistanceMatrix, max_lag: int | None, cfg: ResamplingConfig) -> np.ndarray:
    if cfg.method is Method.BOOTSTRAP:
        return bootstrap_adcv_draws(D, max_lag, cfg)
    return permutation_adcv_draws(D, max_lag, cfg)


def wild_bootstrap_draws(D, max_lag, kind, cfg: ResamplingConfig,
                         spectral: SpectralConfig = SpectralConfig()) -> np.ndarray:
    v = bootstrap_adcv_draws(D, max_lag, cfg)
    return statistic_values(kind, v, D.n, spectral)


def permutation_draws(D, max_lag, kind, cfg: ResamplingConfig,
                      spectral: SpectralConfig = SpectralConfig(), perms=None) -> np.ndarray:
    v = permutation_adcv_draws(D, max_lag, cfg, perms)
    return statistic_values(kind, v, D.n, spectral)


# ---------------------------------------------------------------------------
# full test


def _config_echo(cfg, spectral, kind, metric=None) -> dict:
    echo = {k: (v.value if isinstance(v, Enum) else v) for k, v in asdict(cfg).items()}
    echo["statistic"] = StatisticKind(kind).value
    echo["ks_grid_size"] = spectral.ks_grid_size
    echo["max_lag"] = spectral.max_lag
    if metric is not None:
        echo["metric"] = MetricKind(metric).value
    return echo


def evaluate_distances(
    D: DistanceMatrix,
    kinds,
    cfg: ResamplingConfig,
    spectral: SpectralConfig = SpectralConfig(),
    flags=(),
    metric=None,
) -> list[TestResult]:
    """Run the test for each statistic in ``kinds`` on one set of draws.

    The observed ADCV vector and the resampled ADCV vectors are computed once
    and shared by all statistics, so CvM and KS see the same replicates.
    """
    kinds = [StatisticKind(k) for k in kinds]
    observed = adcv_all(D, spectral.max_lag)
    flags = list(flags)
    if D.degenerate:
        flags.append(FLAG_DEGENERATE)
    resampled = resampled_adcv(D, observed.max_lag, cfg)
    results = []
    for kind in kinds:
        kflags = flags + ([FLAG_KS_EMPIRICAL] if kind is StatisticKind.KS else [])
        stat = float(statistic_values(kind, observed.v[None, :], D.n, spectral)[0])
        draws = statistic_values(kind, resampled, D.n, spectral)
        draws.flags.writeable = False
        crit = critical_value(draws, cfg.alpha)
        results.append(TestResult(
            statistic=StatisticValue(kind, stat),
            draws=draws,
            p_value=p_value(stat, draws),
            reject=bool(stat > crit),
            critical_value=crit,
            adcv=observed,
            flags=tuple(dict.fromkeys(kflags)),
            config=_config_echo(cfg, spectral, kind, metric),
        ))
    return results




def run_test(
    series: ObjectSeries,
    metric,
    kind,
    cfg: ResamplingConfig = ResamplingConfig(),
    spectral: SpectralConfig = SpectralConfig(),
) -> TestResult:
    """Test serial independence of ``series`` under ``metric``."""
    if len(series) < MIN_SERIES_LENGTH:
        raise ValueError(f"need at least {MIN_SERIES_LENGTH} observations, got {len(series)}")
    metric = check_metric(series.kind, metric)
    D = pairwise_distances(series, metric)
    flags = list(series.flags)
    if metric in THEORY_UNVERIFIED:
        flags.append(FLAG_THEORY_UNVERIFIED)
    return evaluate_distances(D, [kind], cfg, spectral, flags, metric)[0]
