"""Serial independence tests for object-valued time series in metric spaces."""

import numba

# the bundled TBB is too old for numba; pick OpenMP explicitly
if numba.config.THREADING_LAYER == "default":
    numba.config.THREADING_LAYER = "omp"

from .adcv import (  # noqa: E402
    AdcvSequence,
    DistanceMatrix,
    adcv_all,
    adcv_at_lag,
    adcv_oracle,
    pairwise_distances,
    u_center,
)
from .dgp import DgpSpec, generate  # noqa: E402
from .objects import MetricKind, ObjectKind, ObjectSeries, distance  # noqa: E402
from .resampling import ResamplingConfig, TestResult, run_test  # noqa: E402
from .spectral import SpectralConfig, StatisticKind, cvm_statistic, ks_statistic  # noqa: E402

__all__ = [
    "AdcvSequence", "DistanceMatrix", "DgpSpec", "MetricKind", "ObjectKind",
    "ObjectSeries", "ResamplingConfig", "SpectralConfig", "StatisticKind",
    "TestResult", "adcv_all", "adcv_at_lag", "adcv_oracle", "cvm_statistic",
    "distance", "generate", "ks_statistic", "pairwise_distances", "run_test",
    "u_center",
]
__version__ = "0.1.0"
