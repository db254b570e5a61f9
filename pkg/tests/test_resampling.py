import numba
import numpy as np
import pytest
import scipy.stats
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from metricnoise.adcv import DistanceMatrix, adcv_all, lag_products, pairwise_distances
from metricnoise.dgp import DgpSpec, generate
from metricnoise.objects import ObjectSeries
from metricnoise.resampling import (
    FLAG_DEGENERATE,
    FLAG_KS_EMPIRICAL,
    FLAG_THEORY_UNVERIFIED,
    Method,
    ResamplingConfig,
    WeightLaw,
    bootstrap_adcv_draws,
    critical_value,
    evaluate_distances,
    p_value,
    permutation_draws,
    run_test,
    wild_bootstrap_draws,
)
from metricnoise.spectral import SpectralConfig, StatisticKind, cvm_values, statistic_values


def scalar_D(x) -> DistanceMatrix:
    x = np.asarray(x, dtype=float)
    return DistanceMatrix(np.abs(x[:, None] - x[None, :]))


@pytest.fixture
def iid_D():
    return scalar_D(np.random.default_rng(3).standard_normal(40))


# ---------------------------------------------------------------------------
# decision rule


def test_p_value_examples():
    assert p_value(10.0, np.arange(9.0)) == 1 / 10
    assert p_value(-1.0, np.arange(9.0)) == 1.0
    assert p_value(2.0, np.full(9, 2.0)) == 1.0


def test_critical_value_too_few_draws():
    # with B = 9 and alpha = 0.05 no order statistic is extreme enough
    assert critical_value(np.arange(9.0), 0.05) == np.inf
    assert critical_value(np.arange(19.0), 0.05) == 18.0
    assert critical_value(np.arange(99.0), 0.05) == 94.0


@given(
    hnp.arrays(np.float64, st.integers(1, 300), elements=st.floats(0, 10, allow_nan=False)),
    st.floats(0, 10, allow_nan=False),
    st.sampled_from([0.01, 0.05, 0.1, 0.2, 0.5]),
)
def test_reject_iff_p_le_alpha(draws, observed, alpha):
    p = p_value(observed, draws)
    assert 1 / (draws.size + 1) <= p <= 1
    assert (observed > critical_value(draws, alpha)) == (p <= alpha)


def test_config_validation():
    with pytest.raises(ValueError):
        ResamplingConfig(B=0)
    with pytest.raises(ValueError):
        ResamplingConfig(alpha=1.0)
    with pytest.raises(ValueError):
        ResamplingConfig(seed=-1)
    with pytest.raises(ValueError):
        ResamplingConfig(method="jackknife")


# ---------------------------------------------------------------------------
# wild bootstrap


def test_ones_weights_reproduce_observed(iid_D):
    cfg = ResamplingConfig(Method.BOOTSTRAP, B=3, weight_law=WeightLaw.ONES)
    draws = bootstrap_adcv_draws(iid_D, None, cfg)
    observed = adcv_all(iid_D).v
    for row in draws:
        np.testing.assert_allclose(row, observed, rtol=1e-12, atol=1e-15)
    stat = cvm_values(observed, iid_D.n)
    np.testing.assert_allclose(wild_bootstrap_draws(iid_D, None, "cvm", cfg), stat, rtol=1e-11)


def test_bootstrap_mean_is_zero(iid_D):
    cfg = ResamplingConfig(Method.BOOTSTRAP, B=10000, seed=11)
    draws = bootstrap_adcv_draws(iid_D, 5, cfg)
    mean = draws.mean(axis=0)
    sd = draws.std(axis=0, ddof=1)
    assert np.all(np.abs(mean) <= 4 * sd / np.sqrt(10000))


def test_bootstrap_lags_uncorrelated(iid_D):
    cfg = ResamplingConfig(Method.BOOTSTRAP, B=10000, seed=5)
    draws = bootstrap_adcv_draws(iid_D, 4, cfg)
    corr = np.corrcoef(draws.T)
    off = corr[~np.eye(4, dtype=bool)]
    # a shared weight stream would make adjacent lags strongly correlated
    assert np.all(np.abs(off) < 4 / np.sqrt(10000))


def test_bootstrap_normal_weights_variance(iid_D):
    cfg = ResamplingConfig(Method.BOOTSTRAP, B=10000, weight_law="normal", seed=2)
    draws = bootstrap_adcv_draws(iid_D, 3, cfg)
    for k in range(1, 4):
        m = iid_D.n - k
        prod = lag_products(iid_D, k)
        # Gaussian weights add the fourth-moment term only on the (zero) diagonal
        want = 2 * np.sum(prod**2) / (m * (m - 3)) ** 2
        assert draws[:, k - 1].var(ddof=1) == pytest.approx(want, rel=0.1)


def test_bootstrap_deterministic(iid_D):
    cfg = ResamplingConfig(Method.BOOTSTRAP, B=50, seed=99)
    a = wild_bootstrap_draws(iid_D, None, "ks", cfg)
    b = wild_bootstrap_draws(iid_D, None, "ks", cfg)
    np.testing.assert_array_equal(a, b)
    c = wild_bootstrap_draws(iid_D, None, "ks", ResamplingConfig(Method.BOOTSTRAP, B=50, seed=98))
    assert not np.array_equal(a, c)


def test_bootstrap_prefix_stable(iid_D):
    short = bootstrap_adcv_draws(iid_D, None, ResamplingConfig(B=20, seed=4))
    long = bootstrap_adcv_draws(iid_D, None, ResamplingConfig(B=40, seed=4))
    np.testing.assert_array_equal(short, long[:20])


# ---------------------------------------------------------------------------
# permutation


def test_identity_permutation_reproduces_observed(iid_D):
    cfg = ResamplingConfig(Method.PERMUTATION, B=1)
    ident = np.arange(iid_D.n)[None, :]
    spectral = SpectralConfig(256)
    observed = adcv_all(iid_D).v[None, :]
    for kind in ("cvm", "ks"):
        draw = permutation_draws(iid_D, None, kind, cfg, spectral, perms=ident)
        assert draw[0] == statistic_values(kind, observed, iid_D.n, spectral)[0]


def test_permutation_of_constant_series_is_zero():
    D = scalar_D(np.zeros(15))
    draws = permutation_draws(D, None, "cvm", ResamplingConfig(Method.PERMUTATION, B=20))
    np.testing.assert_array_equal(draws, 0.0)


def test_permutation_law_invariant_to_pre_permutation():
    x = np.random.default_rng(8).standard_normal(30)
    D = scalar_D(x)
    Dp = D.permuted(np.random.default_rng(9).permutation(30))
    cfg1 = ResamplingConfig(Method.PERMUTATION, B=2000, seed=1)
    cfg2 = ResamplingConfig(Method.PERMUTATION, B=2000, seed=2)
    a = permutation_draws(D, None, "cvm", cfg1)
    b = permutation_draws(Dp, None, "cvm", cfg2)
    assert scipy.stats.ks_2samp(a, b).pvalue > 0.001


def test_permutation_independent_of_thread_count(iid_D):
    cfg = ResamplingConfig(Method.PERMUTATION, B=64, seed=3)
    before = numba.get_num_threads()
    try:
        numba.set_num_threads(1)
        one = permutation_draws(iid_D, None, "cvm", cfg)
        numba.set_num_threads(numba.config.NUMBA_NUM_THREADS)
        many = permutation_draws(iid_D, None, "cvm", cfg)
    finally:
        numba.set_num_threads(before)
    np.testing.assert_array_equal(one, many)


# ---------------------------------------------------------------------------
# full test


def test_constant_series_result():
    series = ObjectSeries.vectors(np.full((20, 1), 3.0))
    for method in Method:
        res = run_test(series, "euclidean", "cvm", ResamplingConfig(method, B=50))
        assert res.statistic.value == 0.0
        assert res.p_value == 1.0
        assert not res.reject
        assert FLAG_DEGENERATE in res.flags


def test_result_fields_and_flags():
    x = np.random.default_rng(0).standard_normal((30, 2))
    res = run_test(ObjectSeries.vectors(x), "euclidean", "ks", ResamplingConfig(B=19, seed=1))
    assert res.draws.shape == (19,)
    assert res.adcv.max_lag == 26
    assert FLAG_KS_EMPIRICAL in res.flags
    assert res.config["statistic"] == "ks" and res.config["B"] == 19
    assert res.reject == (res.statistic.value > res.critical_value)


def test_theory_unverified_flag():
    series = generate(DgpSpec("atm", n=20, order=0), 1)
    grid = series.grid
    dist = ObjectSeries.distributions(grid, cdf=series.cdf)
    res = run_test(dist, "kl", "cvm", ResamplingConfig(B=9))
    assert FLAG_THEORY_UNVERIFIED in res.flags


def test_short_series_rejected():
    with pytest.raises(ValueError):
        run_test(ObjectSeries.vectors(np.zeros((7, 1))), "euclidean", "cvm")


def test_shared_draws_between_statistics(iid_D):
    cfg = ResamplingConfig(Method.PERMUTATION, B=30, seed=6)
    both = evaluate_distances(iid_D, ["cvm", "ks"], cfg)
    alone = evaluate_distances(iid_D, ["ks"], cfg)
    np.testing.assert_array_equal(both[1].draws, alone[0].draws)
    assert both[0].statistic.kind is StatisticKind.CVM


def test_strong_dependence_is_detected():
    x = generate(DgpSpec("univ_nma2", n=200), 4)
    for method in Method:
        res = run_test(x, "euclidean", "cvm", ResamplingConfig(method, B=199, seed=4))
        assert res.p_value <= 0.01


def test_null_p_values_roughly_uniform():
    pvals = []
    for m in range(500):
        x = np.random.default_rng(1000 + m).standard_normal(40)
        res = evaluate_distances(scalar_D(x), ["cvm"], ResamplingConfig(B=99, seed=m))[0]
        pvals.append(res.p_value)
    stat = scipy.stats.kstest(pvals, "uniform").statistic
    # asymptotic 1% critical value of the one-sample Kolmogorov statistic
    assert stat < 1.63 / np.sqrt(500)
