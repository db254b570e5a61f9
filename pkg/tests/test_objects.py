import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from conftest import random_spd
from metricnoise.objects import (
    DENSITY_FLOOR,
    CurveObject,
    DistributionObject,
    MetricError,
    MetricKind,
    ObjectKind,
    ObjectSeries,
    SpdObject,
    VectorObject,
    check_metric,
    cholesky_lower,
    derive_density,
    distance,
    matrix_log,
    matrix_sqrt,
    pairwise_matrix,
    sym_eig,
    trapezoid_weights,
)

UNIFORM = np.linspace(0.0, 1.0, 101)
finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


# ---------------------------------------------------------------------------
# worked examples


def test_euclidean_345():
    assert distance(VectorObject([0, 0]), VectorObject([3, 4]), "euclidean") == 5.0


def test_l2_zero_vs_one():
    f = CurveObject(UNIFORM, np.zeros(101))
    g = CurveObject(UNIFORM, np.ones(101))
    assert distance(f, g, "l2") == pytest.approx(1.0, abs=1e-14)


def test_riemann_identity_vs_scaled_identity():
    d = distance(SpdObject(np.eye(2)), SpdObject(np.e * np.eye(2)), "riemann")
    assert d == pytest.approx(np.sqrt(2.0), rel=1e-12)


def test_cholesky_identity_vs_four_identity():
    d = distance(SpdObject(np.eye(2)), SpdObject(4 * np.eye(2)), "cholesky")
    assert d == pytest.approx(np.sqrt(2.0), rel=1e-14)


@pytest.mark.parametrize("metric", ["w1", "w2"])
@pytest.mark.parametrize("delta", [-0.3, 0.05, 0.25])
def test_wasserstein_shift(metric, delta):
    q = UNIFORM**2
    a = DistributionObject(UNIFORM, quantile=q)
    b = DistributionObject(UNIFORM, quantile=q + delta)
    assert distance(a, b, metric) == pytest.approx(abs(delta), rel=1e-12)


@pytest.mark.parametrize("metric", ["kl", "is", "ls"])
def test_divergences_vanish_on_identical_densities(metric):
    dens = 1.0 + 0.5 * np.sin(2 * np.pi * UNIFORM)
    a = DistributionObject(UNIFORM, density=dens)
    assert distance(a, a, metric) == 0.0


def test_sym_eig_diagonal():
    lam, v = sym_eig(np.diag([1.0, 3.0]))
    np.testing.assert_array_equal(lam, [3.0, 1.0])
    np.testing.assert_allclose(np.abs(v), [[0, 1], [1, 0]], atol=1e-15)


def test_sym_eig_identity():
    lam, _ = sym_eig(np.eye(4))
    np.testing.assert_allclose(lam, np.ones(4), rtol=1e-15)


def test_sym_eig_reconstruction(rng):
    for _ in range(20):
        x = rng.standard_normal((5, 5))
        a = x + x.T
        lam, v = sym_eig(a)
        assert np.all(np.diff(lam) <= 0)
        assert np.linalg.norm(v @ np.diag(lam) @ v.T - a) <= 1e-9 * np.linalg.norm(a)
        assert np.linalg.norm(v.T @ v - np.eye(5)) <= 1e-9


def test_sym_eig_rejects_asymmetric():
    with pytest.raises(ValueError):
        sym_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_matrix_function_examples():
    np.testing.assert_allclose(matrix_log(np.eye(3)), np.zeros((3, 3)), atol=1e-15)
    np.testing.assert_allclose(matrix_sqrt(4 * np.eye(2)), 2 * np.eye(2), rtol=1e-14)
    np.testing.assert_allclose(cholesky_lower(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))


def test_matrix_functions_against_scipy(rng):
    for p in (2, 3, 5):
        a = random_spd(rng, p)
        scale = np.linalg.norm(a)
        assert np.linalg.norm(scipy.linalg.expm(matrix_log(a)) - a) <= 1e-9 * scale
        s = matrix_sqrt(a)
        assert np.linalg.norm(s @ s - a) <= 1e-9 * scale
        lower = cholesky_lower(a)
        assert np.allclose(lower, np.tril(lower)) and np.all(np.diag(lower) > 0)
        assert np.linalg.norm(lower @ lower.T - a) <= 1e-9 * scale


def test_matrix_functions_reject_below_floor():
    bad = np.diag([1.0, 1e-12])
    for f in (matrix_log, matrix_sqrt, cholesky_lower):
        with pytest.raises(ValueError):
            f(bad)


def test_derive_density_linear_cdf():
    d = derive_density(DistributionObject(UNIFORM, cdf=UNIFORM.copy()))
    np.testing.assert_allclose(d.density, 1.0, rtol=1e-12)


def test_derive_density_flat_segment_is_clipped():
    cdf = np.clip(2 * UNIFORM - 0.5, 0, 1)
    d = derive_density(DistributionObject(UNIFORM, cdf=cdf))
    assert np.all(d.density[:20] == DENSITY_FLOOR)
    assert np.all(d.density[-20:] == DENSITY_FLOOR)


def test_derive_density_quadratic_cdf():
    for g in (101, 201, 401):
        grid = np.linspace(0, 1, g)
        d = derive_density(DistributionObject(grid, cdf=grid**2))
        err = np.max(np.abs(d.density - 2 * grid)[1:-1])
        # centered differences are exact on quadratics up to rounding
        assert err < 1e-9
        edge = np.max(np.abs(d.density - 2 * grid))
        assert edge <= 10 * (grid[1] - grid[0]) ** 2 + 1e-9


def test_derive_density_needs_cdf():
    with pytest.raises(ValueError):
        derive_density(DistributionObject(UNIFORM, quantile=UNIFORM.copy()))


# ---------------------------------------------------------------------------
# independent oracles


def _trapz(y, x):
    return float(np.sum((y[1:] + y[:-1]) * np.diff(x)) / 2)


def test_curve_l2_matches_trapezoid(rng):
    grid = np.sort(np.r_[0.0, rng.uniform(size=30), 1.0])
    f, g = rng.standard_normal((2, grid.size))
    want = np.sqrt(_trapz((f - g) ** 2, grid))
    got = distance(CurveObject(grid, f), CurveObject(grid, g), "l2")
    assert got == pytest.approx(want, rel=1e-12)


@pytest.mark.filterwarnings("ignore:logm result may be inaccurate")
def test_spd_metrics_against_scipy(rng):
    a, b = random_spd(rng, 3), random_spd(rng, 3)
    A, Bm = SpdObject(a), SpdObject(b)
    assert distance(A, Bm, "frobenius") == pytest.approx(np.linalg.norm(a - b), rel=1e-12)
    want = np.linalg.norm(scipy.linalg.logm(a) - scipy.linalg.logm(b))
    assert distance(A, Bm, "log_euclidean") == pytest.approx(want, rel=1e-8)
    want = np.linalg.norm(np.linalg.cholesky(a) - np.linalg.cholesky(b))
    assert distance(A, Bm, "cholesky") == pytest.approx(want, rel=1e-10)
    s = np.real(scipy.linalg.inv(scipy.linalg.sqrtm(a)))
    want = np.linalg.norm(np.real(scipy.linalg.logm(s @ b @ s)))
    assert distance(A, Bm, "riemann") == pytest.approx(want, rel=1e-8)


def test_distribution_metrics_against_direct_formulas():
    x = UNIFORM
    f = 1.0 + 0.5 * np.cos(np.pi * x)
    g = 1.0 + 0.3 * np.sin(2 * np.pi * x)
    a = DistributionObject(x, quantile=x**2, cdf=np.sqrt(x), density=f)
    b = DistributionObject(x, quantile=x**1.5, cdf=x**(2 / 3), density=g)
    assert distance(a, b, "w1") == pytest.approx(_trapz(np.abs(x**2 - x**1.5), x), rel=1e-12)
    assert distance(a, b, "w2") == pytest.approx(np.sqrt(_trapz((x**2 - x**1.5) ** 2, x)), rel=1e-12)
    assert distance(a, b, "ks") == np.max(np.abs(np.sqrt(x) - x ** (2 / 3)))
    kl = 0.5 * (_trapz(np.log(f / g) * f, x) + _trapz(np.log(g / f) * g, x))
    assert distance(a, b, "kl") == pytest.approx(kl, rel=1e-10)
    r = f / g
    is_ = (_trapz(r - np.log(r) - 1, x) + _trapz(1 / r + np.log(r) - 1, x)) / 2
    assert distance(a, b, "is") == pytest.approx(is_, rel=1e-8)
    ls = np.sqrt(_trapz((10 * np.log10(r)) ** 2, x))
    assert distance(a, b, "ls") == pytest.approx(ls, rel=1e-10)


def test_pairwise_matrix_matches_distance(rng):
    mats = np.stack([random_spd(rng, 3) for _ in range(6)])
    series = ObjectSeries.spd(mats)
    for metric in ("frobenius", "log_euclidean", "cholesky", "riemann"):
        d = pairwise_matrix(series, metric)
        assert np.array_equal(d, d.T) and np.all(np.diag(d) == 0)
        for i in range(6):
            for j in range(6):
                if i != j:
                    assert d[i, j] == distance(series[i], series[j], metric)


# ---------------------------------------------------------------------------
# errors


def test_grid_mismatch():
    a = CurveObject(UNIFORM, np.zeros(101))
    b = CurveObject(np.linspace(0, 1, 101) ** 1.01, np.zeros(101))
    with pytest.raises(MetricError):
        distance(a, b, "l2")


def test_incompatible_metric():
    with pytest.raises(ValueError):
        distance(VectorObject([1.0]), VectorObject([2.0]), "w1")
    with pytest.raises(ValueError):
        check_metric(ObjectKind.SPD, "l2")


def test_non_spd_rejected():
    with pytest.raises(ValueError):
        SpdObject(np.diag([1.0, -1.0]))
    with pytest.raises(ValueError):
        SpdObject(np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_zero_density_rejected():
    a = DistributionObject(UNIFORM, density=np.zeros(101))
    b = DistributionObject(UNIFORM, density=np.ones(101))
    with pytest.raises(MetricError):
        distance(a, b, "kl")


def test_invalid_distribution_inputs():
    with pytest.raises(ValueError):
        DistributionObject(UNIFORM)
    with pytest.raises(ValueError):
        DistributionObject(UNIFORM, quantile=UNIFORM[::-1].copy())
    with pytest.raises(ValueError):
        DistributionObject(UNIFORM, cdf=1.5 * UNIFORM)
    with pytest.raises(ValueError):
        CurveObject(UNIFORM[::-1].copy(), np.zeros(101))
    with pytest.raises(ValueError):
        VectorObject([np.nan])


def test_trapezoid_weights_integrate_linear_exactly():
    grid = np.array([0.0, 0.1, 0.5, 0.55, 1.0])
    w = trapezoid_weights(grid)
    assert w.sum() == pytest.approx(1.0)
    assert w @ grid == pytest.approx(0.5)


# ---------------------------------------------------------------------------
# properties

vectors = hnp.arrays(np.float64, 3, elements=finite)


@given(vectors, vectors, vectors)
def test_vector_metric_axioms(x, y, z):
    a, b, c = VectorObject(x), VectorObject(y), VectorObject(z)
    assert distance(a, b, "euclidean") == distance(b, a, "euclidean")
    assert distance(a, a, "euclidean") == 0.0
    assert distance(a, c, "euclidean") <= distance(a, b, "euclidean") + distance(b, c, "euclidean") + 1e-9


def _spd_from_seed(seed: int, p: int = 3) -> np.ndarray:
    return random_spd(np.random.default_rng(seed), p)


SPD_METRICS = ["frobenius", "log_euclidean", "cholesky", "riemann"]


@given(st.integers(0, 2**32 - 1), st.integers(0, 2**32 - 1), st.integers(0, 2**32 - 1))
def test_spd_metric_axioms(s1, s2, s3):
    a, b, c = (SpdObject(_spd_from_seed(s)) for s in (s1, s2, s3))
    for metric in SPD_METRICS:
        ab, ba = distance(a, b, metric), distance(b, a, metric)
        assert ab == ba
        self_d = distance(a, a, metric)
        if metric in ("frobenius", "cholesky"):
            assert self_d == 0.0
        else:
            assert self_d <= 1e-9
        assert distance(a, c, metric) <= ab + distance(b, c, metric) + 1e-9


@given(st.integers(0, 2**32 - 1))
def test_riemann_congruence_invariance(seed):
    gen = np.random.default_rng(seed)
    a, b = random_spd(gen, 3), random_spd(gen, 3)
    m = gen.standard_normal((3, 3)) + 3 * np.eye(3)
    before = distance(SpdObject(a), SpdObject(b), "riemann")
    ma = m @ a @ m.T
    mb = m @ b @ m.T
    after = distance(SpdObject(0.5 * (ma + ma.T)), SpdObject(0.5 * (mb + mb.T)), "riemann")
    assert after == pytest.approx(before, rel=1e-8, abs=1e-12)


def _distribution_from_seed(seed: int) -> DistributionObject:
    gen = np.random.default_rng(seed)
    inc = gen.uniform(0.05, 1.0, size=UNIFORM.size - 1)
    cdf = np.r_[0.0, np.cumsum(inc)]
    cdf /= cdf[-1]
    quantile = np.interp(UNIFORM, cdf, UNIFORM)
    return DistributionObject(UNIFORM, quantile=quantile, cdf=cdf)


@given(st.integers(0, 2**32 - 1), st.integers(0, 2**32 - 1), st.integers(0, 2**32 - 1))
def test_distribution_metric_axioms(s1, s2, s3):
    a, b, c = (_distribution_from_seed(s) for s in (s1, s2, s3))
    for metric in ("w1", "w2", "ks"):
        ab = distance(a, b, metric)
        assert ab == distance(b, a, metric)
        assert distance(a, a, metric) == 0.0
        assert distance(a, c, metric) <= ab + distance(b, c, metric) + 1e-9
    for metric in ("kl", "is", "ls"):
        assert distance(a, b, metric) == distance(b, a, metric)
        assert distance(a, a, metric) <= 1e-9


@given(hnp.arrays(np.float64, (4, 2, 7), elements=finite))
def test_curve_axioms(values):
    grid = np.linspace(0, 1, 7)
    series = ObjectSeries.curves(grid, values.reshape(8, 7))
    d = pairwise_matrix(series, "l2")
    assert np.array_equal(d, d.T)
    for i in range(8):
        for j in range(8):
            for k in range(8):
                assert d[i, k] <= d[i, j] + d[j, k] + 1e-9 * (1 + d[i, j] + d[j, k])


def test_series_take_and_iteration():
    series = ObjectSeries.vectors(np.arange(12.0).reshape(6, 2))
    assert len(series) == 6
    assert isinstance(series[2], VectorObject)
    sub = series.take([5, 0])
    np.testing.assert_array_equal(sub.values, [[10, 11], [0, 1]])
    assert [o.values[0] for o in series] == [0, 2, 4, 6, 8, 10]
    assert MetricKind("w1") is MetricKind.DIST_W1
