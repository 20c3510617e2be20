import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maxgap.geometry import CUBE, PointCloud, ReferenceShape, max_spacing_1d_exact
from maxgap.sampling import sample_uniform
from maxgap.stats import (
    TestConfig,
    critical_value,
    gumbel_cdf,
    gumbel_quantile,
    ks_distance,
    nn_critical_value,
    nn_standardize,
    nn_test,
    run_test,
    standardize,
)


def test_gumbel_cdf_values():
    assert gumbel_cdf(0.0) == pytest.approx(math.exp(-1.0), abs=1e-15)
    assert gumbel_cdf(50.0) == pytest.approx(1.0)
    assert gumbel_cdf(-math.log(-math.log(0.95))) == pytest.approx(0.95, abs=1e-14)


def test_gumbel_quantile_values():
    assert gumbel_quantile(0.95) == pytest.approx(2.97020, abs=5e-6)
    assert gumbel_quantile(math.exp(-1.0)) == pytest.approx(0.0, abs=1e-14)
    assert gumbel_quantile(0.5) == pytest.approx(0.36651, abs=5e-6)


@pytest.mark.parametrize("q", [0.0, 1.0, -0.1, 1.5])
def test_gumbel_quantile_rejects_out_of_range(q):
    with pytest.raises(ValueError):
        gumbel_quantile(q)


@given(st.floats(1e-9, 1 - 1e-9))
def test_quantile_roundtrip(q):
    assert float(gumbel_cdf(gumbel_quantile(q))) == pytest.approx(q, rel=1e-9, abs=1e-12)


def test_critical_value_examples():
    assert critical_value(100, 2, 0.05) == pytest.approx(0.0910255, abs=5e-8)
    assert critical_value(100, 1, 0.05) == pytest.approx(0.0757537, abs=5e-8)
    assert critical_value(100, 2, 0.05) > critical_value(100, 1, 0.05)
    g = -math.log(-math.log(0.95))
    for n in (1000, 2000):
        ref = (g + math.log(n) + math.log(math.log(n))) / n
        assert critical_value(n, 2, 0.05) == pytest.approx(ref, rel=1e-14)


def test_critical_value_validation():
    with pytest.raises(ValueError):
        critical_value(2, 1, 0.05)
    with pytest.raises(ValueError):
        critical_value(100, 1, 0.0)
    with pytest.raises(ValueError):
        critical_value(100, 1, 1.0)


def test_standardize_examples():
    assert standardize(0.0, 100, 2) == pytest.approx(-6.13235, abs=5e-6)
    n = 500
    assert standardize(math.log(n) / n, n, 1) == pytest.approx(0.0, abs=1e-12)


@given(
    st.integers(3, 10**7),
    st.integers(1, 6),
    st.floats(1e-6, 1 - 1e-6),
    st.floats(-3, 3),
)
def test_standardize_inverts_critical_value(n, d, alpha, beta):
    c = critical_value(n, d, alpha, beta)
    assert abs(standardize(c, n, d, beta) - gumbel_quantile(1 - alpha)) < 1e-12 * max(1.0, n * c)


def test_nn_thresholds():
    n = 1000
    c = nn_critical_value(n, 0.05)
    assert nn_standardize(c, n) == pytest.approx(gumbel_quantile(0.95), abs=1e-12)


def test_ks_distance_matches_scipy():
    from scipy import stats as ss

    x = np.random.default_rng(0).gumbel(size=300)
    ref = ss.kstest(x, ss.gumbel_r.cdf).statistic
    assert ks_distance(x) == pytest.approx(ref, abs=1e-12)
    with pytest.raises(ValueError):
        ks_distance([])


def test_run_test_planted_hole_rejects():
    rng = np.random.default_rng(1)
    pts = rng.random((6000, 2))
    # empty corner square of area 0.5
    side = math.sqrt(0.5)
    pts = pts[pts.max(axis=1) >= side][:1000]
    assert len(pts) == 1000
    res = run_test(PointCloud(pts), TestConfig(alpha=0.05))
    assert res.statistic >= 0.5 - 1e-6
    assert res.critical_value == pytest.approx(critical_value(1000, 2, 0.05))
    assert res.reject
    assert res.p_value < 0.05


def test_run_test_uniform_fields():
    cloud = sample_uniform(500, 2, seed=3)
    res = run_test(cloud)
    assert res.n == 500 and res.d == 2
    assert res.standardized == pytest.approx(standardize(res.statistic, 500, 2))
    assert 0 <= res.certificate_gap <= 1e-3
    assert res.reject == (res.statistic > res.critical_value)
    assert (res.p_value < 0.05) == res.reject


def test_run_test_boundary_is_strict(monkeypatch):
    import maxgap.stats as stats_mod

    pts = np.array([[0.2], [0.5], [0.9]])
    v = run_test(PointCloud(pts)).statistic
    monkeypatch.setattr(stats_mod, "critical_value", lambda *a, **k: v)
    res = run_test(PointCloud(pts))
    assert res.statistic == res.critical_value
    assert not res.reject
    assert res.p_value >= 0.05


def test_nn_boundary_is_strict(monkeypatch):
    import maxgap.stats as stats_mod

    cloud = sample_uniform(50, 2, seed=0)
    v = nn_test(cloud).statistic
    monkeypatch.setattr(stats_mod, "nn_critical_value", lambda *a, **k: v)
    assert not nn_test(cloud).reject


def test_p_value_consistent_with_decision():
    for seed in range(20):
        cloud = sample_uniform(200, 1, seed)
        for alpha in (0.01, 0.05, 0.5):
            res = run_test(cloud, TestConfig(alpha=alpha))
            assert (res.p_value < alpha) == res.reject
            assert 0.0 <= res.p_value <= 1.0


def test_run_test_auto_matches_bnb_1d():
    cloud = sample_uniform(300, 1, seed=5)
    a = run_test(cloud, TestConfig(method="auto"))
    b = run_test(cloud, TestConfig(method="bnb", tol=1e-9))
    assert a.statistic == pytest.approx(max_spacing_1d_exact(cloud).volume)
    assert abs(a.statistic - b.statistic) < 2e-9


def test_run_test_ball_shape():
    cloud = sample_uniform(300, 2, seed=6)
    res = run_test(cloud, TestConfig(shape=ReferenceShape.ball(0.3)))
    assert res.critical_value == pytest.approx(critical_value(300, 2, 0.05, 0.3))


def test_run_test_needs_three_points():
    with pytest.raises(ValueError):
        run_test(PointCloud(np.array([[0.1], [0.2]])))


def test_config_validation():
    with pytest.raises(ValueError):
        TestConfig(alpha=0.0)
    with pytest.raises(ValueError):
        TestConfig(tol=-1.0)
    with pytest.raises(ValueError):
        TestConfig(method="grid")
    assert TestConfig().shape == CUBE


def test_nn_test_isolated_point_rejects():
    rng = np.random.default_rng(2)
    pts = rng.random((3000, 2))
    d = np.abs(pts - 0.5).max(axis=1)
    pts = pts[d > 0.3][:999]
    pts = np.vstack([pts, [0.5, 0.5]])
    res = nn_test(PointCloud(pts), 0.05)
    assert res.reject
    assert res.p_value < 0.05


def test_nn_test_uniform_mostly_accepts():
    rejects = sum(nn_test(sample_uniform(500, 2, s)).reject for s in range(40))
    assert rejects <= 10


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_borderline_only_near_threshold(seed):
    cloud = sample_uniform(50, 2, seed)
    res = run_test(cloud, TestConfig(tol=1e-3))
    if res.borderline:
        slack = 50 * ((math.sqrt(res.statistic) + res.certificate_gap) ** 2 - res.statistic)
        assert abs(res.standardized - gumbel_quantile(0.95)) < slack
