"""End-to-end acceptance checks at full desk scale.

Each test records one PASS/FAIL line, printed in the terminal summary.
"""

import dataclasses
import itertools
import json
import math
import time

import numpy as np
import pytest
from scipy import integrate

from maxgap.experiments import (
    CampaignConfig,
    as_path,
    compute_C,
    mc_contiguous,
    mc_coupling,
    mc_level,
    mc_limit_law,
    mc_power,
    mc_random_size,
    power_curve,
    to_jsonable,
)
from maxgap.geometry import PointCloud, max_spacing, max_spacing_1d_exact, nn_statistic
from maxgap.sampling import CappedBall, CosineField, HoleBall
from maxgap.stats import critical_value, gumbel_quantile, standardize

from oracles import brute_nn_capped, grid_refine_max

pytestmark = pytest.mark.slow


def test_oracle_equivalence_1d(record):
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(0, 51))
        cloud = PointCloud(rng.random((n, 1)), dim=1)
        bnb = max_spacing(cloud, tol=1e-6).scale
        exact = max_spacing_1d_exact(cloud).scale
        worst = max(worst, abs(bnb - exact))
    elapsed = time.perf_counter() - t0
    ok = worst <= 2e-6 and elapsed < 60
    assert record("1. 1D oracle equivalence", ok, f"max |diff| {worst:.2e}, {elapsed:.1f}s")


def test_oracle_equivalence_2d(record):
    rng = np.random.default_rng(202)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(0, 31))
        pts = rng.random((n, 2))
        bnb = max_spacing(PointCloud(pts, dim=2), tol=1e-4).scale
        ref = grid_refine_max(pts, "cube")
        worst = max(worst, abs(bnb - ref))
    elapsed = time.perf_counter() - t0
    ok = worst <= 5e-4 and elapsed < 300
    assert record("2. 2D oracle equivalence", ok, f"max |diff| {worst:.2e}, {elapsed:.1f}s")


def test_standardization_identity(record):
    worst = 0.0
    grid = itertools.product([3, 10, 100, 2000, 10**5, 10**7], [1, 2, 3, 5], [0.001, 0.01, 0.05, 0.1, 0.5])
    for n, d, alpha in grid:
        for beta in (0.0, -0.7, 1.3):
            c = critical_value(n, d, alpha, beta)
            worst = max(worst, abs(standardize(c, n, d, beta) - gumbel_quantile(1 - alpha)))
    g = gumbel_quantile(0.95)
    ok = worst <= 1e-12 and abs(g - 2.97020) < 5e-6
    assert record("3. standardization identity", ok, f"max |diff| {worst:.1e}, g_0.95 = {g:.6f}")


def test_limit_law(record):
    t0 = time.perf_counter()
    rep = mc_limit_law(CampaignConfig(n=50000, d=1, reps=1000, base_seed=400))
    p0 = rep.extra["p_le_0"]
    ok = rep.ks_distance <= 0.08 and abs(p0 - math.exp(-1)) <= 0.08
    detail = f"KS {rep.ks_distance:.4f}, P(T<=0) {p0:.3f}, {time.perf_counter() - t0:.1f}s"
    assert record("4. limit law (d=1, n=50000)", ok, detail)


def test_level(record):
    rep = mc_level(CampaignConfig(n=2000, d=2, reps=500, alpha=0.05, base_seed=500))
    ok = 0.02 <= rep.rejection_rate <= 0.10
    detail = f"rate {rep.rejection_rate:.3f} +/- {rep.rejection_se:.3f}"
    assert record("5. level (d=2, n=2000)", ok, detail)


def test_consistency(record):
    cfg = CampaignConfig(n=2000, d=2, reps=200, alpha=0.05, spec=HoleBall.with_volume(0.1, 2), base_seed=600)
    rep = mc_power(cfg)
    curve = power_curve(cfg, [500, 2000, 8000])
    monotone = all(
        b["rate"] >= a["rate"] - 2 * math.hypot(a["se"], b["se"]) for a, b in zip(curve, curve[1:])
    )
    ok = rep.rejection_rate >= 0.99 and monotone
    rates = ", ".join(f"{r['n']}: {r['rate']:.3f}" for r in curve)
    assert record("6. consistency (HoleBall 0.1)", ok, f"rate {rep.rejection_rate:.3f}; curve {rates}")


def test_almost_sure_ratio(record):
    grid = [10**4, 2 * 10**4, 5 * 10**4, 10**5]
    path = as_path(grid, d=2, seed=700)
    d = 2
    ratio = path[-1].ratio
    in_band = all(d - 3 <= p.loglog_ratio <= d + 3 for p in path)
    ok = 1.0 <= ratio <= 1.8 and in_band
    lls = ", ".join(f"{p.loglog_ratio:.2f}" for p in path)
    assert record("7. a.s. ratio path (d=2)", ok, f"ratio at 1e5 {ratio:.3f}; loglog ratios {lls}")


def test_coupling(record):
    spec = CappedBall.with_volume(0.1, 2, level=0.4)
    rep = mc_coupling(1000, 0.5, spec, reps=2000, seed=800)
    mean_ok = abs(rep.L_mean - 50.0) <= 4 * rep.L_mean_se
    var_ok = abs(rep.L_var - 72.5) <= 4 * rep.L_var_se
    chi_ok = rep.chi2_pvalue is not None and rep.chi2_pvalue >= 0.01
    viol = rep.subsample_violations + rep.tilde_violations
    theory_ok = abs(rep.L_mean_theory - 50.0) < 1e-9 and abs(rep.L_var_theory - 72.5) < 1e-9
    ok = viol == 0 and mean_ok and var_ok and chi_ok and theory_ok
    detail = (
        f"violations {viol}; E(L) {rep.L_mean:.2f} +/- {rep.L_mean_se:.2f}; "
        f"Var(L) {rep.L_var:.1f} +/- {rep.L_var_se:.1f}; chi2 p {rep.chi2_pvalue:.3f}"
    )
    assert record("8. coupling", ok, detail)


def test_random_sample_size(record):
    n = 2 * 10**4
    base = mc_random_size(n, k_fraction=0.5, perturbation_scale=0.0, reps=1000, d=1, seed=900)
    pert = mc_random_size(n, k_fraction=0.5, perturbation_scale=1.0, reps=1000, d=1, seed=900)
    gap = abs(pert.ks_distance - base.ks_distance)
    ok = gap <= 0.05
    detail = f"KS perturbed {pert.ks_distance:.4f} vs unperturbed {base.ks_distance:.4f}"
    assert record("9. random sample size", ok, detail)


def test_contiguity(record):
    h = CosineField()
    c = compute_C(h, 1)
    quad = integrate.quad(lambda x: math.exp(-math.cos(2 * math.pi * x)), 0.0, 1.0, epsabs=1e-13, limit=400)[0]
    c_ok = abs(c - math.log(quad)) <= 1e-4
    rep = mc_contiguous(h, 10**4, 1, reps=2000, seed=1000, spacing=False)
    ok = c_ok and rep.nn_shift_median > 0
    detail = f"C {c:.7f} vs quadrature {math.log(quad):.7f}; median shift {rep.nn_shift_median:.3f}"
    assert record("10. contiguity shift", ok, detail)


def test_nn_grid_matches_brute(record):
    rng = np.random.default_rng(1100)
    mismatches = 0
    for i in range(100):
        d = 1 + i % 3
        n = int(rng.integers(2, 201))
        pts = rng.random((n, d))
        cloud = PointCloud(pts)
        grid = nn_statistic(cloud, method="grid").m
        brute = nn_statistic(cloud, method="brute").m
        mismatches += grid != brute
        mismatches += not math.isclose(grid, brute_nn_capped(pts), rel_tol=0, abs_tol=1e-15)
    assert record("11. NN grid vs brute force", mismatches == 0, f"{mismatches} mismatches over 100 clouds")


def _body(fn, workers):
    return json.dumps(to_jsonable(fn(workers)), sort_keys=True, allow_nan=False)


def test_determinism(record):
    cfg = CampaignConfig(n=500, d=2, reps=12, base_seed=1200)
    spec = CappedBall.with_volume(0.1, 2, level=0.4)
    campaigns = {
        "level": lambda w: mc_level(cfg, w),
        "power": lambda w: mc_power(dataclasses.replace(cfg, spec=HoleBall.with_volume(0.1, 2)), w),
        "limit-law": lambda w: mc_limit_law(CampaignConfig(n=500, d=1, reps=12, base_seed=1200), nn=True, workers=w),
        "coupling": lambda w: mc_coupling(400, 0.5, spec, reps=6, seed=1200, workers=w),
        "random-size": lambda w: mc_random_size(2000, reps=12, seed=1200, workers=w),
        "contiguous": lambda w: mc_contiguous(CosineField(), 500, 1, reps=12, seed=1200, workers=w),
    }
    differing = [name for name, fn in campaigns.items() if len({_body(fn, w) for w in (1, 2, 3)}) != 1]
    ok = not differing
    assert record("12. determinism across worker counts", ok, f"differing: {differing or 'none'}")
