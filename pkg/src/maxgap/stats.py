"""Gumbel limit law, critical values and the two uniformity tests."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from maxgap.geometry import (
    CUBE,
    PointCloud,
    ReferenceShape,
    max_spacing,
    max_spacing_1d_exact,
    nn_statistic,
)

__all__ = [
    "gumbel_cdf",
    "gumbel_quantile",
    "critical_value",
    "standardize",
    "nn_critical_value",
    "nn_standardize",
    "ks_distance",
    "TestConfig",
    "TestResult",
    "run_test",
    "nn_test",
]


def gumbel_cdf(t):
    """Standard Gumbel distribution function ``exp(-exp(-t))``."""
    return np.exp(-np.exp(-np.asarray(t, dtype=float)))


def gumbel_quantile(q: float) -> float:
    """Inverse of :func:`gumbel_cdf`."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie in (0, 1), got {q!r}")
    return -math.log(-math.log(q))


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")


def _check_n(n: int) -> None:
    # log log n must be positive
    if n < 3:
        raise ValueError(f"need n >= 3 for the spacing test, got {n}")


def critical_value(n: int, d: int, alpha: float, beta: float = 0.0) -> float:
    """Asymptotic level-``alpha`` threshold for the maximal-spacing volume."""
    _check_n(n)
    _check_alpha(alpha)
    g = gumbel_quantile(1.0 - alpha)
    return (g + math.log(n) + (d - 1) * math.log(math.log(n)) + beta) / n


def standardize(v: float, n: int, d: int, beta: float = 0.0) -> float:
    """Centered statistic ``n v - log n - (d - 1) log log n - beta``."""
    _check_n(n)
    return n * v - math.log(n) - (d - 1) * math.log(math.log(n)) - beta


def nn_critical_value(n: int, alpha: float) -> float:
    if n < 2:
        raise ValueError(f"need n >= 2 for the nearest-neighbour test, got {n}")
    _check_alpha(alpha)
    return (gumbel_quantile(1.0 - alpha) + math.log(n)) / n


def nn_standardize(v: float, n: int) -> float:
    return n * v - math.log(n)


def ks_distance(samples) -> float:
    """Kolmogorov-Smirnov distance between the sample's ECDF and the Gumbel CDF."""
    x = np.sort(np.asarray(samples, dtype=float))
    m = x.size
    if m == 0:
        raise ValueError("no samples")
    f = gumbel_cdf(x)
    i = np.arange(1, m + 1)
    return float(max(np.max(i / m - f), np.max(f - (i - 1) / m)))


@dataclass(frozen=True)
class TestConfig:
    """Settings for :func:`run_test`.

    ``method='auto'`` uses the exact sorted-gap solver for one-dimensional
    cube spacings and branch-and-bound otherwise; ``'bnb'`` always uses
    branch-and-bound.
    """

    __test__ = False

    alpha: float = 0.05
    shape: ReferenceShape = CUBE
    tol: float | None = None
    method: Literal["auto", "bnb"] = "auto"

    def __post_init__(self):
        _check_alpha(self.alpha)
        if self.tol is not None and not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol!r}")
        if self.method not in ("auto", "bnb"):
            raise ValueError(f"unknown method {self.method!r}")


@dataclass(frozen=True)
class TestResult:
    __test__ = False

    statistic: float
    standardized: float
    critical_value: float
    p_value: float
    reject: bool
    n: int
    d: int
    certificate_gap: float = 0.0
    borderline: bool = False


def _p_value(standardized: float, alpha: float, reject: bool) -> float:
    p = float(-np.expm1(-np.exp(-standardized)))
    # rounding-level reconciliation so that p < alpha exactly when reject
    if reject and p >= alpha:
        p = math.nextafter(alpha, 0.0)
    elif not reject and p < alpha:
        p = alpha
    return p


def run_test(cloud: PointCloud, config: TestConfig = TestConfig()) -> TestResult:
    """Maximal-spacing test of uniformity on ``[0, 1]^d``.

    Rejects when the spacing volume strictly exceeds the critical value.
    ``borderline`` is set when the certified uncertainty in ``n * V_n`` could
    move the standardized statistic across the Gumbel quantile.
    """
    n, d = cloud.n, cloud.dim
    _check_n(n)
    shape = config.shape
    if config.method == "auto" and d == 1 and shape.kind == "cube":
        res = max_spacing_1d_exact(cloud)
    else:
        res = max_spacing(cloud, shape, config.tol)
    v = res.volume
    c = critical_value(n, d, config.alpha, shape.beta)
    t = standardize(v, n, d, shape.beta)
    reject = bool(v > c)
    slack = n * ((res.scale + res.certificate_gap) ** d - v)
    borderline = abs(t - gumbel_quantile(1.0 - config.alpha)) < slack
    return TestResult(
        statistic=v,
        standardized=t,
        critical_value=c,
        p_value=_p_value(t, config.alpha, reject),
        reject=reject,
        n=n,
        d=d,
        certificate_gap=res.certificate_gap,
        borderline=bool(borderline),
    )


def nn_test(cloud: PointCloud, alpha: float = 0.05) -> TestResult:
    """Nearest-neighbour ball test: reject for large ``V_d * M_n^d``."""
    n = cloud.n
    c = nn_critical_value(n, alpha)
    v = nn_statistic(cloud).volume
    t = nn_standardize(v, n)
    reject = bool(v > c)
    return TestResult(
        statistic=v,
        standardized=t,
        critical_value=c,
        p_value=_p_value(t, alpha, reject),
        reject=reject,
        n=n,
        d=cloud.dim,
    )
