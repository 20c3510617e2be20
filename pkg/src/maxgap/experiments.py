"""Monte Carlo campaigns for the level, power and limit laws of the spacing tests.

Replicate ``i`` of a campaign always uses seed ``base_seed + i``, and results
are gathered in replicate order, so a report does not depend on how many
worker processes produced it.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Literal

import numpy as np
from scipy.stats import chi2_contingency

from maxgap.geometry import (
    CUBE,
    PointCloud,
    ReferenceShape,
    max_spacing,
    max_spacing_1d_exact,
    nn_statistic,
)
from maxgap.sampling import (
    CappedBall,
    Contiguous,
    HoleBall,
    Uniform,
    coupled_sample,
    coupling_moments,
    make_rng,
    sample_alternative,
    sample_uniform,
)
from maxgap.stats import (
    TestConfig,
    gumbel_cdf,
    ks_distance,
    nn_standardize,
    run_test,
    standardize,
)

logger = logging.getLogger(__name__)

__all__ = [
    "CampaignConfig",
    "CampaignReport",
    "PathPoint",
    "CouplingReport",
    "RandomSizeReport",
    "ContiguityReport",
    "mc_level",
    "mc_power",
    "power_curve",
    "mc_limit_law",
    "as_path",
    "mc_coupling",
    "mc_random_size",
    "compute_C",
    "mc_contiguous",
    "spec_to_dict",
    "to_jsonable",
]

STREAM_NOISE = 2
DEFAULT_T_GRID = tuple(np.round(np.arange(-2.0, 6.0001, 0.25), 2))


def to_jsonable(obj):
    """Recursively convert dataclasses and numpy values to JSON-ready Python."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def spec_to_dict(spec) -> dict:
    if isinstance(spec, Uniform):
        return {"kind": "uniform", "dim": spec.dim}
    if isinstance(spec, HoleBall):
        return {"kind": "hole", "center": list(spec.center), "radius": spec.radius}
    if isinstance(spec, CappedBall):
        return {
            "kind": "capped",
            "center": list(spec.center),
            "radius": spec.radius,
            "level": spec.level,
        }
    if isinstance(spec, Contiguous):
        return {
            "kind": "contiguous",
            "h": repr(spec.h),
            "n": spec.n,
            "dim": spec.dim,
            "h_bounds": list(spec.h_bounds),
        }
    raise TypeError(f"unknown spec {spec!r}")


def _map(fn: Callable, items, workers: int | None):
    items = list(items)
    if not workers or workers <= 1 or len(items) < 2:
        return [fn(i) for i in items]
    chunk = max(1, len(items) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items, chunksize=chunk))


def _rate(flags) -> tuple[float, float]:
    flags = np.asarray(flags, dtype=bool)
    r = float(flags.mean())
    return r, math.sqrt(r * (1.0 - r) / flags.size)


def _spacing(cloud: PointCloud, shape, tol, method, region=None):
    if method == "auto" and region is None and cloud.dim == 1 and shape.kind == "cube":
        return max_spacing_1d_exact(cloud)
    return max_spacing(cloud, shape, tol, region=region)


@dataclass(frozen=True)
class CampaignConfig:
    """Monte Carlo settings shared by the level, power and limit-law campaigns.

    ``spec`` defaults to the uniform distribution. ``method`` is passed to
    :class:`maxgap.stats.TestConfig`.
    """

    n: int
    d: int
    reps: int
    alpha: float = 0.05
    shape: ReferenceShape = CUBE
    spec: object = None
    base_seed: int = 0
    tol: float | None = None
    method: Literal["auto", "bnb"] = "auto"

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError(f"reps must be at least 1, got {self.reps}")
        if self.d < 1:
            raise ValueError(f"d must be at least 1, got {self.d}")
        if self.n < 3:
            raise ValueError(f"n must be at least 3, got {self.n}")
        if self.base_seed < 0:
            raise ValueError("base_seed must be non-negative")
        if self.spec is None:
            object.__setattr__(self, "spec", Uniform(self.d))
        if self.spec.dim != self.d:
            raise ValueError(f"spec has dimension {self.spec.dim}, config has {self.d}")
        self.test_config()

    def test_config(self) -> TestConfig:
        return TestConfig(self.alpha, self.shape, self.tol, self.method)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "d": self.d,
            "reps": self.reps,
            "alpha": self.alpha,
            "shape": {"kind": self.shape.kind, "beta": self.shape.beta},
            "spec": spec_to_dict(self.spec),
            "base_seed": self.base_seed,
            "tol": self.tol,
            "method": self.method,
        }


@dataclass
class CampaignReport:
    """Aggregate of one campaign.

    ``statistic_samples`` holds the standardized statistic per replicate, in
    replicate order. ``extra`` carries campaign-specific tables.
    """

    rejection_rate: float
    rejection_se: float
    ks_distance: float
    statistic_samples: list
    config: dict
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return to_jsonable(self)


def _test_replicate(cfg: CampaignConfig, i: int, nn: bool = False):
    cloud = sample_alternative(cfg.spec, cfg.n, cfg.base_seed + i)
    res = run_test(cloud, cfg.test_config())
    out = (res.standardized, res.reject, res.borderline)
    if nn:
        out += (nn_standardize(nn_statistic(cloud).volume, cfg.n),)
    return out


def _campaign(cfg: CampaignConfig, workers, nn=False) -> tuple[CampaignReport, list]:
    rows = _map(partial(_test_replicate, cfg, nn=nn), range(cfg.reps), workers)
    t = [r[0] for r in rows]
    rate, se = _rate([r[1] for r in rows])
    report = CampaignReport(
        rejection_rate=rate,
        rejection_se=se,
        ks_distance=ks_distance(t),
        statistic_samples=t,
        config=cfg.to_dict(),
        extra={"borderline_count": int(sum(r[2] for r in rows))},
    )
    return report, rows


def mc_level(config: CampaignConfig, workers: int | None = 1) -> CampaignReport:
    """Empirical size of the spacing test under uniformity."""
    if not isinstance(config.spec, Uniform):
        raise ValueError("mc_level needs the uniform spec")
    return _campaign(config, workers)[0]


def mc_power(config: CampaignConfig, workers: int | None = 1) -> CampaignReport:
    """Empirical rejection rate under a non-uniform alternative."""
    if isinstance(config.spec, Uniform):
        raise ValueError("mc_power needs a non-uniform spec")
    return _campaign(config, workers)[0]


def power_curve(config: CampaignConfig, n_grid, workers: int | None = 1) -> list[dict]:
    """Rejection rate and its standard error for each sample size in ``n_grid``."""
    rows = []
    for n in n_grid:
        rep = mc_power(dataclasses.replace(config, n=int(n)), workers)
        rows.append({"n": int(n), "rate": rep.rejection_rate, "se": rep.rejection_se})
    return rows


def _cdf_table(samples, t_grid) -> list[list[float]]:
    x = np.sort(np.asarray(samples, dtype=float))
    t = np.asarray(t_grid, dtype=float)
    emp = np.searchsorted(x, t, side="right") / x.size
    return [[float(a), float(b), float(c)] for a, b, c in zip(t, emp, gumbel_cdf(t))]


def mc_limit_law(
    config: CampaignConfig,
    t_grid=DEFAULT_T_GRID,
    nn: bool = False,
    workers: int | None = 1,
) -> CampaignReport:
    """Empirical law of the standardized spacing statistic under uniformity.

    ``extra['cdf_table']`` has rows ``(t, empirical CDF, Gumbel CDF)``. With
    ``nn=True`` the same is reported for ``n * Vbar_n - log n``.
    """
    if not isinstance(config.spec, Uniform):
        raise ValueError("mc_limit_law needs the uniform spec")
    report, rows = _campaign(config, workers, nn=nn)
    t = report.statistic_samples
    report.extra["cdf_table"] = _cdf_table(t, t_grid)
    report.extra["p_le_0"] = float(np.mean(np.asarray(t) <= 0.0))
    report.extra["median"] = float(np.median(t))
    if nn:
        tn = [r[3] for r in rows]
        report.extra["nn"] = {
            "ks_distance": ks_distance(tn),
            "statistic_samples": tn,
            "cdf_table": _cdf_table(tn, t_grid),
        }
    return report


@dataclass
class PathPoint:
    n: int
    volume: float
    ratio: float
    loglog_ratio: float


def as_path(
    n_grid,
    d: int,
    shape: ReferenceShape = CUBE,
    seed: int = 0,
    tol: float | None = None,
    method: Literal["auto", "bnb"] = "auto",
) -> list[PathPoint]:
    """Trace ``n V_n / log n`` along one nested sample path.

    The sample at each ``n`` is the first ``n`` points of a single uniform
    stream. Also reports ``(n V_n - log n) / log log n``.
    """
    grid = [int(n) for n in n_grid]
    if not grid or min(grid) < 3:
        raise ValueError("n_grid values must be at least 3")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("n_grid must be strictly increasing")
    pts = sample_uniform(grid[-1], d, seed).points
    out = []
    for n in grid:
        v = _spacing(PointCloud(pts[:n], dim=d), shape, tol, method).volume
        ln = math.log(n)
        out.append(PathPoint(n, v, n * v / ln, (n * v - ln) / math.log(ln)))
    return out


@dataclass
class CouplingReport:
    n: int
    epsilon: float
    S_volume: float
    p: float
    kappa: float
    reps: int
    subsample_violations: int
    tilde_violations: int
    L_mean: float
    L_mean_se: float
    L_var: float
    L_var_se: float
    L_mean_theory: float
    L_var_theory: float
    N_mean: float
    N_mean_se: float
    N_var: float
    N_var_se: float
    xi_mean: float
    xi_mean_se: float
    xi_mean_theory: float
    L_centered_sd: float
    chi2_statistic: float | None
    chi2_pvalue: float | None
    chi2_cells: int
    samples: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return to_jsonable(self)


def _var_se(x: np.ndarray) -> float:
    # standard error of the unbiased sample variance
    m = x.size
    c = x - x.mean()
    m4 = np.mean(c**4)
    s2 = np.var(x, ddof=1)
    return float(math.sqrt(max(m4 - s2**2 * (m - 3) / (m - 1), 0.0) / m))


def ball_cells(pts: np.ndarray, center, radius: float) -> np.ndarray:
    """Equal-volume cell labels for points of a ball.

    Four radial shells, split by angle into six sectors in 2-D, by orthant in
    three or more dimensions, and into twenty intervals in 1-D.
    """
    center = np.asarray(center, dtype=float)
    d = center.size
    rel = (np.asarray(pts, dtype=float) - center) / radius
    if d == 1:
        return np.clip(np.floor((rel[:, 0] + 1.0) * 10.0), 0, 19).astype(int)
    r = np.clip(np.sqrt(np.sum(rel**2, axis=1)), 0.0, 1.0)
    shell = np.clip(np.floor(r**d * 4.0), 0, 3).astype(int)
    if d == 2:
        ang = np.arctan2(rel[:, 1], rel[:, 0]) + math.pi
        sector = np.clip(np.floor(ang / (2 * math.pi) * 6.0), 0, 5).astype(int)
        return shell * 6 + sector
    orth = ((rel > 0).astype(int) * (2 ** np.arange(d))).sum(axis=1)
    return shell * (2**d) + orth


def _coupling_replicate(spec, n, epsilon, seed, shape, tol, spacings, i):
    cloud, tr = coupled_sample(spec, n, epsilon, seed + i)
    row = {
        "N": tr.N_n,
        "L": tr.L_n,
        "xi_sum": int(tr.waiting_times.sum()),
        "xi_sq": int((tr.waiting_times**2).sum()),
    }
    region = spec.region
    z = cloud.points[region.contains(cloud.points)]
    row["z"] = z
    row["zt"] = tr.accepted
    if spacings:
        d = spec.dim
        v = _spacing(cloud, shape, tol, "bnb")
        w = max_spacing(PointCloud(z, dim=d), shape, tol, region=region)
        wt = max_spacing(PointCloud(tr.accepted, dim=d), shape, tol, region=region)
        vt = max_spacing(PointCloud(tr.proposals, dim=d), shape, tol, region=region)
        # certified bounds: true W <= w.scale + gap and true V >= v.scale
        row["subsample"] = w.scale > v.scale + v.certificate_gap
        row["tilde"] = vt.scale > wt.scale + wt.certificate_gap
        row["vols"] = (v.volume, w.volume, wt.volume, vt.volume)
    return row


def mc_coupling(
    n: int,
    epsilon: float,
    spec: CappedBall,
    reps: int,
    seed: int = 0,
    shape: ReferenceShape = CUBE,
    tol: float | None = None,
    spacings: bool = True,
    workers: int | None = 1,
) -> CouplingReport:
    """Simulate the coupling behind the consistency argument.

    Per replicate: the spacing ``V_n`` of the full sample, ``W`` of the sample
    points inside S (measured within S), ``W~`` of the accepted coupled points
    and ``V~`` of all coupled proposals, both within S. Counts pathwise
    violations of ``W <= V_n`` and ``V~ <= W~``, and compares the moments of
    ``L_n`` and ``N_n`` with their closed forms. The accepted points and the
    sample points inside S are compared by a chi-square homogeneity test on
    equal-volume cells of S.
    """
    if reps < 2:
        raise ValueError("need at least 2 replicates")
    fn = partial(_coupling_replicate, spec, n, epsilon, seed, shape, tol, spacings)
    rows = _map(fn, range(reps), workers)

    L = np.array([r["L"] for r in rows], dtype=float)
    N = np.array([r["N"] for r in rows], dtype=float)
    p = spec.p
    s_vol = spec.ball_volume
    mean_th, var_th = coupling_moments(n, epsilon, s_vol, p)
    kappa = p / ((1.0 - epsilon) * s_vol)
    n_acc = N.sum()
    xi_sum = sum(r["xi_sum"] for r in rows)
    xi_sq = sum(r["xi_sq"] for r in rows)
    xi_mean = xi_sum / n_acc if n_acc else float("nan")
    xi_var = xi_sq / n_acc - xi_mean**2 if n_acc else float("nan")

    z = np.concatenate([r["z"] for r in rows])
    zt = np.concatenate([r["zt"] for r in rows])
    cz = ball_cells(z, spec.center, spec.radius)
    czt = ball_cells(zt, spec.center, spec.radius)
    k = int(max(cz.max(initial=0), czt.max(initial=0))) + 1
    table = np.vstack([np.bincount(cz, minlength=k), np.bincount(czt, minlength=k)])
    table = table[:, table.sum(axis=0) > 0]
    if table.shape[1] >= 2 and table.sum(axis=1).min() > 0:
        chi = chi2_contingency(table, correction=False)
        chi_stat, chi_p = float(chi.statistic), float(chi.pvalue)
    else:
        chi_stat = chi_p = None

    k_n = math.floor(n * (1.0 - epsilon) * s_vol)
    samples = {"L": L.astype(int).tolist(), "N": N.astype(int).tolist()}
    if spacings:
        vols = np.array([r["vols"] for r in rows])
        samples.update(
            V=vols[:, 0].tolist(),
            W=vols[:, 1].tolist(),
            W_tilde=vols[:, 2].tolist(),
            V_tilde=vols[:, 3].tolist(),
            W_normalized=(vols[:, 1] / s_vol).tolist(),
        )
    return CouplingReport(
        n=n,
        epsilon=epsilon,
        S_volume=s_vol,
        p=p,
        kappa=kappa,
        reps=reps,
        subsample_violations=int(sum(r.get("subsample", False) for r in rows)),
        tilde_violations=int(sum(r.get("tilde", False) for r in rows)),
        L_mean=float(L.mean()),
        L_mean_se=float(L.std(ddof=1) / math.sqrt(reps)),
        L_var=float(L.var(ddof=1)),
        L_var_se=_var_se(L),
        L_mean_theory=mean_th,
        L_var_theory=var_th,
        N_mean=float(N.mean()),
        N_mean_se=float(N.std(ddof=1) / math.sqrt(reps)),
        N_var=float(N.var(ddof=1)),
        N_var_se=_var_se(N),
        xi_mean=float(xi_mean),
        xi_mean_se=float(math.sqrt(xi_var / n_acc)) if n_acc else float("nan"),
        xi_mean_theory=(1.0 - kappa) / kappa,
        L_centered_sd=float(np.std((L - k_n) / math.sqrt(n), ddof=1)),
        chi2_statistic=chi_stat,
        chi2_pvalue=chi_p,
        chi2_cells=int(table.shape[1]),
        samples=samples,
    )


@dataclass
class RandomSizeReport:
    n: int
    k_n: int
    d: int
    perturbation_scale: float
    reps: int
    ks_distance: float
    resampled: int
    statistic_samples: list
    sizes: list

    def to_dict(self) -> dict:
        return to_jsonable(self)


def _random_size_replicate(n, k, scale, d, seed, shape, tol, method, i):
    rng = make_rng(seed + i, STREAM_NOISE)
    root = math.sqrt(n)
    resampled = 0
    while True:
        z = rng.uniform(-scale, scale) if scale > 0 else 0.0
        size = k + int(round(root * z))
        if size >= 3:
            break
        resampled += 1
    cloud = sample_uniform(size, d, seed + i)
    v = _spacing(cloud, shape, tol, method).volume
    return standardize(v, k, d, shape.beta), size, resampled


def mc_random_size(
    n: int,
    k_fraction: float = 0.5,
    perturbation_scale: float = 1.0,
    reps: int = 1000,
    d: int = 1,
    seed: int = 0,
    shape: ReferenceShape = CUBE,
    tol: float | None = None,
    method: Literal["auto", "bnb"] = "auto",
    workers: int | None = 1,
) -> RandomSizeReport:
    """Spacing law when the sample size is random but close to ``k_n``.

    ``k_n = floor(k_fraction * n)`` and ``L_n = k_n + round(sqrt(n) * Z)`` with
    ``Z`` uniform on ``[-perturbation_scale, perturbation_scale]``. The volume
    from ``L_n`` points is standardized with ``k_n``. Draws giving
    ``L_n < 3`` are redrawn and counted in ``resampled``.
    """
    if not 0.0 < k_fraction:
        raise ValueError("k_fraction must be positive")
    if perturbation_scale < 0:
        raise ValueError("perturbation_scale must be non-negative")
    k = int(math.floor(k_fraction * n))
    if k < 3:
        raise ValueError(f"k_n = {k} is below 3")
    logger.info("k_n / n = %.4g", k / n)
    fn = partial(_random_size_replicate, n, k, perturbation_scale, d, seed, shape, tol, method)
    rows = _map(fn, range(reps), workers)
    t = [r[0] for r in rows]
    resampled = int(sum(r[2] for r in rows))
    if resampled:
        logger.info("redrew %d perturbations with L_n < 3", resampled)
    return RandomSizeReport(
        n=n,
        k_n=k,
        d=d,
        perturbation_scale=perturbation_scale,
        reps=reps,
        ks_distance=ks_distance(t),
        resampled=resampled,
        statistic_samples=t,
        sizes=[r[1] for r in rows],
    )


def _midpoint(h, d: int, m: int, chunk: int = 1 << 20) -> float:
    nodes = (np.arange(m) + 0.5) / m
    total = 0.0
    count = m**d
    for start in range(0, count, chunk):
        idx = np.arange(start, min(start + chunk, count))
        x = np.stack([nodes[(idx // m**j) % m] for j in range(d)], axis=1)
        total += float(np.sum(np.exp(-h(x))))
    return total / count


_MAX_NODES = {1: 1 << 18, 2: 1 << 11, 3: 1 << 7}


def compute_C(h, d: int, rtol: float = 1e-12) -> float:
    """``log`` of the integral of ``exp(-h)`` over ``[0, 1]^d``.

    Tensor midpoint rule on ``m = 4, 8, 16, ...`` nodes per axis with one
    Richardson step, stopped when successive extrapolations agree to ``rtol``.
    """
    if d not in _MAX_NODES:
        raise ValueError(f"quadrature supports d <= 3, got {d}")
    prev_mid = _midpoint(h, d, 4)
    prev = None
    m = 8
    while m <= _MAX_NODES[d]:
        mid = _midpoint(h, d, m)
        rich = (4.0 * mid - prev_mid) / 3.0
        if not math.isfinite(rich) or rich <= 0.0:
            raise ValueError("exp(-h) is not integrable on the cube")
        if prev is not None and abs(rich - prev) <= rtol * abs(rich):
            return math.log(rich)
        prev, prev_mid = rich, mid
        m *= 2
    logger.warning("compute_C stopped at %d nodes per axis before reaching rtol", m // 2)
    return math.log(prev)


@dataclass
class ContiguityReport:
    n: int
    d: int
    reps: int
    C: float
    nn_shift_median: float
    nn_shift_mean: float
    nn_shift_mean_se: float
    nn_alternative: list
    nn_uniform: list
    spacing_shift_median: float | None = None
    spacing_alternative: list | None = None
    spacing_uniform: list | None = None

    def to_dict(self) -> dict:
        return to_jsonable(self)


def _contiguous_replicate(spec, n, d, seed, spacing, shape, tol, i):
    alt = sample_alternative(spec, n, seed + i)
    null = sample_uniform(n, d, seed + i)
    out = [nn_standardize(nn_statistic(alt).volume, n), nn_standardize(nn_statistic(null).volume, n)]
    if spacing:
        for cloud in (alt, null):
            v = _spacing(cloud, shape, tol, "auto").volume
            out.append(standardize(v, n, d, shape.beta))
    return out


def mc_contiguous(
    h,
    n: int,
    d: int,
    reps: int,
    seed: int = 0,
    h_bounds=None,
    spacing: bool | None = None,
    shape: ReferenceShape = CUBE,
    tol: float | None = None,
    workers: int | None = 1,
) -> ContiguityReport:
    """Location shift of ``n Vbar_n - log n`` under ``f_n = 1 + h / log n``.

    Replicate ``i`` draws the alternative and the uniform sample from the same
    seed (common random numbers). The shift of the spacing statistic is
    exploratory and only computed when ``spacing`` is true (default: ``d == 1``).
    """
    spec = Contiguous(h, n, d, h_bounds)
    if spacing is None:
        spacing = d == 1
    fn = partial(_contiguous_replicate, spec, n, d, seed, spacing, shape, tol)
    rows = np.array(_map(fn, range(reps), workers))
    diff = rows[:, 0] - rows[:, 1]
    report = ContiguityReport(
        n=n,
        d=d,
        reps=reps,
        C=compute_C(h, d) if d <= 3 else float("nan"),
        nn_shift_median=float(np.median(rows[:, 0]) - np.median(rows[:, 1])),
        nn_shift_mean=float(diff.mean()),
        nn_shift_mean_se=float(diff.std(ddof=1) / math.sqrt(reps)) if reps > 1 else float("nan"),
        nn_alternative=rows[:, 0].tolist(),
        nn_uniform=rows[:, 1].tolist(),
    )
    if spacing:
        report.spacing_shift_median = float(np.median(rows[:, 2]) - np.median(rows[:, 3]))
        report.spacing_alternative = rows[:, 2].tolist()
        report.spacing_uniform = rows[:, 3].tolist()
    return report
