"""Maximal spacings and nearest-neighbour balls in the unit hypercube.

The maximal spacing of a point cloud is the largest scale ``r`` such that a
translate of ``r * A`` fits in the domain without containing a sample point,
where ``A`` is a unit-volume reference shape (axis-aligned cube or Euclidean
ball). Points on the boundary of the translate do not block it, so the
search reduces to maximizing the *anchored scale*

    center -> largest admissible scale of the shape centered at ``center``,

which is a minimum of distances and therefore Lipschitz. :func:`max_spacing`
maximizes it by branch-and-bound with a certified error bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.special import gammaln

from maxgap._grid import SpatialGrid, norms

__all__ = [
    "PointCloud",
    "ReferenceShape",
    "CUBE",
    "SpacingResult",
    "NnResult",
    "UnitCube",
    "BallRegion",
    "ball_volume_const",
    "anchored_scale",
    "max_spacing",
    "max_spacing_1d_exact",
    "nn_statistic",
    "default_tol",
]

# active boxes allowed in one branch-and-bound level before giving up
MAX_ACTIVE_BOXES = 4_000_000
# below this many points nn_statistic uses the O(n^2) scan
NN_BRUTE_THRESHOLD = 64
# surviving cube boxes per level above which the axis-pair bound is applied
PAIR_BOUND_MIN_BOXES = 1024
# (box, cell) slots enumerated per chunk in the axis-pair bound
_PAIR_CHUNK = 1 << 20


class PointCloud:
    """An immutable sample of ``n`` points in ``[0, 1]^d``.

    Parameters
    ----------
    points : array_like, shape (n, d)
        Coordinates. A 1-D array is read as ``n`` points in one dimension.
    dim : int, optional
        Required when ``points`` is empty; otherwise checked against the data.
    """

    __slots__ = ("_points",)

    def __init__(self, points, dim: int | None = None):
        arr = np.array(points, dtype=float)
        if arr.ndim == 1:
            if arr.size == 0:
                if dim is None:
                    raise ValueError("dim is required for an empty cloud")
                arr = arr.reshape(0, dim)
            else:
                arr = arr.reshape(-1, 1) if dim in (None, 1) else arr.reshape(-1, dim)
        if arr.ndim != 2:
            raise ValueError(f"points must be a 2-D array, got shape {arr.shape}")
        if dim is not None and arr.shape[1] != dim:
            raise ValueError(f"points have dimension {arr.shape[1]}, expected {dim}")
        if arr.shape[1] < 1:
            raise ValueError("dimension must be at least 1")
        if not np.all(np.isfinite(arr)):
            raise ValueError("coordinates must be finite")
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            bad = np.argwhere((arr < 0.0) | (arr > 1.0))[0]
            raise ValueError(
                f"coordinate {arr[bad[0], bad[1]]!r} of point {bad[0]} lies outside [0, 1]"
            )
        arr.setflags(write=False)
        self._points = arr

    @property
    def points(self) -> np.ndarray:
        return self._points

    @property
    def n(self) -> int:
        return self._points.shape[0]

    @property
    def dim(self) -> int:
        return self._points.shape[1]

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return f"PointCloud(n={self.n}, dim={self.dim})"


@dataclass(frozen=True)
class ReferenceShape:
    """The reference set ``A`` and its boundary constant ``beta``.

    ``kind='cube'`` is the axis-aligned unit cube (``beta`` must be 0).
    ``kind='ball'`` is the Euclidean ball of unit volume; its ``beta`` is not
    known in closed form and must be supplied by the caller.
    """

    kind: Literal["cube", "ball"] = "cube"
    beta: float = 0.0

    def __post_init__(self):
        if self.kind not in ("cube", "ball"):
            raise ValueError(f"unknown shape kind {self.kind!r}")
        if self.kind == "cube" and self.beta != 0.0:
            raise ValueError("the cube has beta = 0")

    @classmethod
    def ball(cls, beta: float = 0.0) -> "ReferenceShape":
        return cls("ball", float(beta))

    @property
    def metric(self) -> float:
        return np.inf if self.kind == "cube" else 2.0


CUBE = ReferenceShape("cube", 0.0)


@dataclass(frozen=True)
class SpacingResult:
    """Maximal spacing with its certificate.

    ``scale`` is a value attained at ``center``; the true supremum lies in
    ``[scale, scale + certificate_gap]``.
    """

    scale: float
    center: np.ndarray = field(repr=False)
    certificate_gap: float
    dim: int

    @property
    def volume(self) -> float:
        return self.scale**self.dim


@dataclass(frozen=True)
class NnResult:
    """Largest point-centered empty ball, capped by the distance to the boundary."""

    m: float
    argmax_index: int
    dim: int

    @property
    def volume(self) -> float:
        return ball_volume_const(self.dim) * self.m**self.dim


def ball_volume_const(d: int) -> float:
    """Volume of the Euclidean unit ball in ``d`` dimensions."""
    if int(d) != d or d < 1:
        raise ValueError(f"dimension must be a positive integer, got {d!r}")
    return math.exp(0.5 * d * math.log(math.pi) - gammaln(0.5 * d + 1.0))


def _unit_ball_radius(d: int) -> float:
    # radius of the ball with volume 1
    return ball_volume_const(d) ** (-1.0 / d)


class UnitCube:
    """The domain ``[0, 1]^d``."""

    def __init__(self, dim: int):
        self.dim = dim
        self.lo = np.zeros(dim)
        self.hi = np.ones(dim)

    def room(self, centers: np.ndarray, shape: ReferenceShape) -> np.ndarray:
        # same for both shapes: distance to the nearest face
        return np.minimum(centers, 1.0 - centers).min(axis=1)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        return np.all((pts >= 0.0) & (pts <= 1.0), axis=1)


class BallRegion:
    """A solid Euclidean ball inside ``[0, 1]^d`` used as the search domain."""

    def __init__(self, center, radius: float):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.dim = self.center.size
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if np.any(self.center - self.radius < 0.0) or np.any(self.center + self.radius > 1.0):
            raise ValueError("ball must lie inside the unit cube")
        self.lo = self.center - self.radius
        self.hi = self.center + self.radius

    @property
    def volume(self) -> float:
        return ball_volume_const(self.dim) * self.radius**self.dim

    def room(self, centers: np.ndarray, shape: ReferenceShape) -> np.ndarray:
        slack = self.radius - norms(centers - self.center, 2.0)
        if shape.kind == "cube":
            # the far corner of a cube of half-side s sits s*sqrt(d) away
            slack = slack / math.sqrt(self.dim)
        return slack

    def contains(self, pts: np.ndarray) -> np.ndarray:
        return norms(pts - self.center, 2.0) <= self.radius


def _to_scale(radius: np.ndarray, shape: ReferenceShape, d: int) -> np.ndarray:
    if shape.kind == "cube":
        return 2.0 * radius
    return radius / _unit_ball_radius(d)


def anchored_scale(center, cloud: PointCloud, shape: ReferenceShape = CUBE, region=None) -> float:
    """Largest scale of ``shape`` centered at ``center`` that avoids the cloud.

    For the cube this is twice the smaller of the sup-norm distance to the
    nearest point and the distance to the nearest face; for the ball the
    Euclidean radius is converted to the scale of the unit-volume ball.
    """
    c = np.asarray(center, dtype=float).reshape(1, -1)
    if c.shape[1] != cloud.dim:
        raise ValueError(f"center has dimension {c.shape[1]}, cloud has {cloud.dim}")
    region = region or UnitCube(cloud.dim)
    radius = region.room(c, shape)[0]
    if cloud.n:
        radius = min(radius, norms(cloud.points - c, shape.metric).min())
    return float(_to_scale(np.array([max(radius, 0.0)]), shape, cloud.dim)[0])


def default_tol(n: int, d: int) -> float:
    """Tolerance relative to the typical spacing scale ``(log n / n)^(1/d)``."""
    proxy = (max(math.log(max(n, 1)), 1.0) / max(n, 1)) ** (1.0 / d)
    return max(1e-4 * proxy, 1e-7)


class _Objective:
    """Vectorized anchored scale with a grid resized to the current optimum."""

    def __init__(self, pts, shape, region, d):
        self.pts = pts
        self.shape = shape
        self.region = region
        self.d = d
        self.grid = None

    def radius_of(self, scale: float) -> float:
        if self.shape.kind == "cube":
            return 0.5 * scale
        return scale * _unit_ball_radius(self.d)

    def retune(self, best_scale: float):
        if not len(self.pts):
            return
        want = max(self.radius_of(best_scale), 1e-12)
        g = self.grid
        if g is None or want > 2.0 * g.cell or (want < 0.5 * g.cell and g.G > 1):
            self.grid = SpatialGrid(self.pts, want)

    def pair_bound(self, centers: np.ndarray, hw: np.ndarray, best: float) -> np.ndarray:
        """Upper bound on the cube's anchored scale over each box.

        For every axis ``j`` the box is flanked by a blocker on the left (a
        point with ``x_j <= lo_j`` or the face ``x_j = 0``) and one on the
        right. Over the box, the sup-norm distance to a left blocker ``a`` is
        at most ``max(c_j - a_j, K_a)`` with ``K_a`` the largest offset in the
        other coordinates, and symmetrically on the right, so the anchored
        half-scale is bounded by a one-dimensional max-min. Unlike the
        Lipschitz bound this is tight on plateaus where a cube pinned
        between two blockers slides freely along the other axes.
        """
        m, d = centers.shape
        k = 1
        if len(self.pts):
            k = int(min(3, max(1, math.ceil((self.radius_of(best) + 2 * hw.max()) / self.grid.cell))))
        step = max(1, _PAIR_CHUNK // (2 * k + 1) ** d)
        if m > step:
            return np.concatenate(
                [self.pair_bound(centers[i : i + step], hw, best) for i in range(0, m, step)]
            )
        lo = centers - hw
        hi = centers + hw
        la, lk, ls = np.zeros((m, d)), np.zeros((m, d)), hi.copy()
        rb, rk, rs = np.ones((m, d)), np.zeros((m, d)), 1.0 - lo
        if len(self.pts):
            g = self.grid
            qrep, pidx, per_q = g.pairs(centers, k)
            if qrep.size:
                x = g.points[pidx]
                ext = np.abs(centers[qrep] - x) + hw
                nz = np.flatnonzero(per_q)
                starts = (np.cumsum(per_q) - per_q)[nz]
                big = len(qrep)
                for j in range(d):
                    kj = np.delete(ext, j, axis=1).max(axis=1) if d > 1 else np.zeros(big)
                    for side in (0, 1):
                        if side == 0:
                            ok = x[:, j] <= lo[qrep, j]
                            score = np.where(ok, np.maximum(hi[qrep, j] - x[:, j], kj), np.inf)
                            cur = ls
                        else:
                            ok = x[:, j] >= hi[qrep, j]
                            score = np.where(ok, np.maximum(x[:, j] - lo[qrep, j], kj), np.inf)
                            cur = rs
                        low = np.minimum.reduceat(score, starts)
                        win = score == np.repeat(low, per_q[nz])
                        pick = np.minimum.reduceat(np.where(win, np.arange(big), big), starts)
                        better = low < cur[nz, j]
                        rows, pick = nz[better], pick[better]
                        cur[rows, j] = low[better]
                        if side == 0:
                            la[rows, j] = x[pick, j]
                            lk[rows, j] = kj[pick]
                        else:
                            rb[rows, j] = x[pick, j]
                            rk[rows, j] = kj[pick]
        cands = [lo, hi, 0.5 * (la + rb), la + lk, rb - rk, la + rk, rb - lk]
        half = np.full((m, d), -np.inf)
        for t in cands:
            t = np.clip(t, lo, hi)
            half = np.maximum(half, np.minimum(np.maximum(t - la, lk), np.maximum(rb - t, rk)))
        return 2.0 * half.min(axis=1)

    def __call__(self, centers: np.ndarray) -> np.ndarray:
        room = self.region.room(centers, self.shape)
        if len(self.pts):
            room = self.grid.nearest(centers, p=self.shape.metric, cap=np.maximum(room, 0.0))
        return _to_scale(np.maximum(room, 0.0), self.shape, self.d)


def max_spacing(
    cloud: PointCloud,
    shape: ReferenceShape = CUBE,
    tol: float | None = None,
    region=None,
) -> SpacingResult:
    """Maximal spacing by Lipschitz branch-and-bound.

    Boxes are bisected along every axis, one level at a time. A box with
    midpoint ``m`` is bounded above by ``anchored_scale(m) + L * radius``,
    where the radius is the box's sup-norm half-width with ``L = 2`` for the
    cube and its Euclidean half-diagonal with ``L = 1 / rho_d`` for the ball
    (``rho_d`` the radius of the unit-volume ball). Boxes whose bound cannot
    beat the incumbent by more than ``tol`` are dropped.

    Parameters
    ----------
    cloud : PointCloud
    shape : ReferenceShape
    tol : float, optional
        Absolute tolerance on the scale. Defaults to :func:`default_tol`.
    region : UnitCube or BallRegion, optional
        Search domain; the unit cube by default. Points outside a ball region
        are the caller's responsibility to drop.

    Returns
    -------
    SpacingResult
        ``certificate_gap`` is the largest bound among discarded boxes minus
        the returned scale, never more than ``tol``.
    """
    d = cloud.dim
    if d < 1:
        raise ValueError("cloud has no dimensions")
    if tol is None:
        tol = default_tol(cloud.n, d)
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol!r}")
    region = region or UnitCube(d)

    if shape.kind == "cube":
        lip = 2.0

        def box_radius(hw):
            return hw.max()
    else:
        lip = 1.0 / _unit_ball_radius(d)

        def box_radius(hw):
            return float(np.sqrt(np.sum(hw * hw)))

    objective = _Objective(cloud.points, shape, region, d)
    objective.retune(default_tol(cloud.n, d) * 1e4)

    offsets = np.array(np.meshgrid(*([[-1.0, 1.0]] * d), indexing="ij")).reshape(d, -1).T
    hw = 0.5 * (region.hi - region.lo)
    centers = (0.5 * (region.lo + region.hi))[None, :]
    best = -np.inf
    best_center = centers[0]
    dropped_bound = -np.inf

    while True:
        vals = objective(centers)
        i = int(np.argmax(vals))
        if vals[i] > best:
            best = float(vals[i])
            best_center = centers[i].copy()
            objective.retune(best)
        bound = vals + lip * box_radius(hw)
        if shape.kind == "cube" and np.count_nonzero(bound > best + tol) > PAIR_BOUND_MIN_BOXES:
            live = bound > best + tol
            bound[live] = np.minimum(bound[live], objective.pair_bound(centers[live], hw, best))
        keep = bound > best + tol
        if not keep.all():
            dropped_bound = max(dropped_bound, float(bound[~keep].max()))
        centers = centers[keep]
        if not len(centers):
            break
        if len(centers) * len(offsets) > MAX_ACTIVE_BOXES:
            raise RuntimeError(
                f"branch-and-bound exceeded {MAX_ACTIVE_BOXES} boxes; loosen tol (={tol:g})"
            )
        hw = 0.5 * hw
        centers = (centers[:, None, :] + offsets[None, :, :] * hw).reshape(-1, d)

    best_center.setflags(write=False)
    return SpacingResult(
        scale=best,
        center=best_center,
        certificate_gap=max(0.0, dropped_bound - best),
        dim=d,
    )


def max_spacing_1d_exact(cloud: PointCloud) -> SpacingResult:
    """Largest of the ``n + 1`` gaps between sorted points and the endpoints."""
    if cloud.dim != 1:
        raise ValueError(f"exact solver needs dim 1, got {cloud.dim}")
    x = np.concatenate(([0.0], np.sort(cloud.points[:, 0]), [1.0]))
    gaps = np.diff(x)
    i = int(np.argmax(gaps))
    center = np.array([0.5 * (x[i] + x[i + 1])])
    center.setflags(write=False)
    return SpacingResult(scale=float(gaps[i]), center=center, certificate_gap=0.0, dim=1)


def _nn_brute(pts: np.ndarray) -> np.ndarray:
    n = pts.shape[0]
    out = np.empty(n)
    idx = np.arange(n)
    for i in range(n):
        dist = norms(pts[i] - pts, 2.0)
        dist[idx == i] = np.inf
        out[i] = dist.min()
    return out


def nn_statistic(cloud: PointCloud, method: Literal["auto", "grid", "brute"] = "auto") -> NnResult:
    """Largest ball centered at a sample point that avoids the others and the boundary.

    ``M_n = max_i min(D_i, dist(X_i, boundary))`` with ``D_i`` the Euclidean
    nearest-neighbour distance of point ``i``.
    """
    n, d = cloud.n, cloud.dim
    if n < 2:
        raise ValueError(f"need at least 2 points, got {n}")
    pts = cloud.points
    room = np.minimum(pts, 1.0 - pts).min(axis=1)
    if method == "auto":
        method = "brute" if n < NN_BRUTE_THRESHOLD else "grid"
    if method == "brute":
        capped = np.minimum(_nn_brute(pts), room)
    elif method == "grid":
        typical = (math.log(n) / (n * ball_volume_const(d))) ** (1.0 / d)
        grid = SpatialGrid(pts, typical)
        capped = grid.nearest(pts, p=2.0, cap=room, exclude=np.arange(n))
    else:
        raise ValueError(f"unknown method {method!r}")
    i = int(np.argmax(capped))
    return NnResult(m=float(capped[i]), argmax_index=i, dim=d)
