"""Seeded samplers for the null, the alternative families, and the coupling.

All randomness comes from numpy's PCG64 generator seeded with
``SeedSequence(seed, spawn_key=(stream,))``. Stream 0 carries the observed
sample; stream 1 carries the acceptance-rejection sequence ``(Y_i, U_i)`` of
:func:`coupled_sample`, so the two are independent as the coupling requires.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from maxgap.geometry import BallRegion, PointCloud, ball_volume_const

logger = logging.getLogger(__name__)

__all__ = [
    "make_rng",
    "Uniform",
    "HoleBall",
    "CappedBall",
    "Contiguous",
    "CosineField",
    "ZeroField",
    "CouplingTrace",
    "density_eval",
    "sample_uniform",
    "sample_alternative",
    "sample_in_ball",
    "coupled_sample",
    "coupling_moments",
]

STREAM_SAMPLE = 0
STREAM_COUPLING = 1


def make_rng(seed: int, stream: int = STREAM_SAMPLE) -> np.random.Generator:
    if int(seed) != seed or seed < 0:
        raise ValueError(f"seed must be a non-negative integer, got {seed!r}")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.PCG64(ss))


def _as_points(x, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.shape[1] != d:
        raise ValueError(f"point has dimension {x.shape[1]}, density has {d}")
    if np.any((x < 0.0) | (x > 1.0)):
        raise ValueError("density evaluated outside [0, 1]^d")
    return x


@dataclass(frozen=True)
class Uniform:
    dim: int

    def density(self, x: np.ndarray) -> np.ndarray:
        return np.ones(len(x))

    def sup_density(self) -> float:
        return 1.0


@dataclass(frozen=True)
class CappedBall:
    """Density ``level`` on the ball S and a constant elsewhere, integrating to 1.

    Off the ball the density is ``(1 - level |S|) / (1 - |S|)``.
    """

    center: tuple
    radius: float
    level: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not 0.0 <= self.level < 1.0:
            raise ValueError(f"level must lie in [0, 1), got {self.level!r}")
        # validates containment in the unit cube
        BallRegion(self.center, self.radius)

    @classmethod
    def with_volume(cls, volume: float, d: int, level: float, center=None):
        center = (0.5,) * d if center is None else center
        radius = (volume / ball_volume_const(d)) ** (1.0 / d)
        return cls(tuple(center), radius, level)

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def region(self) -> BallRegion:
        return BallRegion(self.center, self.radius)

    @property
    def ball_volume(self) -> float:
        return ball_volume_const(self.dim) * self.radius**self.dim

    @property
    def outside_level(self) -> float:
        s = self.ball_volume
        return (1.0 - self.level * s) / (1.0 - s)

    @property
    def p(self) -> float:
        """Probability mass of the ball."""
        return self.level * self.ball_volume

    def density(self, x: np.ndarray) -> np.ndarray:
        return np.where(self.region.contains(x), self.level, self.outside_level)

    def sup_density(self) -> float:
        return max(self.level, self.outside_level)


@dataclass(frozen=True)
class HoleBall(CappedBall):
    """Zero density on the ball S, uniform on the rest of the cube."""

    level: float = 0.0

    def __post_init__(self):
        if self.level != 0.0:
            raise ValueError("a hole has level 0")
        super().__post_init__()

    @classmethod
    def with_volume(cls, volume: float, d: int, center=None):
        return super().with_volume(volume, d, 0.0, center)


@dataclass(frozen=True)
class CosineField:
    """``amplitude * cos(2 pi freq x[axis])``; zero mean on the cube for integer ``freq``."""

    axis: int = 0
    freq: int = 1
    amplitude: float = 1.0

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.amplitude * np.cos(2.0 * math.pi * self.freq * x[:, self.axis])

    @property
    def bounds(self) -> tuple[float, float]:
        return (-abs(self.amplitude), abs(self.amplitude))


@dataclass(frozen=True)
class ZeroField:
    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.zeros(len(x))

    @property
    def bounds(self) -> tuple[float, float]:
        return (0.0, 0.0)


@dataclass(frozen=True)
class Contiguous:
    """Local alternative ``f_n = 1 + h / log n``.

    ``h`` maps an ``(m, d)`` array to ``m`` values, must integrate to zero over
    the cube, and is signed. ``h_bounds`` declares ``(inf h, sup h)``; it
    defaults to ``h.bounds`` when the field provides one.
    """

    h: Callable[[np.ndarray], np.ndarray]
    n: float
    dim: int
    h_bounds: tuple | None = field(default=None)

    def __post_init__(self):
        if not self.n > 1:
            raise ValueError(f"n must exceed 1 so that log n > 0, got {self.n!r}")
        bounds = self.h_bounds if self.h_bounds is not None else getattr(self.h, "bounds", None)
        if bounds is None:
            raise ValueError("declare h_bounds=(inf h, sup h)")
        object.__setattr__(self, "h_bounds", (float(bounds[0]), float(bounds[1])))
        probe = make_rng(0).random((4096, self.dim))
        lowest = min(self.h_bounds[0], float(np.min(self.h(probe))))
        if 1.0 + lowest / math.log(self.n) < 0.0:
            raise ValueError(f"1 + h/log n is negative for n={self.n}")
        logger.info(
            "h is treated as a signed field with zero integral; "
            "a nonnegative h with zero integral would vanish identically"
        )

    def density(self, x: np.ndarray) -> np.ndarray:
        return 1.0 + self.h(x) / math.log(self.n)

    def sup_density(self) -> float:
        return 1.0 + max(self.h_bounds[1], 0.0) / math.log(self.n)


def density_eval(spec, x):
    """Evaluate the density of ``spec`` at one point or at the rows of ``x``."""
    pts = _as_points(x, spec.dim)
    vals = np.asarray(spec.density(pts), dtype=float)
    return float(vals[0]) if np.ndim(x) == 1 else vals


def sample_uniform(n: int, d: int, seed: int) -> PointCloud:
    """``n`` i.i.d. uniform points on ``[0, 1]^d`` from stream 0 of ``seed``."""
    if n < 0 or d < 1:
        raise ValueError(f"invalid sizes n={n}, d={d}")
    return PointCloud(make_rng(seed).random((n, d)), dim=d)


def sample_alternative(spec, n: int, seed: int) -> PointCloud:
    """``n`` draws from ``spec`` by rejection from the uniform envelope ``sup f``."""
    if isinstance(spec, Uniform):
        return sample_uniform(n, spec.dim, seed)
    if n < 0:
        raise ValueError(f"invalid sample size {n}")
    d = spec.dim
    rng = make_rng(seed)
    sup = spec.sup_density()
    chunks = []
    need = n
    batch = n
    while need > 0:
        props = rng.random((batch, d))
        u = rng.random(batch)
        acc = props[u * sup < spec.density(props)]
        chunks.append(acc[:need])
        need -= len(chunks[-1])
        batch = int(math.ceil(need * sup * 1.1)) + 8
    pts = np.concatenate(chunks) if chunks else np.empty((0, d))
    return PointCloud(pts, dim=d)


def sample_in_ball(rng: np.random.Generator, m: int, center, radius: float) -> np.ndarray:
    center = np.asarray(center, dtype=float)
    d = center.size
    g = rng.standard_normal((m, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.random(m) ** (1.0 / d)
    return np.clip(center + g * r[:, None], 0.0, 1.0)


@dataclass(frozen=True)
class CouplingTrace:
    """One realization of the acceptance-rejection coupling on the ball S.

    ``proposals`` holds ``Y_1 .. Y_{L_n}``; ``accepted`` the ``N_n`` of them with
    ``U_i <= f(Y_i)``; ``waiting_times[j]`` the rejections before acceptance ``j``.
    """

    n: int
    N_n: int
    L_n: int
    accepted: np.ndarray = field(repr=False)
    proposals: np.ndarray = field(repr=False)
    waiting_times: np.ndarray = field(repr=False)
    epsilon: float
    S_volume: float
    p: float

    @property
    def kappa(self) -> float:
        return self.p / ((1.0 - self.epsilon) * self.S_volume)


def coupled_sample(spec: CappedBall, n: int, epsilon: float, seed: int):
    """Draw the observed sample and its coupled acceptance-rejection sequence.

    Returns ``(cloud, trace)``. The X-sample comes from :func:`sample_alternative`;
    ``(Y_i, U_i)`` are uniform on ``S x [0, 1 - epsilon]`` and are drawn until
    ``N_n`` of them satisfy ``U_i <= f(Y_i)``.
    """
    if not isinstance(spec, CappedBall):
        raise TypeError("coupling needs a CappedBall alternative")
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    if spec.level > 1.0 - epsilon:
        raise ValueError(f"level {spec.level} exceeds 1 - epsilon = {1.0 - epsilon}")
    cloud = sample_alternative(spec, n, seed)
    region = spec.region
    N = int(region.contains(cloud.points).sum())

    rng = make_rng(seed, STREAM_COUPLING)
    envelope = 1.0 - epsilon
    ys, hits = [], []
    got = 0
    # expected draws per acceptance is 1 / kappa
    kappa = spec.level / envelope
    while got < N:
        m = int(math.ceil((N - got) / max(kappa, 1e-3) * 1.2)) + 8
        y = sample_in_ball(rng, m, spec.center, spec.radius)
        u = envelope * rng.random(m)
        ok = u <= spec.density(y)
        ys.append(y)
        hits.append(ok)
        got += int(ok.sum())
    if N:
        y_all = np.concatenate(ys)
        ok_all = np.concatenate(hits)
        pos = np.flatnonzero(ok_all)[:N]
        L = int(pos[-1]) + 1
        proposals = y_all[:L]
        accepted = y_all[pos]
        waits = np.diff(np.concatenate(([-1], pos))) - 1
    else:
        L = 0
        proposals = accepted = np.empty((0, spec.dim))
        waits = np.empty(0, dtype=np.int64)
    trace = CouplingTrace(
        n=n,
        N_n=N,
        L_n=L,
        accepted=accepted,
        proposals=proposals,
        waiting_times=waits.astype(np.int64),
        epsilon=float(epsilon),
        S_volume=spec.ball_volume,
        p=spec.p,
    )
    return cloud, trace


def coupling_moments(n: int, epsilon: float, S_volume: float, p: float) -> tuple[float, float]:
    """Mean and variance of the number of coupled draws ``L_n``."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    if not 0.0 < S_volume <= 1.0:
        raise ValueError(f"S_volume must lie in (0, 1], got {S_volume!r}")
    env = (1.0 - epsilon) * S_volume
    if not 0.0 < p <= env * (1.0 + 1e-12):
        raise ValueError(f"need 0 < p <= (1 - epsilon)|S| = {env}, got {p!r}")
    mean = n * env
    var = n * env**2 / p * (2.0 - p - p / env)
    return mean, var
