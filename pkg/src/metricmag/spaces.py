"""Canonical test-space generators and homogeneous-space magnitude.

Generators are deterministic given their arguments (and seed, where one is
taken), so emitted matrices are reproducible byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LevelTooLarge, NotTransitive
from .metric_core import FiniteMetricSpace, from_points

MAX_CANTOR_LEVEL = 12


@dataclass(frozen=True)
class HomogeneousSpace:
    """A space with a transitivity certificate.

    The certificate is row-multiset equality of the distance matrix: every
    point sees the same multiset of distances. This is necessary for a
    transitive isometry group and sufficient, for the generators here, for
    the uniform measure to give the magnitude directly. Arbitrary matrices
    can pass the certificate without being truly homogeneous; the
    cross-check against the linear solve in the test suite catches those.
    """

    base: FiniteMetricSpace
    transitive: bool

    @property
    def n(self) -> int:
        return self.base.n


def _row_multisets_equal(dist: np.ndarray) -> bool:
    rows = np.sort(dist, axis=1)
    return bool(np.allclose(rows, rows[0], rtol=0.0, atol=1e-12))


def as_homogeneous(space: FiniteMetricSpace) -> HomogeneousSpace:
    return HomogeneousSpace(base=space, transitive=_row_multisets_equal(space.dist))


def interval_grid(length: float, n_points: int) -> FiniteMetricSpace:
    """Uniform grid of n_points on [0, length], both endpoints included."""
    if n_points < 2:
        raise ValueError("need at least 2 points")
    if not length > 0:
        raise ValueError("length must be positive")
    return from_points(np.linspace(0.0, length, n_points)[:, None])


def cantor_endpoints(level: int) -> FiniteMetricSpace:
    """All 2^(level+1) interval endpoints of the level-k middle-thirds construction."""
    if level < 0:
        raise ValueError("level must be nonnegative")
    if level > MAX_CANTOR_LEVEL:
        raise LevelTooLarge(f"level {level} > {MAX_CANTOR_LEVEL}")
    intervals = [(0.0, 1.0)]
    for _ in range(level):
        intervals = [
            seg
            for a, b in intervals
            for seg in ((a, a + (b - a) / 3.0), (b - (b - a) / 3.0, b))
        ]
    pts = sorted({a for a, _ in intervals} | {b for _, b in intervals})
    return from_points(np.asarray(pts)[:, None])


def circle_uniform(radius: float, n_points: int, metric: str = "geodesic") -> HomogeneousSpace:
    """n_points equally spaced on a circle of the given radius.

    ``geodesic`` distance is radius * angle (the continuum closed form
    applies to it); ``chordal`` is the Euclidean distance in the plane and
    carries ambient coordinates.
    """
    if n_points < 2:
        raise ValueError("need at least 2 points")
    if not radius > 0:
        raise ValueError("radius must be positive")
    k = np.arange(n_points)
    if metric == "geodesic":
        dist = np.empty((n_points, n_points))
        for i in range(n_points):
            step = np.abs(k - i)
            dist[i] = radius * 2.0 * np.pi * np.minimum(step, n_points - step) / n_points
        np.fill_diagonal(dist, 0.0)
        space = FiniteMetricSpace(dist=dist)
    elif metric == "chordal":
        ang = 2.0 * np.pi * k / n_points
        space = from_points(radius * np.column_stack([np.cos(ang), np.sin(ang)]))
    else:
        raise ValueError(f"metric must be 'geodesic' or 'chordal', got {metric!r}")
    return as_homogeneous(space)


def sierpinski_points(level: int) -> FiniteMetricSpace:
    """Vertices of the level-k Sierpinski gasket subdivision (unit side)."""
    if level < 0:
        raise ValueError("level must be nonnegative")
    if level > 8:
        raise LevelTooLarge(f"level {level} > 8")
    tri = [np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3.0) / 2.0]])]
    for _ in range(level):
        tri = [
            t
            for s in tri
            for t in (
                np.array([s[0], (s[0] + s[1]) / 2, (s[0] + s[2]) / 2]),
                np.array([(s[0] + s[1]) / 2, s[1], (s[1] + s[2]) / 2]),
                np.array([(s[0] + s[2]) / 2, (s[1] + s[2]) / 2, s[2]]),
            )
        ]
    pts = np.unique(np.round(np.vstack(tri), 12), axis=0)
    return from_points(pts)


def grid2d(side: float, n_per_side: int) -> FiniteMetricSpace:
    """Uniform n x n grid on a square of the given side."""
    if n_per_side < 2:
        raise ValueError("need at least 2 points per side")
    g = np.linspace(0.0, side, n_per_side)
    pts = np.array([(a, b) for a in g for b in g])
    return from_points(pts)


def random_cloud(n: int, dim: int, seed: int) -> FiniteMetricSpace:
    """n points uniform in the unit cube of the given dimension.

    Deterministic for a fixed seed (PCG64 stream and pure-ufunc distance
    computation), so distance matrices can be hashed as golden files.
    """
    if n < 1 or dim < 1:
        raise ValueError("n and dim must be positive")
    rng = np.random.default_rng(seed)
    return from_points(rng.random((n, dim)))


def homogeneous_magnitude(space: HomogeneousSpace, t: float) -> float:
    """Magnitude of a transitive space from the uniform measure.

    Equals n / sum_j exp(-t*d(a0, a_j)), the finite form of the inverse
    similarity integral against the invariant probability measure. Agrees
    with the weighting solve whenever the certificate is genuine.
    """
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    if not space.transitive:
        raise NotTransitive("row-multiset transitivity certificate is false")
    return space.n / float(np.exp(-t * space.base.dist[0]).sum())


def circle_continuum_magnitude(radius: float, t: float) -> float:
    """Closed-form magnitude of the continuum geodesic circle.

    The inverse of the average similarity against the rotation-invariant
    probability measure: pi*r*t / (1 - exp(-pi*r*t)). This is the limit of
    ``circle_uniform(radius, n, "geodesic")`` magnitudes as n grows.
    """
    if not (radius > 0 and t > 0):
        raise ValueError("radius and t must be positive")
    x = np.pi * radius * t
    return float(x / -np.expm1(-x))
