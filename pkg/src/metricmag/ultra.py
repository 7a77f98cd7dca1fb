"""Ultrametric spaces: validation, ball partitions, and ultramagnitude.

In an ultrametric space the closed balls of a fixed radius partition the
points, so the counting theory is exact: the ultraweighting is 1/(block
size) pointwise, and the ultramagnitude at scale t is the number of blocks
at radius 1/t, an integer. Radius comparisons use d <= r on the stored
values with no tolerance (generator distances are exact binary64 values),
matching the closed-ball convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import NonDecreasingLevels, NotUltrametric
from .metric_core import FiniteMetricSpace


@dataclass(frozen=True)
class UltrametricSpace:
    base: FiniteMetricSpace
    certified: bool = True

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def dist(self) -> np.ndarray:
        return self.base.dist


@dataclass(frozen=True)
class BallPartition:
    """Partition of the points into closed balls of the given radius.

    Blocks are disjoint, cover every index, are internally sorted, and are
    ordered by their minimum element.
    """

    radius: float
    blocks: tuple[tuple[int, ...], ...]

    @property
    def block_count(self) -> int:
        return len(self.blocks)

    def block_of(self, i: int) -> tuple[int, ...]:
        for b in self.blocks:
            if i in b:
                return b
        raise IndexError(i)


def validate_ultrametric(space: FiniteMetricSpace) -> UltrametricSpace:
    """Certify the strong triangle inequality d(a,c) <= max(d(a,b), d(b,c)).

    Exact comparison on stored values; raises NotUltrametric with a
    witnessing triple on failure.
    """
    d = space.dist
    n = space.n
    for j in range(n):
        bound = np.maximum(d[:, j][:, None], d[j, :][None, :])
        bad = d > bound
        if bad.any():
            i, k = np.unravel_index(bad.argmax(), bad.shape)
            raise NotUltrametric(int(i), j, int(k))
    return UltrametricSpace(base=space, certified=True)


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i: int, j: int) -> None:
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            if rj < ri:
                ri, rj = rj, ri
            self.parent[rj] = ri


def ball_partition(space: UltrametricSpace, radius: float) -> BallPartition:
    """Equivalence classes of d <= radius (transitive in ultrametric spaces)."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    if not space.certified:
        raise ValueError("space is not a certified ultrametric space")
    n = space.n
    uf = _UnionFind(n)
    close = space.dist <= radius
    for i in range(n):
        for j in np.flatnonzero(close[i, i + 1:]) + i + 1:
            uf.union(i, int(j))
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(uf.find(i), []).append(i)
    blocks = sorted((tuple(sorted(g)) for g in groups.values()), key=lambda b: b[0])
    return BallPartition(radius=float(radius), blocks=tuple(blocks))


def ultraweighting(space: UltrametricSpace) -> list[Fraction]:
    """Exact weighting for the indicator similarity: w(a) = 1 / |ball(a, 1)|.

    Returned as Fractions so that the defining system and the block-count
    identity hold exactly.
    """
    part = ball_partition(space, 1.0)
    w: list[Fraction] = [Fraction(0)] * space.n
    for block in part.blocks:
        size = len(block)
        for i in block:
            w[i] = Fraction(1, size)
    return w


def ultramagnitude(space: UltrametricSpace, t: float = 1.0) -> int:
    """Number of closed balls of radius 1/t: an integer, nondecreasing in t."""
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    return ball_partition(space, 1.0 / t).block_count


def ultramagnitude_breakpoints(space: UltrametricSpace) -> list[tuple[float, int]]:
    """The step function t -> ultramagnitude as (breakpoint, value) pairs.

    Breakpoints sit at reciprocals of the distinct positive distances; the
    value at breakpoint t holds on the half-open interval down to the
    previous breakpoint (closed balls, so the larger value starts just
    past 1/d). Beyond the last breakpoint the value is n.
    """
    d = space.dist
    distinct = sorted({float(v) for v in d[np.triu_indices(space.n, k=1)]}, reverse=True)
    out = []
    for val in distinct:
        t = 1.0 / val
        out.append((t, ultramagnitude(space, t)))
    return out


def ultrametric_tree(
    depth: int,
    branching: int,
    level_distances,
    seed: int | None = None,
) -> UltrametricSpace:
    """Leaves of a rooted tree; distance = height of the lowest common ancestor.

    ``level_distances[j]`` is the height of internal nodes at depth j (root
    is depth 0) and must be strictly decreasing, which makes the leaf metric
    ultrametric by construction. With a seed, each internal node takes a
    random number of children in 1..branching and its height is jittered
    log-uniformly, staying strictly between the neighboring levels; with no
    seed the tree is the complete ``branching``-ary tree at exactly the
    given heights.
    """
    if depth < 1 or branching < 1:
        raise ValueError("depth and branching must be positive")
    levels = [float(x) for x in level_distances]
    if len(levels) != depth:
        raise ValueError(f"need {depth} level distances, got {len(levels)}")
    if any(b <= 0 for b in levels):
        raise NonDecreasingLevels("level distances must be positive")
    if any(levels[i + 1] >= levels[i] for i in range(depth - 1)):
        raise NonDecreasingLevels("level distances must be strictly decreasing")

    rng = np.random.default_rng(seed) if seed is not None else None

    def node_height(level: int) -> float:
        if rng is None:
            return levels[level]
        # jitter log-uniformly, staying strictly inside the neighboring levels
        lo = np.log(levels[level + 1]) if level + 1 < depth else np.log(levels[level]) - 1.0
        hi = np.log(levels[level - 1]) if level > 0 else np.log(levels[level]) + 1.0
        mid = np.log(levels[level])
        delta = 0.25 * min(mid - lo, hi - mid)
        return float(np.exp(rng.uniform(mid - delta, mid + delta)))

    def grow(level: int) -> np.ndarray:
        """Leaf distance matrix of the subtree rooted at a node of this level."""
        if level == depth:
            return np.zeros((1, 1))
        h = node_height(level)
        width = branching if rng is None else int(rng.integers(1, branching + 1))
        subs = [grow(level + 1) for _ in range(width)]
        n = sum(s.shape[0] for s in subs)
        d = np.full((n, n), h)
        offset = 0
        for s in subs:
            k = s.shape[0]
            d[offset:offset + k, offset:offset + k] = s
            offset += k
        return d

    return UltrametricSpace(base=FiniteMetricSpace(dist=grow(0)), certified=True)
