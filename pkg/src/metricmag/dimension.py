"""Packing/covering numbers and the growth-based dimension estimators.

Covering and packing use ball centers restricted to points of the space.
Both are exact (branch and bound) up to ``EXACT_LIMIT`` points and greedy
bounds beyond, with the exactness recorded on the result. Ball disjointness
for :func:`packing_number` means pairwise center distance > 2*epsilon; the
set-theoretic variant (balls sharing no point of the space) is exposed
separately as :func:`disjoint_ball_packing_number` because the two notions
differ on finite spaces.

Dimension estimates are windowed log-log slopes. A finite-scale fit cannot
distinguish the limsup from the liminf growth exponents, so the estimate
carries the min/max local slopes over the window as proxies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._format import fmt17
from .errors import NoAmbientDimension, SaturatedCurve, WindowTooNarrow
from .metric_core import FiniteMetricSpace

EXACT_LIMIT = 24
MIN_GRID_DECADES = 1.5
R2_TARGET = 0.99
TRIM_FRACTION = 0.2


@dataclass(frozen=True)
class CountResult:
    """An integer count with an exactness flag; compares like an int."""

    value: int
    exact: bool
    centers: tuple[int, ...] = ()

    def __int__(self) -> int:
        return self.value

    __index__ = __int__

    def __eq__(self, other):
        return self.value == int(other)

    def __lt__(self, other):
        return self.value < int(other)

    def __le__(self, other):
        return self.value <= int(other)

    def __gt__(self, other):
        return self.value > int(other)

    def __ge__(self, other):
        return self.value >= int(other)

    def __hash__(self):
        return hash(self.value)


def _bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def _exact_set_cover(sets: list[int], n: int) -> list[int]:
    """Minimum subcollection of bitmask ``sets`` covering {0..n-1}."""
    full = (1 << n) - 1
    # greedy incumbent
    chosen: list[int] = []
    cov = 0
    while cov != full:
        i = max(range(len(sets)), key=lambda i: ((sets[i] | cov).bit_count(), -i))
        chosen.append(i)
        cov |= sets[i]
    best = chosen
    max_size = max(s.bit_count() for s in sets)
    cover_counts = [sum(1 for s in sets if (s >> p) & 1) for p in range(n)]

    def rec(cov: int, used: list[int]):
        nonlocal best
        if cov == full:
            if len(used) < len(best):
                best = used.copy()
            return
        remaining = (full & ~cov).bit_count()
        if len(used) + -(-remaining // max_size) >= len(best):
            return
        p = min((p for p in _bits(full & ~cov)), key=lambda p: cover_counts[p])
        cands = sorted(
            (i for i in range(len(sets)) if (sets[i] >> p) & 1),
            key=lambda i: -((sets[i] & ~cov).bit_count()),
        )
        for i in cands:
            used.append(i)
            rec(cov | sets[i], used)
            used.pop()

    rec(0, [])
    return best


def _max_independent_set(adj: list[int], n: int) -> list[int]:
    """Maximum independent set of the conflict graph given as bitmask rows."""
    best: list[int] = []

    def rec(cand: int, picked: list[int]):
        nonlocal best
        if len(picked) + cand.bit_count() <= len(best):
            return
        if cand == 0:
            if len(picked) > len(best):
                best = picked.copy()
            return
        v = max(_bits(cand), key=lambda v: (adj[v] & cand).bit_count())
        picked.append(v)
        rec(cand & ~adj[v] & ~(1 << v), picked)
        picked.pop()
        rec(cand & ~(1 << v), picked)

    rec((1 << n) - 1, [])
    return sorted(best)


def _greedy_cover(dist: np.ndarray, epsilon: float) -> list[int]:
    n = dist.shape[0]
    cover = (dist <= epsilon).astype(np.float32)
    uncovered = np.ones(n, dtype=np.float32)
    centers: list[int] = []
    while uncovered.any():
        counts = cover @ uncovered
        i = int(counts.argmax())    # ties -> lowest index
        centers.append(i)
        uncovered[cover[i] > 0] = 0.0
    return centers


def covering_number(
    space: FiniteMetricSpace,
    epsilon: float,
    method: str = "auto",
    exact_limit: int = EXACT_LIMIT,
) -> CountResult:
    """Minimum number of closed epsilon-balls centered at points covering all.

    Exact branch-and-bound set cover for n <= ``exact_limit``; greedy upper
    bound beyond (flagged ``exact=False``).
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    n = space.n
    if method not in ("auto", "exact", "greedy"):
        raise ValueError(f"unknown method {method!r}")
    exact = method == "exact" or (method == "auto" and n <= exact_limit)
    if exact:
        masks = [
            int(sum(1 << j for j in np.flatnonzero(space.dist[i] <= epsilon)))
            for i in range(n)
        ]
        centers = _exact_set_cover(masks, n)
        return CountResult(len(centers), True, tuple(sorted(centers)))
    centers = _greedy_cover(space.dist, epsilon)
    return CountResult(len(centers), False, tuple(centers))


def packing_number(
    space: FiniteMetricSpace,
    epsilon: float,
    method: str = "auto",
    exact_limit: int = EXACT_LIMIT,
) -> CountResult:
    """Maximum number of disjoint closed epsilon-balls (centers > 2*epsilon apart).

    Exact maximum-independent-set branch and bound for n <= ``exact_limit``;
    greedy (first-fit) lower bound beyond, flagged ``exact=False``.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    n = space.n
    if method not in ("auto", "exact", "greedy"):
        raise ValueError(f"unknown method {method!r}")
    conflict = space.dist <= 2.0 * epsilon
    exact = method == "exact" or (method == "auto" and n <= exact_limit)
    if exact:
        adj = []
        for i in range(n):
            row = conflict[i].copy()
            row[i] = False
            adj.append(int(sum(1 << j for j in np.flatnonzero(row))))
        centers = _max_independent_set(adj, n)
        return CountResult(len(centers), True, tuple(centers))
    centers: list[int] = []
    for i in range(n):
        if all(not conflict[i, j] for j in centers):
            centers.append(i)
    return CountResult(len(centers), False, tuple(centers))


def disjoint_ball_packing_number(
    space: FiniteMetricSpace,
    epsilon: float,
    method: str = "auto",
    exact_limit: int = EXACT_LIMIT,
) -> CountResult:
    """Maximum number of closed epsilon-balls that share no point of the space.

    This is ball disjointness as subsets of the (finite) space, which is
    weaker than the 2*epsilon center separation of :func:`packing_number`;
    for ultrametric spaces it is the notion under which packing, covering,
    and ultramagnitude coincide at matched radii.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    n = space.n
    balls = space.dist <= epsilon
    conflict = balls @ balls.T > 0   # share at least one point
    exact = method == "exact" or (method == "auto" and n <= exact_limit)
    if exact:
        adj = []
        for i in range(n):
            row = conflict[i].copy()
            row[i] = False
            adj.append(int(sum(1 << j for j in np.flatnonzero(row))))
        centers = _max_independent_set(adj, n)
        return CountResult(len(centers), True, tuple(centers))
    centers: list[int] = []
    for i in range(n):
        if all(not conflict[i, j] for j in centers):
            centers.append(i)
    return CountResult(len(centers), False, tuple(centers))


# --- log-log slope fitting ---

@dataclass(frozen=True)
class DimensionEstimate:
    """Windowed log-log slope with fit diagnostics.

    ``samples`` are the (abscissa, ordinate) pairs of the full input,
    sorted by abscissa; ``window`` is the abscissa range actually fitted.
    ``local_slope_min``/``max`` are finite-difference slopes inside the
    window, reported as rough proxies for the lower/upper growth exponents.
    """

    slope: float
    intercept: float
    window: tuple[float, float]
    r_squared: float
    samples: tuple[tuple[float, float], ...]
    local_slope_min: float
    local_slope_max: float
    n_used: int


def _ols(x: np.ndarray, y: np.ndarray):
    a = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    yhat = a @ coef
    ss_res = float(((y - yhat) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0.0 else max(0.0, 1.0 - ss_res / ss_tot)
    return float(coef[0]), float(coef[1]), r2


def _fit_window(x: np.ndarray, y: np.ndarray, window_policy) -> DimensionEstimate:
    order = np.argsort(x)
    x, y = x[order], y[order]
    k = x.size
    if k < 2:
        raise WindowTooNarrow(f"need at least 2 samples, got {k}")

    if isinstance(window_policy, (tuple, list)) and len(window_policy) == 2:
        lo, hi = float(window_policy[0]), float(window_policy[1])
        keep = (x >= lo) & (x <= hi)
        if keep.sum() < 2:
            raise WindowTooNarrow(f"explicit window [{lo}, {hi}] keeps < 2 samples")
        fits = [(x[keep], y[keep])]
    elif window_policy == "full":
        fits = [(x, y)]
    elif window_policy == "auto":
        fits = []
        for trim in (0.20, 0.15, 0.10, 0.05, 0.0):
            k0 = int(math.floor(k * trim))
            k1 = k - k0
            if k1 - k0 >= 2:
                fits.append((x[k0:k1], y[k0:k1]))
        if not fits:
            raise WindowTooNarrow("auto policy found no fittable window")
    else:
        raise ValueError(f"unknown window policy {window_policy!r}")

    best = None
    for xs, ys in fits:
        slope, intercept, r2 = _ols(xs, ys)
        cand = (slope, intercept, r2, xs, ys)
        if best is None or r2 > best[2]:
            best = cand
        if r2 >= R2_TARGET:
            best = cand
            break
    slope, intercept, r2, xs, ys = best
    dx = np.diff(xs)
    local = np.diff(ys) / np.where(dx == 0, np.nan, dx)
    local = local[np.isfinite(local)]
    return DimensionEstimate(
        slope=slope,
        intercept=intercept,
        window=(float(xs[0]), float(xs[-1])),
        r_squared=r2,
        samples=tuple(zip(x.tolist(), y.tolist())),
        local_slope_min=float(local.min()) if local.size else slope,
        local_slope_max=float(local.max()) if local.size else slope,
        n_used=int(xs.size),
    )


def _require_decades(values: np.ndarray, what: str) -> None:
    span = math.log10(float(values.max()) / float(values.min()))
    if span < MIN_GRID_DECADES * (1.0 - 1e-12):
        raise WindowTooNarrow(
            f"{what} spans {span:.2f} decades; need at least {MIN_GRID_DECADES}"
        )


def minkowski_dimension(
    space: FiniteMetricSpace,
    epsilon_grid,
    window_policy="auto",
    method: str = "auto",
) -> DimensionEstimate:
    """Slope of log N(A, eps) against log(1/eps) over the fitted window.

    The grid must span at least 1.5 decades. For a finite space the estimate
    is only meaningful for epsilon above the minimum spacing (below it the
    covering number saturates at n and the slope flattens to zero).
    """
    eps = np.asarray(epsilon_grid, dtype=float).ravel()
    if eps.size < 2 or not (eps > 0).all():
        raise ValueError("epsilon_grid must hold at least 2 positive values")
    _require_decades(eps, "epsilon grid")
    eps = np.sort(eps)[::-1]
    counts = np.array(
        [covering_number(space, e, method=method).value for e in eps], dtype=float
    )
    return _fit_window(np.log(1.0 / eps), np.log(counts), window_policy)


def _growth_dimension(ts, values, n_points, window_policy) -> DimensionEstimate:
    ts = np.asarray(ts, dtype=float)
    values = np.asarray(values, dtype=float)
    if ts.size < 2:
        raise WindowTooNarrow("curve has fewer than 2 samples")
    _require_decades(ts, "t grid")
    if window_policy == "auto" and n_points:
        keep = values <= 0.5 * n_points
        if keep.sum() < 2:
            raise SaturatedCurve(
                "all samples are saturated (value above half the point count)"
            )
        ts, values = ts[keep], values[keep]
    if (values <= 0).any():
        raise ValueError("curve values must be positive")
    return _fit_window(np.log(ts), np.log(values), window_policy)


def magnitude_dimension(curve, window_policy="auto") -> DimensionEstimate:
    """Growth exponent of the magnitude function from a sampled curve.

    With the auto policy, samples where the magnitude exceeds half the point
    count are dropped first (the finite approximation is saturating there),
    then the usual trim-and-fit window search runs.
    """
    return _growth_dimension(curve.ts, curve.values,
                             getattr(curve, "n_points", 0), window_policy)


def diversity_dimension(curve, window_policy="auto") -> DimensionEstimate:
    """Growth exponent of the diversity function; same windowing rules."""
    return _growth_dimension(curve.ts, curve.values,
                             getattr(curve, "n_points", 0), window_policy)


# --- inequality checkers ---

def _unit_ball_volume(dim: int) -> float:
    return math.pi ** (dim / 2.0) / math.gamma(dim / 2.0 + 1.0)


@dataclass(frozen=True)
class ScalingBoundsReport:
    records: tuple[dict, ...]
    violations: int

    @property
    def passed(self) -> bool:
        return self.violations == 0


def scaling_bounds_check(
    space: FiniteMetricSpace,
    t_pairs=None,
    slack: float = 1e-9,
) -> ScalingBoundsReport:
    """Check |sA|/(t/s) <= |tA| <= (t/s)^dim |sA| for scale pairs t >= s.

    The exponent is the ambient dimension, so the space must carry ambient
    coordinates.
    """
    from .magnitude import magnitude as mag_of

    if space.ambient is None:
        raise NoAmbientDimension("scaling bounds need ambient coordinates")
    dim = space.ambient_dim
    if t_pairs is None:
        t_pairs = [(1.0, 1.5), (1.0, 3.0), (1.0, 10.0)]
    records = []
    violations = 0
    for s, t in t_pairs:
        if not (t >= s > 0):
            raise ValueError(f"pairs must satisfy t >= s > 0, got ({s}, {t})")
        tau = t / s
        m_s = mag_of(space, s)
        m_t = mag_of(space, t)
        lower = m_s / tau
        upper = tau**dim * m_s
        ok = (m_t >= lower * (1.0 - slack)) and (m_t <= upper * (1.0 + slack))
        if not ok:
            violations += 1
        records.append(
            {"s": float(s), "t": float(t), "lower": lower, "magnitude": m_t,
             "upper": upper, "ok": ok}
        )
    return ScalingBoundsReport(records=tuple(records), violations=violations)


@dataclass(frozen=True)
class VolumeBoundReport:
    t: float
    magnitude: float
    bound: float
    margin: float
    passed: bool
    declared_volume: float
    slack: float


def volume_bound_check(
    space: FiniteMetricSpace,
    t: float,
    declared_volume: float,
    slack: float = 0.1,
) -> VolumeBoundReport:
    """Check |tA| >= t^dim vol / (dim! * omega_dim) * (1 - slack).

    ``declared_volume`` is the volume of the continuum set the cloud
    approximates, so the bound is applied with a slack factor; zero volume
    passes trivially.
    """
    from .magnitude import magnitude as mag_of

    if space.ambient is None:
        raise NoAmbientDimension("volume bound needs ambient coordinates")
    if declared_volume < 0:
        raise ValueError("declared_volume must be nonnegative")
    dim = space.ambient_dim
    m = mag_of(space, t)
    bound = (t**dim) * declared_volume / (math.factorial(dim) * _unit_ball_volume(dim))
    bound *= 1.0 - slack
    return VolumeBoundReport(
        t=float(t),
        magnitude=m,
        bound=bound,
        margin=m - bound,
        passed=m >= bound,
        declared_volume=float(declared_volume),
        slack=float(slack),
    )


# --- output formats ---

def write_counts_csv(space: FiniteMetricSpace, epsilon_grid, path,
                     method: str = "auto") -> None:
    """Emit an (epsilon, covering, packing, exact) table."""
    eps = np.sort(np.asarray(epsilon_grid, dtype=float).ravel())[::-1]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epsilon,covering,packing,exact\n")
        for e in eps:
            cov = covering_number(space, e, method=method)
            pack = packing_number(space, e, method=method)
            flag = int(cov.exact and pack.exact)
            fh.write(f"{fmt17(e)},{cov.value},{pack.value},{flag}\n")


def estimate_json(estimate: DimensionEstimate, exact_flags=None) -> dict:
    out = {
        "estimate": estimate.slope,
        "intercept": estimate.intercept,
        "window": list(estimate.window),
        "r2": estimate.r_squared,
        "samples": [list(p) for p in estimate.samples],
        "local_slope_min": estimate.local_slope_min,
        "local_slope_max": estimate.local_slope_max,
        "n_used": estimate.n_used,
    }
    if exact_flags is not None:
        out["exact_flags"] = [bool(f) for f in exact_flags]
    return out
