"""Weightings, magnitude, magnitude functions, and potential-function values.

The central object is the similarity matrix with entries exp(-t*d(i,j)).
Solving (similarity) @ w = 1 gives the weighting; its sum is the magnitude.
Solves go through a cached symmetric positive-definite factorization with a
pivoted-LU fallback, because the matrix is positive definite in exact
arithmetic for Euclidean inputs but can lose definiteness numerically at
small t.
"""

from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from ._format import fmt17
from .errors import (
    IllConditioned,
    IllConditionedWarning,
    NoAmbientDimension,
    QueryTooClose,
    SingularSystem,
    SolveError,
)
from .metric_core import FiniteMetricSpace

DEFAULT_SOLVE_TOLERANCE = 1e-10   # max-norm of (zeta w - 1), relative to 1
WARN_CONDITION = 1e12
REFUSE_CONDITION = 1e14
REFINEMENT_STEPS = 2
THREADS_ENV_VAR = "METRICMAG_THREADS"


@dataclass
class SimilarityMatrix:
    """Matrix exp(-t*d) with a lazily computed, cached factorization.

    Parameters
    ----------
    entries : ndarray
        (n, n) symmetric matrix with unit diagonal, entries in (0, 1].
    t : float
        Scale at which the matrix was built.
    """

    entries: np.ndarray
    t: float
    condition_estimate: float | None = None
    method: str | None = None               # "cholesky" | "lu" after factorization
    _cho: tuple | None = field(default=None, repr=False)
    _lu: tuple | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def factorize(self) -> None:
        """Factor the matrix and estimate its condition number.

        Tries a symmetric positive-definite factorization first, then falls
        back to pivoted LU. Warns above ``WARN_CONDITION`` and refuses above
        ``REFUSE_CONDITION``.
        """
        if self.method is not None:
            return
        anorm = float(np.abs(self.entries).sum(axis=0).max())
        try:
            c, lower = sla.cho_factor(self.entries, lower=True, check_finite=False)
            rcond, info = lapack.dpocon(c, anorm, lower=lower)
            self._cho = (c, lower)
            self.method = "cholesky"
        except np.linalg.LinAlgError:
            lu, piv = sla.lu_factor(self.entries, check_finite=False)
            if np.abs(np.diag(lu)).min() == 0.0:
                raise SingularSystem(
                    "similarity matrix is numerically singular (zero pivot)",
                    condition_estimate=float("inf"),
                )
            rcond, info = lapack.dgecon(lu, anorm, norm="1")
            self._lu = (lu, piv)
            self.method = "lu"
        if rcond == 0.0:
            raise SingularSystem(
                "similarity matrix is numerically singular (rcond = 0)",
                condition_estimate=float("inf"),
            )
        self.condition_estimate = 1.0 / float(rcond)
        if self.condition_estimate > REFUSE_CONDITION:
            self.method = None
            self._cho = self._lu = None
            raise IllConditioned(self.condition_estimate, REFUSE_CONDITION)
        if self.condition_estimate > WARN_CONDITION:
            warnings.warn(
                f"similarity matrix condition estimate {self.condition_estimate:.3e} "
                f"exceeds {WARN_CONDITION:.0e}; results may lose accuracy",
                IllConditionedWarning,
                stacklevel=2,
            )

    def _raw_solve(self, b: np.ndarray) -> np.ndarray:
        if self.method == "cholesky":
            return sla.cho_solve(self._cho, b, check_finite=False)
        return sla.lu_solve(self._lu, b, check_finite=False)

    def solve(self, b: np.ndarray, tolerance: float = DEFAULT_SOLVE_TOLERANCE):
        """Solve (entries) x = b with iterative refinement.

        Returns
        -------
        x : ndarray
        residual : float
            Final max-norm of entries@x - b relative to max(1, |b|_inf).
        """
        self.factorize()
        b = np.asarray(b, dtype=float)
        x = self._raw_solve(b)
        scale = max(1.0, float(np.abs(b).max()))
        residual = float(np.abs(self.entries @ x - b).max()) / scale
        for _ in range(REFINEMENT_STEPS):
            if residual <= tolerance:
                break
            r = b - self.entries @ x
            x = x + self._raw_solve(r)
            residual = float(np.abs(self.entries @ x - b).max()) / scale
        if residual > tolerance:
            raise SingularSystem(
                f"solve residual {residual:.3e} above tolerance {tolerance:.1e} "
                "after refinement",
                condition_estimate=self.condition_estimate,
            )
        return x, residual


def similarity_matrix(space: FiniteMetricSpace, t: float) -> SimilarityMatrix:
    """Build exp(-t*d) for the space; factorization deferred to first solve."""
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    return SimilarityMatrix(entries=np.exp(-t * space.dist), t=float(t))


@dataclass(frozen=True)
class Weighting:
    """Solution of (similarity) w = 1 at scale t."""

    w: np.ndarray
    residual: float
    t: float
    condition_estimate: float | None = None
    method: str | None = None

    @property
    def magnitude(self) -> float:
        return float(self.w.sum())


def weighting(
    space: FiniteMetricSpace, t: float, tolerance: float = DEFAULT_SOLVE_TOLERANCE
) -> Weighting:
    """Solve the weighting equation at scale t.

    Raises
    ------
    SingularSystem
        Numerically singular matrix, or residual unattainable.
    IllConditioned
        Condition estimate beyond the refusal threshold.
    """
    sim = similarity_matrix(space, t)
    w, residual = sim.solve(np.ones(space.n), tolerance=tolerance)
    return Weighting(
        w=w,
        residual=residual,
        t=float(t),
        condition_estimate=sim.condition_estimate,
        method=sim.method,
    )


def magnitude(space: FiniteMetricSpace, t: float = 1.0,
              tolerance: float = DEFAULT_SOLVE_TOLERANCE) -> float:
    """Magnitude at scale t: the sum of the weighting."""
    return weighting(space, t, tolerance=tolerance).magnitude


@dataclass(frozen=True)
class MagnitudeCurve:
    """Samples of the magnitude function t -> |tA|.

    ``samples`` holds the successful (t, magnitude) pairs; ``solver_meta``
    has one record per requested t, including failures.
    """

    ts: np.ndarray
    values: np.ndarray
    residuals: np.ndarray
    space_id: str
    n_points: int
    solver_meta: tuple[dict, ...] = ()

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.ts.tolist(), self.values.tolist()))


def _check_grid(grid) -> np.ndarray:
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or g.size == 0:
        raise ValueError("grid must be a nonempty 1-D sequence")
    if not (g > 0).all():
        raise ValueError("grid values must be positive")
    if g.size > 1 and not (np.diff(g) > 0).all():
        raise ValueError("grid must be strictly increasing")
    return g


def _default_threads() -> int:
    raw = os.environ.get(THREADS_ENV_VAR, "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def magnitude_function(
    space: FiniteMetricSpace,
    t_grid,
    tolerance: float = DEFAULT_SOLVE_TOLERANCE,
    threads: int | None = None,
    space_id: str | None = None,
) -> MagnitudeCurve:
    """Sample the magnitude function on an increasing grid of scales.

    Samples are independent solves; ``threads > 1`` runs them in a thread
    pool (LAPACK drops the GIL). Per-sample solve failures are recorded in
    ``solver_meta`` rather than aborting the sweep.
    """
    grid = _check_grid(t_grid)
    if threads is None:
        threads = _default_threads()

    def one(t: float):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IllConditionedWarning)
            try:
                wt = weighting(space, t, tolerance=tolerance)
                return {"t": t, "magnitude": wt.magnitude, "residual": wt.residual,
                        "condition": wt.condition_estimate, "error": None}
            except SolveError as exc:
                return {"t": t, "magnitude": None, "residual": None,
                        "condition": getattr(exc, "condition_estimate", None),
                        "error": f"{type(exc).__name__}: {exc}"}

    if threads > 1 and grid.size > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            meta = list(pool.map(one, grid.tolist()))
    else:
        meta = [one(t) for t in grid.tolist()]

    good = [m for m in meta if m["error"] is None]
    return MagnitudeCurve(
        ts=np.array([m["t"] for m in good]),
        values=np.array([m["magnitude"] for m in good]),
        residuals=np.array([m["residual"] for m in good]),
        space_id=space_id or f"space-n{space.n}",
        n_points=space.n,
        solver_meta=tuple(meta),
    )


# --- potential function ---

def potential(
    space: FiniteMetricSpace,
    t: float,
    query_dists,
    weights: Weighting | None = None,
) -> np.ndarray:
    """Potential values h(x) = sum_a exp(-t*d(x,a)) w(a) at query points.

    ``query_dists`` is an (m, n) matrix of distances from m query points to
    the n points of the space (metric-agnostic on purpose; for Euclidean
    clouds see :func:`potential_at_points`).
    """
    q = np.atleast_2d(np.asarray(query_dists, dtype=float))
    if q.shape[1] != space.n:
        raise ValueError(f"query_dists must have {space.n} columns, got {q.shape[1]}")
    if q.min() < 0:
        raise ValueError("query distances must be nonnegative")
    if weights is None:
        weights = weighting(space, t)
    return np.exp(-t * q) @ weights.w


def potential_at_points(
    space: FiniteMetricSpace,
    t: float,
    points,
    weights: Weighting | None = None,
) -> np.ndarray:
    """Euclidean convenience wrapper: query distances from ambient coordinates."""
    if space.ambient is None:
        raise NoAmbientDimension("space has no ambient coordinates")
    x = np.atleast_2d(np.asarray(points, dtype=float))
    if x.shape[1] != space.ambient.shape[1]:
        raise ValueError(
            f"query points have dimension {x.shape[1]}, space has {space.ambient.shape[1]}"
        )
    diff = x[:, None, :] - space.ambient[None, :, :]
    q = np.sqrt((diff * diff).sum(axis=-1))
    return potential(space, t, q, weights=weights)


@dataclass(frozen=True)
class PdeResidual1D:
    """Central-difference residual of h'' = t^2 h off a 1-D space."""

    max_residual: float
    residuals: np.ndarray
    potentials: np.ndarray
    query_xs: np.ndarray
    step: float
    t: float


def pde_residual_1d(
    space: FiniteMetricSpace, t: float, query_xs, step: float
) -> PdeResidual1D:
    """Check the 1-D differential identity satisfied by the potential.

    Off the space, the potential of a 1-D set satisfies h'' = t^2 h. The
    residual reported is max over queries of
    |(h(x-s) - 2h(x) + h(x+s))/s^2 - t^2 h(x)|, which at t = 1 is the
    second-difference check of h'' - h = 0.

    Raises
    ------
    QueryTooClose
        Some query is within 3*step of a point of the space.
    NoAmbientDimension
        The space has no 1-D ambient coordinates.
    """
    if space.ambient is None or space.ambient.shape[1] != 1:
        raise NoAmbientDimension("pde_residual_1d needs 1-D ambient coordinates")
    if not step > 0:
        raise ValueError("step must be positive")
    xs = np.sort(np.asarray(query_xs, dtype=float).ravel())
    a = space.ambient[:, 0]
    gap = np.abs(xs[:, None] - a[None, :]).min(axis=1)
    if (gap <= 3 * step).any():
        bad = float(xs[int(np.argmin(gap))])
        raise QueryTooClose(f"query {bad!r} is within 3*step of the space")

    wt = weighting(space, t)
    stencil = np.concatenate([xs - step, xs, xs + step])
    q = np.abs(stencil[:, None] - a[None, :])
    h = potential(space, t, q, weights=wt)
    m = xs.size
    hm, h0, hp = h[:m], h[m:2 * m], h[2 * m:]
    residuals = np.abs((hm - 2 * h0 + hp) / step**2 - t * t * h0)
    return PdeResidual1D(
        max_residual=float(residuals.max()),
        residuals=residuals,
        potentials=h0,
        query_xs=xs,
        step=float(step),
        t=float(t),
    )


# --- curve output formats ---

def write_magnitude_csv(curve: MagnitudeCurve, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,magnitude,residual\n")
        for t, v, r in zip(curve.ts, curve.values, curve.residuals):
            fh.write(f"{fmt17(t)},{fmt17(v)},{fmt17(r)}\n")


def magnitude_curve_json(curve: MagnitudeCurve) -> dict:
    return {
        "space_id": curve.space_id,
        "n_points": curve.n_points,
        "samples": [
            {"t": float(t), "magnitude": float(v), "residual": float(r)}
            for t, v, r in zip(curve.ts, curve.values, curve.residuals)
        ],
        "errors": [
            {"t": m["t"], "error": m["error"]}
            for m in curve.solver_meta
            if m["error"] is not None
        ],
    }
