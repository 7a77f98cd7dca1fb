"""Maximum diversity: minimize the similarity quadratic form over the simplex.

The value is 1 / min_{mu in simplex} mu' Z mu with Z = exp(-t*d). The solver
is Frank-Wolfe with away steps and exact line search; the linear minimization
oracle on the simplex is a coordinate argmin, with ties broken by lowest
index so runs are deterministic. The duality gap 2*(mu'Z mu - min_i (Z mu)_i)
is the convergence certificate.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ._format import fmt17
from .errors import SolveError
from .metric_core import FiniteMetricSpace

DEFAULT_GAP_TOLERANCE = 1e-10
DEFAULT_MAX_ITERATIONS = 100_000
_DRIFT_INTERVAL = 1024   # refresh Z@mu from scratch this often
_DROP_EPS = 1e-16        # weights below this are removed from the support


@dataclass(frozen=True)
class DiversityResult:
    """Outcome of one diversity solve.

    ``converged`` is False when the iteration cap was hit; the best iterate
    is still returned with its gap. ``certified_global`` is False when the
    similarity matrix is not numerically positive semidefinite, in which
    case the iterate is only a stationary point.
    """

    mu: np.ndarray
    value: float
    t: float
    iterations: int
    duality_gap: float
    converged: bool = True
    certified_global: bool = True


def _fw_minimize(Z: np.ndarray, tolerance: float, max_iterations: int,
                 mu0: np.ndarray | None):
    """Away-step Frank-Wolfe for min mu'Z mu over the probability simplex."""
    n = Z.shape[0]
    if mu0 is not None and mu0.shape == (n,) and mu0.min() >= 0 and mu0.sum() > 0:
        mu = np.asarray(mu0, dtype=float).copy()
        mu /= mu.sum()
    else:
        mu = np.zeros(n)
        mu[0] = 1.0
    Zmu = Z @ mu
    q = float(mu @ Zmu)
    it = 0
    while it < max_iterations:
        it += 1
        g = 2.0 * Zmu
        g_mu = 2.0 * q              # g @ mu for mu on the simplex
        s = int(np.argmin(g))       # LMO; argmin takes the lowest index on ties
        gap = g_mu - g[s]
        if gap <= tolerance:
            # certify against drift before accepting
            Zmu = Z @ mu
            q = float(mu @ Zmu)
            gap = 2.0 * q - 2.0 * float(Zmu.min())
            if gap <= tolerance:
                break
            continue
        support = np.flatnonzero(mu > 0)
        v = int(support[np.argmax(g[support])])
        if (g_mu - g[s]) >= (g[v] - g_mu):
            # toward step: d = e_s - mu
            d_Zd = 1.0 - 2.0 * Zmu[s] + q
            g_d = g[s] - g_mu
            gamma_max = 1.0
            gamma = gamma_max if d_Zd <= 0 else min(gamma_max, -g_d / (2.0 * d_Zd))
            mu *= 1.0 - gamma
            mu[s] += gamma
            Zmu *= 1.0 - gamma
            Zmu += gamma * Z[:, s]
        else:
            # away step: d = mu - e_v
            d_Zd = q - 2.0 * Zmu[v] + 1.0
            g_d = g_mu - g[v]
            alpha = mu[v]
            gamma_max = alpha / (1.0 - alpha) if alpha < 1.0 else 1.0
            gamma = gamma_max if d_Zd <= 0 else min(gamma_max, -g_d / (2.0 * d_Zd))
            mu *= 1.0 + gamma
            mu[v] -= gamma
            if mu[v] < _DROP_EPS:
                mu[v] = 0.0
            Zmu *= 1.0 + gamma
            Zmu -= gamma * Z[:, v]
        q += gamma * g_d + gamma * gamma * d_Zd
        if it % _DRIFT_INTERVAL == 0:
            Zmu = Z @ mu
            q = float(mu @ Zmu)

    mu = np.clip(mu, 0.0, None)
    mu /= mu.sum()
    Zmu = Z @ mu
    q = float(mu @ Zmu)
    gap = 2.0 * q - 2.0 * float(Zmu.min())
    return mu, q, gap, it


def max_diversity(
    space: FiniteMetricSpace,
    t: float = 1.0,
    tolerance: float = DEFAULT_GAP_TOLERANCE,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    mu0: np.ndarray | None = None,
) -> DiversityResult:
    """Maximize diversity at scale t.

    Parameters
    ----------
    tolerance : float
        Target duality gap of the simplex quadratic program.
    max_iterations : int
        Iteration cap; hitting it returns the best iterate flagged
        ``converged=False`` instead of raising.
    mu0 : ndarray, optional
        Warm-start distribution (used by the t-grid sweep).
    """
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    Z = np.exp(-t * space.dist)
    try:
        np.linalg.cholesky(Z)
        convex = True
    except np.linalg.LinAlgError:
        convex = False
    mu, q, gap, it = _fw_minimize(Z, tolerance, max_iterations, mu0)
    return DiversityResult(
        mu=mu,
        value=1.0 / q,
        t=float(t),
        iterations=it,
        duality_gap=gap,
        converged=gap <= tolerance,
        certified_global=convex,
    )


def brute_force_diversity(space: FiniteMetricSpace, t: float = 1.0,
                          max_points: int = 12) -> DiversityResult:
    """Active-set oracle: solve the equality-constrained system on every
    support subset and keep the best feasible stationary point.

    Exponential in n; intended as an independent check for small spaces.
    """
    n = space.n
    if n > max_points:
        raise ValueError(f"brute force limited to n <= {max_points}, got {n}")
    Z = np.exp(-t * space.dist)
    best_q, best_mu = None, None
    for r in range(1, n + 1):
        for sub in itertools.combinations(range(n), r):
            idx = list(sub)
            k = len(idx)
            kkt = np.zeros((k + 1, k + 1))
            kkt[:k, :k] = 2.0 * Z[np.ix_(idx, idx)]
            kkt[:k, k] = 1.0
            kkt[k, :k] = 1.0
            rhs = np.zeros(k + 1)
            rhs[k] = 1.0
            try:
                sol = np.linalg.solve(kkt, rhs)
            except np.linalg.LinAlgError:
                continue
            m = sol[:k]
            if (m < -1e-12).any():
                continue
            mu = np.zeros(n)
            mu[idx] = np.clip(m, 0.0, None)
            mu /= mu.sum()
            q = float(mu @ Z @ mu)
            if best_q is None or q < best_q:
                best_q, best_mu = q, mu
    return DiversityResult(
        mu=best_mu,
        value=1.0 / best_q,
        t=float(t),
        iterations=0,
        duality_gap=0.0,
        converged=True,
        certified_global=True,
    )


@dataclass(frozen=True)
class DiversityCurve:
    """Samples of the diversity function t -> |tA|_+."""

    ts: np.ndarray
    values: np.ndarray
    gaps: np.ndarray
    iterations: np.ndarray
    space_id: str
    n_points: int
    converged: np.ndarray = None
    mus: tuple | None = None

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.ts.tolist(), self.values.tolist()))


def diversity_function(
    space: FiniteMetricSpace,
    t_grid,
    tolerance: float = DEFAULT_GAP_TOLERANCE,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    warm_start: bool = True,
    keep_mu: bool = False,
    space_id: str | None = None,
) -> DiversityCurve:
    """Sweep the diversity solve over an increasing t-grid.

    Each sample warm-starts from the previous optimum (optimal supports
    change slowly in t); disable ``warm_start`` to make samples independent.
    """
    from .magnitude import _check_grid

    grid = _check_grid(t_grid)
    ts, values, gaps, its, conv, mus = [], [], [], [], [], []
    mu_prev = None
    for t in grid.tolist():
        res = max_diversity(space, t, tolerance=tolerance,
                            max_iterations=max_iterations, mu0=mu_prev)
        if warm_start:
            mu_prev = res.mu
        ts.append(t)
        values.append(res.value)
        gaps.append(res.duality_gap)
        its.append(res.iterations)
        conv.append(res.converged)
        if keep_mu:
            mus.append(res.mu)
    return DiversityCurve(
        ts=np.array(ts),
        values=np.array(values),
        gaps=np.array(gaps),
        iterations=np.array(its, dtype=int),
        space_id=space_id or f"space-n{space.n}",
        n_points=space.n,
        converged=np.array(conv, dtype=bool),
        mus=tuple(mus) if keep_mu else None,
    )


@dataclass(frozen=True)
class ComparabilityReport:
    """Per-scale ratios magnitude/diversity with a summary maximum.

    The max ratio is an observed lower bound on the comparability constant
    for the ambient dimension; it is reported, never asserted against a
    theoretical value.
    """

    ts: np.ndarray
    magnitudes: np.ndarray
    diversities: np.ndarray
    ratios: np.ndarray
    max_ratio: float
    min_ratio: float
    tolerance: float

    @property
    def violations(self) -> int:
        """Count of ratios below 1 - 10*tolerance (should be zero)."""
        return int((self.ratios < 1.0 - 10.0 * self.tolerance).sum())


def comparability_report(
    space: FiniteMetricSpace,
    t_grid,
    tolerance: float = DEFAULT_GAP_TOLERANCE,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> ComparabilityReport:
    """Compare magnitude against maximum diversity across scales."""
    from .magnitude import magnitude as mag_of

    curve = diversity_function(space, t_grid, tolerance=tolerance,
                               max_iterations=max_iterations)
    mags = np.array([mag_of(space, t) for t in curve.ts])
    ratios = mags / curve.values
    return ComparabilityReport(
        ts=curve.ts,
        magnitudes=mags,
        diversities=curve.values,
        ratios=ratios,
        max_ratio=float(ratios.max()),
        min_ratio=float(ratios.min()),
        tolerance=tolerance,
    )


def write_diversity_csv(curve: DiversityCurve, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,diversity,gap,iterations\n")
        for t, v, g, i in zip(curve.ts, curve.values, curve.gaps, curve.iterations):
            fh.write(f"{fmt17(t)},{fmt17(v)},{fmt17(g)},{int(i)}\n")


def diversity_curve_json(curve: DiversityCurve, include_mu: bool = False) -> dict:
    out = {
        "space_id": curve.space_id,
        "n_points": curve.n_points,
        "samples": [
            {"t": float(t), "diversity": float(v), "gap": float(g),
             "iterations": int(i), "converged": bool(c)}
            for t, v, g, i, c in zip(curve.ts, curve.values, curve.gaps,
                                     curve.iterations, curve.converged)
        ],
    }
    if include_mu and curve.mus is not None:
        for rec, mu in zip(out["samples"], curve.mus):
            rec["mu"] = [float(x) for x in mu]
    return out
