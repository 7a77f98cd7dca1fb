"""Finite metric spaces: construction, validation, rescaling, definiteness tests.

A space is an immutable n-by-n distance matrix with optional point labels and
optional ambient Euclidean coordinates. All operations here are pure functions
of their inputs; validated spaces are safe to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AsymmetricMatrix,
    DimensionMismatch,
    DuplicatePoint,
    NegativeDistance,
    TriangleViolation,
    ZeroOffDiagonal,
)

TRIANGLE_TOLERANCE = 1e-9       # absolute, on the matrix normalized by its max entry
DEFINITENESS_TOLERANCE = 1e-12  # relative to the largest eigenvalue magnitude
NEGATIVE_TYPE_T_GRID = np.geomspace(0.01, 100.0, 20)  # diagnostic sweep only


@dataclass(frozen=True, eq=False)
class FiniteMetricSpace:
    """A validated finite metric space.

    Attributes
    ----------
    dist : ndarray
        Symmetric (n, n) matrix of nonnegative distances, zero diagonal.
    labels : tuple of str, optional
        Point identifiers.
    ambient : ndarray, optional
        (n, d) Euclidean coordinates when the space came from a point cloud;
        pairwise Euclidean distances of ``ambient`` equal ``dist``.
    """

    dist: np.ndarray
    labels: tuple[str, ...] | None = None
    ambient: np.ndarray | None = None

    def __post_init__(self):
        d = np.ascontiguousarray(np.asarray(self.dist, dtype=float))
        d.setflags(write=False)
        object.__setattr__(self, "dist", d)
        if self.ambient is not None:
            a = np.ascontiguousarray(np.asarray(self.ambient, dtype=float))
            a.setflags(write=False)
            object.__setattr__(self, "ambient", a)
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(str(x) for x in self.labels))

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    @property
    def ambient_dim(self) -> int | None:
        return None if self.ambient is None else self.ambient.shape[1]

    @property
    def diameter(self) -> float:
        return float(self.dist.max())

    @property
    def min_spacing(self) -> float:
        """Smallest off-diagonal distance (inf for a single point)."""
        if self.n < 2:
            return float("inf")
        off = self.dist[~np.eye(self.n, dtype=bool)]
        return float(off.min())

    def subspace(self, indices) -> "FiniteMetricSpace":
        """Restriction to a subset of points (order preserved)."""
        idx = np.asarray(indices, dtype=int)
        return FiniteMetricSpace(
            dist=self.dist[np.ix_(idx, idx)],
            labels=None if self.labels is None else tuple(self.labels[i] for i in idx),
            ambient=None if self.ambient is None else self.ambient[idx],
        )


@dataclass(frozen=True)
class ScaledSpace:
    """The space with all distances multiplied by ``t``; matrix built lazily."""

    base: FiniteMetricSpace
    t: float

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError(f"scale factor must be positive, got {self.t}")

    @property
    def materialized_matrix(self) -> np.ndarray:
        return self.t * self.base.dist

    def as_space(self) -> FiniteMetricSpace:
        return FiniteMetricSpace(
            dist=self.materialized_matrix,
            labels=self.base.labels,
            ambient=None if self.base.ambient is None else self.t * self.base.ambient,
        )


def rescale(space: FiniteMetricSpace, t: float) -> ScaledSpace:
    return ScaledSpace(base=space, t=float(t))


def validate(matrix, tolerance: float = TRIANGLE_TOLERANCE, labels=None) -> FiniteMetricSpace:
    """Validate a candidate distance matrix and wrap it as a space.

    The symmetry, diagonal, and sign checks use ``tolerance`` relative to the
    largest entry; the triangle inequality is checked with absolute slack
    ``tolerance`` on the matrix normalized by its max entry (floating-point
    sums of exact distances can violate the exact inequality).

    Raises
    ------
    AsymmetricMatrix, NegativeDistance, ZeroOffDiagonal, TriangleViolation
    """
    d = np.asarray(matrix, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError(f"distance matrix must be square, got shape {d.shape}")
    if not np.isfinite(d).all():
        raise ValueError("distance matrix has non-finite entries")
    n = d.shape[0]
    scale = float(d.max()) if n > 1 else 0.0

    asym = np.abs(d - d.T).max() if n > 1 else 0.0
    if asym > tolerance * max(scale, 1.0):
        i, j = np.unravel_index(np.abs(d - d.T).argmax(), d.shape)
        raise AsymmetricMatrix(
            f"entries ({i},{j}) and ({j},{i}) differ by {asym:.3e}"
        )
    d = 0.5 * (d + d.T)  # enforce exact symmetry within tolerance

    if np.abs(np.diag(d)).max(initial=0.0) > tolerance * max(scale, 1.0):
        raise NegativeDistance("diagonal entries must be zero")
    np.fill_diagonal(d, 0.0)

    if d.min() < 0.0:
        i, j = np.unravel_index(d.argmin(), d.shape)
        raise NegativeDistance(f"negative distance {d[i, j]!r} at ({i},{j})")

    off = ~np.eye(n, dtype=bool)
    if n > 1 and d[off].min() == 0.0:
        ij = np.argwhere((d == 0.0) & off)[0]
        raise ZeroOffDiagonal(int(ij[0]), int(ij[1]))

    if n > 2 and scale > 0.0:
        dn = d / scale
        for j in range(n):
            excess = dn - (dn[:, j][:, None] + dn[j, :][None, :])
            worst = excess.max()
            if worst > tolerance:
                i, k = np.unravel_index(excess.argmax(), excess.shape)
                raise TriangleViolation(int(i), j, int(k), float(worst))

    return FiniteMetricSpace(dist=d, labels=labels)


def pairwise_distances(coords: np.ndarray, chunk: int = 256) -> np.ndarray:
    """Euclidean distance matrix via direct broadcasting, chunked by rows.

    Avoids the dot-product trick so results are pure ufunc arithmetic
    (deterministic across BLAS builds).
    """
    x = np.asarray(coords, dtype=float)
    n = x.shape[0]
    out = np.empty((n, n))
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        diff = x[lo:hi, None, :] - x[None, :, :]
        np.sqrt((diff * diff).sum(axis=-1), out=out[lo:hi])
    # exact symmetry and zero diagonal regardless of rounding
    out = np.minimum(out, out.T)
    np.fill_diagonal(out, 0.0)
    return out


def from_points(coords, labels=None) -> FiniteMetricSpace:
    """Build a space from a point cloud (pairwise Euclidean distances).

    Raises
    ------
    DimensionMismatch
        Ragged input (vectors of unequal dimension).
    DuplicatePoint
        Two identical coordinate vectors.
    """
    try:
        x = np.asarray(coords, dtype=float)
    except ValueError as exc:
        raise DimensionMismatch(str(exc)) from exc
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] == 0:
        raise DimensionMismatch(f"expected a nonempty (n, d) array, got shape {x.shape}")
    if not np.isfinite(x).all():
        raise ValueError("coordinates have non-finite entries")

    d = pairwise_distances(x)
    n = x.shape[0]
    if n > 1:
        off = ~np.eye(n, dtype=bool)
        if d[off].min() == 0.0:
            ij = np.argwhere((d == 0.0) & off)[0]
            raise DuplicatePoint(f"points {ij[0]} and {ij[1]} coincide")
    return FiniteMetricSpace(dist=d, labels=labels, ambient=x)


# --- definiteness ---

@dataclass(frozen=True)
class DefinitenessReport:
    """Eigenvalue-based test outcome; truthy iff the test passed."""

    passed: bool
    min_eigenvalue: float
    max_eigenvalue: float
    tolerance: float
    t: float | None = None

    def __bool__(self) -> bool:
        return self.passed


def is_positive_definite(
    space: FiniteMetricSpace, t: float, tolerance: float = DEFINITENESS_TOLERANCE
) -> DefinitenessReport:
    """Test positive definiteness of the similarity matrix exp(-t*d).

    Uses a full symmetric eigendecomposition (the margin is wanted for
    diagnostics). True iff the smallest eigenvalue exceeds
    ``-tolerance * largest eigenvalue``.
    """
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    z = np.exp(-t * space.dist)
    ev = np.linalg.eigvalsh(z)
    lo, hi = float(ev[0]), float(ev[-1])
    return DefinitenessReport(
        passed=lo > -tolerance * hi,
        min_eigenvalue=lo,
        max_eigenvalue=hi,
        tolerance=tolerance,
        t=float(t),
    )


def is_negative_type(
    space: FiniteMetricSpace, tolerance: float = DEFINITENESS_TOLERANCE
) -> DefinitenessReport:
    """Test whether the space is of negative type.

    Equivalent to the similarity matrix being positive semidefinite at every
    scale; decided here by positive semidefiniteness of the centered matrix
    -J d J / 2 with J the centering projector (conditional negative
    definiteness of the distance matrix). The per-scale eigenvalue sweep in
    the test suite is a consistency diagnostic only; this is the
    authoritative answer.
    """
    n = space.n
    j = np.eye(n) - np.ones((n, n)) / n
    b = -0.5 * (j @ space.dist @ j)
    b = 0.5 * (b + b.T)
    ev = np.linalg.eigvalsh(b)
    lo, hi = float(ev[0]), float(ev[-1])
    return DefinitenessReport(
        passed=lo > -tolerance * max(hi, 1.0),
        min_eigenvalue=lo,
        max_eigenvalue=hi,
        tolerance=tolerance,
    )


# --- file ingestion (all parsing of the standard formats lives here) ---

def _numeric_rows(path) -> tuple[list[list[float]], list[str] | None]:
    """Parse a CSV of floats; '#' comments allowed; optional single header row."""
    rows: list[list[float]] = []
    header: list[str] | None = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            cells = [c.strip() for c in line.split(",")]
            try:
                rows.append([float(c) for c in cells])
            except ValueError:
                if not rows and header is None:
                    header = cells
                else:
                    raise ValueError(f"{path}:{lineno}: non-numeric row {cells!r}")
    return rows, header


def load_points_csv(path) -> FiniteMetricSpace:
    """Read a point cloud (one point per row, columns = coordinates)."""
    rows, _header = _numeric_rows(path)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise DimensionMismatch(f"{path}: rows have differing column counts {sorted(widths)}")
    return from_points(np.asarray(rows))


def load_distance_csv(path, tolerance: float = TRIANGLE_TOLERANCE) -> FiniteMetricSpace:
    """Read and validate an n-by-n distance matrix from CSV."""
    rows, _header = _numeric_rows(path)
    return validate(np.asarray(rows), tolerance=tolerance)


def load_distance_json(path, tolerance: float = TRIANGLE_TOLERANCE) -> FiniteMetricSpace:
    """Read and validate a distance matrix from JSON {"n": int, "dist": [[...]]}."""
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    if not isinstance(obj, dict) or "dist" not in obj:
        raise ValueError(f"{path}: expected an object with a 'dist' key")
    d = np.asarray(obj["dist"], dtype=float)
    if "n" in obj and int(obj["n"]) != d.shape[0]:
        raise ValueError(f"{path}: 'n'={obj['n']} does not match matrix size {d.shape[0]}")
    return validate(d, tolerance=tolerance)


def write_points_csv(space: FiniteMetricSpace, path) -> None:
    from ._format import fmt17

    if space.ambient is None:
        raise ValueError("space has no ambient coordinates to write")
    with open(path, "w", encoding="utf-8") as fh:
        for row in space.ambient:
            fh.write(",".join(fmt17(v) for v in row) + "\n")


def write_distance_json(space: FiniteMetricSpace, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"n": space.n, "dist": space.dist.tolist()}, fh)
        fh.write("\n")
