"""Exception hierarchy shared across the library."""


class MetricMagError(Exception):
    """Base class for all library errors."""


# --- metric construction / validation ---

class MetricValidationError(MetricMagError):
    """A candidate distance matrix fails a metric axiom."""


class AsymmetricMatrix(MetricValidationError):
    pass


class NegativeDistance(MetricValidationError):
    pass


class ZeroOffDiagonal(MetricValidationError):
    """Two distinct indices at distance zero (duplicate points)."""

    def __init__(self, i: int, j: int):
        self.pair = (i, j)
        super().__init__(f"off-diagonal zero distance between points {i} and {j}")


class TriangleViolation(MetricValidationError):
    """Triangle inequality fails; carries the witnessing index triple."""

    def __init__(self, i: int, j: int, k: int, excess: float):
        self.triple = (i, j, k)
        self.excess = excess
        super().__init__(
            f"d({i},{k}) > d({i},{j}) + d({j},{k}) by {excess:.3e} (normalized)"
        )


class DuplicatePoint(MetricValidationError):
    pass


class DimensionMismatch(MetricValidationError):
    pass


# --- linear solves ---

class SolveError(MetricMagError):
    """Failure while solving the similarity system."""


class SingularSystem(SolveError):
    def __init__(self, message: str, condition_estimate: float | None = None):
        self.condition_estimate = condition_estimate
        super().__init__(message)


class IllConditioned(SolveError):
    """Condition estimate too large to trust the solution."""

    def __init__(self, condition_estimate: float, limit: float):
        self.condition_estimate = condition_estimate
        self.limit = limit
        super().__init__(
            f"similarity matrix condition estimate {condition_estimate:.3e} "
            f"exceeds {limit:.1e}; refusing to solve"
        )


class IllConditionedWarning(UserWarning):
    """Condition estimate above the warning threshold but below refusal."""


class QueryTooClose(MetricMagError):
    """A finite-difference query point sits too close to the space."""


# --- dimension estimation ---

class WindowTooNarrow(MetricMagError):
    """The fitting grid spans too small a range to estimate a slope."""


class SaturatedCurve(MetricMagError):
    """All curve samples are in the saturation regime (value near n)."""


class NoAmbientDimension(MetricMagError):
    """Operation needs ambient Euclidean coordinates, none present."""


# --- generators / homogeneous / ultrametric ---

class NotTransitive(MetricMagError):
    pass


class LevelTooLarge(MetricMagError):
    pass


class NotUltrametric(MetricMagError):
    """Strong triangle inequality fails; carries the witnessing triple."""

    def __init__(self, i: int, j: int, k: int):
        self.triple = (i, j, k)
        super().__init__(f"d({i},{k}) > max(d({i},{j}), d({j},{k}))")


class NonDecreasingLevels(MetricMagError):
    pass


# --- CLI ---

class ConfigError(MetricMagError):
    pass
