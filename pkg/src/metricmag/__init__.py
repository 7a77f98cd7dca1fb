"""Magnitude, maximum diversity, dimension estimates, and ultramagnitude
of finite metric spaces.
"""

from .diversity import (
    ComparabilityReport,
    DiversityCurve,
    DiversityResult,
    brute_force_diversity,
    comparability_report,
    diversity_function,
    max_diversity,
)
from .dimension import (
    CountResult,
    DimensionEstimate,
    covering_number,
    disjoint_ball_packing_number,
    diversity_dimension,
    magnitude_dimension,
    minkowski_dimension,
    packing_number,
    scaling_bounds_check,
    volume_bound_check,
)
from .magnitude import (
    MagnitudeCurve,
    SimilarityMatrix,
    Weighting,
    magnitude,
    magnitude_function,
    pde_residual_1d,
    potential,
    potential_at_points,
    similarity_matrix,
    weighting,
)
from .metric_core import (
    FiniteMetricSpace,
    ScaledSpace,
    from_points,
    is_negative_type,
    is_positive_definite,
    rescale,
    validate,
)
from .spaces import (
    HomogeneousSpace,
    cantor_endpoints,
    circle_continuum_magnitude,
    circle_uniform,
    grid2d,
    homogeneous_magnitude,
    interval_grid,
    random_cloud,
    sierpinski_points,
)
from .ultra import (
    BallPartition,
    UltrametricSpace,
    ball_partition,
    ultramagnitude,
    ultrametric_tree,
    ultraweighting,
    validate_ultrametric,
)

__version__ = "0.1.0"

__all__ = [
    "BallPartition",
    "ComparabilityReport",
    "CountResult",
    "DimensionEstimate",
    "DiversityCurve",
    "DiversityResult",
    "FiniteMetricSpace",
    "HomogeneousSpace",
    "MagnitudeCurve",
    "ScaledSpace",
    "SimilarityMatrix",
    "UltrametricSpace",
    "Weighting",
    "ball_partition",
    "brute_force_diversity",
    "cantor_endpoints",
    "circle_continuum_magnitude",
    "circle_uniform",
    "comparability_report",
    "covering_number",
    "disjoint_ball_packing_number",
    "diversity_dimension",
    "diversity_function",
    "from_points",
    "grid2d",
    "homogeneous_magnitude",
    "interval_grid",
    "is_negative_type",
    "is_positive_definite",
    "magnitude",
    "magnitude_dimension",
    "magnitude_function",
    "max_diversity",
    "minkowski_dimension",
    "packing_number",
    "pde_residual_1d",
    "potential",
    "potential_at_points",
    "random_cloud",
    "rescale",
    "scaling_bounds_check",
    "sierpinski_points",
    "similarity_matrix",
    "ultramagnitude",
    "ultrametric_tree",
    "ultraweighting",
    "validate",
    "validate_ultrametric",
    "volume_bound_check",
    "weighting",
]
