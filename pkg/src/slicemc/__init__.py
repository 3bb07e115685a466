"""Monte Carlo integration and sampling on real algebraic manifolds.

The package estimates integrals over a manifold cut out by polynomial
equations by intersecting it with random affine subspaces of complementary
dimension, weighting each intersection point by a closed-form density
correction, and averaging over many slices.  The same machinery yields
exact draws from densities on the manifold by rejection on whole slices.
"""

from .errors import (
    EvaluationDomainError,
    ParseError,
    SamplingError,
    SliceMCError,
    SolverError,
)
from .expressions import (
    Polynomial,
    PolynomialSystem,
    ScalarExpression,
    constant_function,
    parse_polynomial,
    parse_scalar,
)
from .estimators import (
    EstimatorReport,
    RejectionConfig,
    Sample,
    SampleSizePlan,
    baseline_running_means,
    estimate_bounds_by_exploration,
    estimate_integral,
    explore_projective_bound,
    kappa,
    plan_sample_size,
    running_means,
    sample_points,
    sample_points_projective,
    variance_bound,
    windowed_ratio_scan,
)
from .manifold_io import load_manifold, load_scalar, read_expression_text
from .slicing import (
    AffineSlice,
    ExplicitSlice,
    ManifoldSpec,
    ProjectiveSlice,
    Region,
    WeightedIntersection,
    alpha_weight,
    intersect,
    intersect_affine_batch,
    intersect_projective,
    sample_affine_slice,
    sample_explicit_slice,
    sample_projective_slice,
)
from .solvers import (
    ComplexSolution,
    SolverSettings,
    TrackReport,
    filter_real,
    newton_refine,
    solve_univariate,
    track_total_degree,
)

__all__ = [
    "AffineSlice",
    "ComplexSolution",
    "EstimatorReport",
    "EvaluationDomainError",
    "ExplicitSlice",
    "ManifoldSpec",
    "ParseError",
    "Polynomial",
    "PolynomialSystem",
    "ProjectiveSlice",
    "Region",
    "RejectionConfig",
    "Sample",
    "SampleSizePlan",
    "SamplingError",
    "ScalarExpression",
    "SliceMCError",
    "SolverError",
    "SolverSettings",
    "TrackReport",
    "WeightedIntersection",
    "alpha_weight",
    "baseline_running_means",
    "constant_function",
    "estimate_bounds_by_exploration",
    "estimate_integral",
    "explore_projective_bound",
    "filter_real",
    "intersect",
    "intersect_affine_batch",
    "intersect_projective",
    "kappa",
    "load_manifold",
    "load_scalar",
    "newton_refine",
    "parse_polynomial",
    "parse_scalar",
    "plan_sample_size",
    "read_expression_text",
    "running_means",
    "sample_affine_slice",
    "sample_explicit_slice",
    "sample_points",
    "sample_points_projective",
    "sample_projective_slice",
    "solve_univariate",
    "track_total_degree",
    "variance_bound",
    "windowed_ratio_scan",
]

__version__ = "0.1.0"
