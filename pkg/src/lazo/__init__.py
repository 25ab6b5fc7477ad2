"""Lazy-query zeroth-order online optimization.

Gradient-free estimators (one-point, residual, two-point, and the adaptive
lazy-query hybrids plus their multi-direction extensions), time-varying
benchmark oracles with metered query accounting, a projected ZO-SGD driver,
and the diagnostics that validate the estimators' variance and regret
behavior.
"""

from .errors import (
    ConfigError,
    DegenerateInputError,
    DimensionError,
    IntegrityError,
    LazoError,
    SequencingError,
    TraceError,
    UnsupportedOperationError,
)
from .estimators import (
    EstimatorConfig,
    EstimatorEngine,
    GradientEstimate,
    QueryCache,
    estimate_one_point,
    estimate_residual,
    estimate_two_point_asym,
    estimate_two_point_sym,
    instance_bound_rhs,
    lazo_step,
    lemma2_condition,
    multipoint_lazo_step,
    temporal_variation_a,
    temporal_variation_b,
)
from .diagnostics import (
    BoundReport,
    RegretCurve,
    SymmetryReport,
    VarianceTrace,
    best_fixed_decision,
    estimator_variance_trace,
    regret_curve,
    symmetry_diagnostic,
    validate_bounds,
)
from .numerics import (
    Ball,
    Box,
    FeasibleSet,
    Stream,
    Unconstrained,
    project,
    random_projection_matrix,
    rng_stream,
    sample_unit_sphere,
    sample_unit_spheres,
)
from .oracles import (
    LinearRegressionOracle,
    LQROracle,
    Oracle,
    ResourceAllocationOracle,
    SyntheticQuadraticOracle,
    make_oracle,
)
from .optimizer import (
    RunConfig,
    RunSnapshot,
    Trajectory,
    initial_point,
    run,
    sgd_step,
    theorem1_step_sizes,
)

__version__ = "0.1.0"

__all__ = [
    "Ball",
    "BoundReport",
    "Box",
    "ConfigError",
    "DegenerateInputError",
    "DimensionError",
    "EstimatorConfig",
    "EstimatorEngine",
    "FeasibleSet",
    "GradientEstimate",
    "IntegrityError",
    "LQROracle",
    "LazoError",
    "LinearRegressionOracle",
    "Oracle",
    "QueryCache",
    "RegretCurve",
    "ResourceAllocationOracle",
    "RunConfig",
    "RunSnapshot",
    "SequencingError",
    "Stream",
    "SymmetryReport",
    "SyntheticQuadraticOracle",
    "TraceError",
    "Trajectory",
    "Unconstrained",
    "UnsupportedOperationError",
    "VarianceTrace",
    "best_fixed_decision",
    "estimate_one_point",
    "estimate_residual",
    "estimate_two_point_asym",
    "estimate_two_point_sym",
    "estimator_variance_trace",
    "initial_point",
    "instance_bound_rhs",
    "lazo_step",
    "lemma2_condition",
    "make_oracle",
    "multipoint_lazo_step",
    "project",
    "random_projection_matrix",
    "regret_curve",
    "rng_stream",
    "run",
    "sample_unit_sphere",
    "sample_unit_spheres",
    "sgd_step",
    "symmetry_diagnostic",
    "temporal_variation_a",
    "temporal_variation_b",
    "theorem1_step_sizes",
    "validate_bounds",
]
