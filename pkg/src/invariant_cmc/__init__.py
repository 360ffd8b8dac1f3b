"""Numerical engine for O(n) x O(m)-invariant CMC hypersurfaces of R^n x S^m."""

from .classify import ClassificationResult, Topology, classify, detect_self_intersection, reflect
from .integrate import (
    EventKind,
    IntegrationControls,
    ProfileCurve,
    StepFailure,
    Termination,
    graph_extract,
    graph_residual,
    integrate,
    integrate_reversed,
    resample,
)
from .model import (
    CurveState,
    Derivative,
    DomainError,
    GeometryParams,
    XAxisNorth,
    XAxisSouth,
    YAxis,
    axis_rate,
    normalize_orientation,
    pointwise_mean_curvature,
    regularized_start,
    slice_height,
    sphere_volume,
    stability_integrands,
    vector_field,
)
from .shoot import (
    Inconclusive,
    InvalidBracket,
    Outcome,
    ShootOutcome,
    closure_check,
    find_bracket,
    find_sphere_height,
    shoot_once,
    sweep_family,
)
from .stability import (
    IndexFormReport,
    TestFunction,
    cylinder_slice_criteria,
    index_form,
    instability_certificate,
    jacobi_apply,
    jacobi_identity_residual,
    linearized_solution,
    sin_sigma_window,
)

__version__ = "0.1.0"

__all__ = [
    "ClassificationResult",
    "CurveState",
    "Derivative",
    "DomainError",
    "EventKind",
    "GeometryParams",
    "Inconclusive",
    "IndexFormReport",
    "IntegrationControls",
    "InvalidBracket",
    "Outcome",
    "ProfileCurve",
    "ShootOutcome",
    "StepFailure",
    "Termination",
    "TestFunction",
    "Topology",
    "XAxisNorth",
    "XAxisSouth",
    "YAxis",
    "axis_rate",
    "classify",
    "closure_check",
    "cylinder_slice_criteria",
    "detect_self_intersection",
    "find_bracket",
    "find_sphere_height",
    "graph_extract",
    "graph_residual",
    "index_form",
    "instability_certificate",
    "integrate",
    "integrate_reversed",
    "jacobi_apply",
    "jacobi_identity_residual",
    "linearized_solution",
    "normalize_orientation",
    "pointwise_mean_curvature",
    "reflect",
    "regularized_start",
    "resample",
    "shoot_once",
    "sin_sigma_window",
    "slice_height",
    "sphere_volume",
    "stability_integrands",
    "sweep_family",
    "vector_field",
]
