"""Mesh deformation by compactly supported RBF interpolation, with greedy
and grouped-circular greedy support-node reduction plus the analysis
metrics (support-distribution KL divergence, error histories, surface-cell
quality) to compare them."""

from .core import (
    CholeskyState,
    SupportSet,
    assemble_phi,
    cholesky_append,
    deform_points,
    evaluate_displacement,
    evaluate_displacements,
    kernel_matrix,
    normalized_distance,
    solve_support_weights,
    solve_weights,
    wendland_c2,
)
from .deformers import BendTwistParams, SpanSineParams, bend_twist, prescribe, span_sine
from .estimator import RBFMeshDeformer
from .meshio import (
    Mesh,
    read_displacements,
    read_history_csv,
    read_mesh,
    read_supports_csv,
    write_displacements,
    write_history_csv,
    write_mesh,
    write_supports_csv,
)
from .metrics import (
    ErrorSummary,
    QualityReport,
    cell_quality,
    error_history,
    error_summary,
    kl_divergence,
    nearest_support_distance,
    quality_report,
)
from .selection import (
    BoundarySet,
    GroupPartition,
    IterationRecord,
    KernelEvalCounter,
    SelectionConfig,
    SelectionHistory,
    SelectionResult,
    error_stage_cost,
    gcb_select,
    greedy_select,
    group_arg_max_error,
    interpolation_error,
    partition_boundary,
    random_select,
    seed_supports,
)
from .synthetic import swept_wing_case, swept_wing_surface

__version__ = "0.1.0"
