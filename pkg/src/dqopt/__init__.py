"""Dual quaternion optimization toolkit.

Layered API: ``algebra`` (dual numbers, quaternions, dual quaternions and
their total order), ``functions`` (dual-number-valued objectives with the
standardness probe and gradient checks), ``solver`` (the two-stage
equality-constrained minimizer), and the applications ``handeye`` and
``posegraph``.  The ``cli`` module exposes the same pipeline as the
``dqopt`` command.
"""

from .algebra import (
    NORMALIZE_TOL,
    TOL_APPRECIABLE,
    TOL_UNIT,
    DualNumber,
    DualQuaternion,
    DualQuaternionVector,
    Quaternion,
    UnitDualQuaternion,
    dual_max,
    dual_min,
    random_unit_quaternion,
)
from .errors import (
    ArityMismatch,
    DegenerateConstraintGradients,
    DisconnectedGraph,
    DqoptError,
    Infeasible,
    InfinitesimalSqrt,
    InvalidPose,
    MaxIterations,
    NegativeStandardPart,
    NoGroundTruth,
    NonImaginaryTranslation,
    NonUnitAxis,
    NonUnitMeasurement,
    NonUnitRotation,
    NonUnitValue,
    NotAppreciable,
    ParseError,
    TooFewMotions,
    UnitValidationError,
)
from .functions import (
    AffineResidual,
    DualFunction,
    DualQuaternionMap,
    GradientReport,
    ResidualNormObjective,
    StandardnessReport,
    UnitNormConstraint,
    anchor_constraints,
    check_standardness,
    combine,
    compose_unit,
    fd_gradient,
    gradient_check,
    make_power,
    map_power,
    normalize_map,
    pack,
    scalar_power,
    squared_distance_objective,
    unit_exp,
    unit_log,
    unit_norm_constraint,
    unpack,
    variable_map,
)
from .solver import (
    EqdqoProblem,
    KktInfo,
    SolveReport,
    SolverConfig,
    Stage1Result,
    TraceRow,
    inner_solve,
    kkt_analysis,
    kkt_residual,
    mu_schedule_down_to,
    solve_eqdqo,
    solve_stage1,
    solve_stage2,
)
from .handeye import (
    MIN_AXIS_SPREAD,
    HandEyeDataset,
    Pose,
    build_axxb,
    build_axyb,
    evaluate_solution,
    generate_synthetic,
    relative_motions,
    rotation_angle_between,
)
from .posegraph import (
    Edge,
    PoseGraph,
    RelativePoseResidual,
    build_pgo,
    edge_error,
    error_vector,
    generate_cycle_graph,
    parse_graph,
    serialize_graph,
    spanning_tree_guess,
    vertex_errors,
)
from .selftest import CheckResult, run_all

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # algebra
    "TOL_APPRECIABLE",
    "TOL_UNIT",
    "NORMALIZE_TOL",
    "DualNumber",
    "Quaternion",
    "DualQuaternion",
    "UnitDualQuaternion",
    "DualQuaternionVector",
    "dual_min",
    "dual_max",
    "random_unit_quaternion",
    # errors
    "DqoptError",
    "NegativeStandardPart",
    "InfinitesimalSqrt",
    "NotAppreciable",
    "UnitValidationError",
    "NonUnitAxis",
    "NonUnitRotation",
    "NonImaginaryTranslation",
    "NonUnitValue",
    "ArityMismatch",
    "Infeasible",
    "MaxIterations",
    "DegenerateConstraintGradients",
    "InvalidPose",
    "TooFewMotions",
    "NoGroundTruth",
    "DisconnectedGraph",
    "NonUnitMeasurement",
    "ParseError",
    # functions
    "pack",
    "unpack",
    "DualFunction",
    "combine",
    "scalar_power",
    "DualQuaternionMap",
    "variable_map",
    "normalize_map",
    "map_power",
    "make_power",
    "compose_unit",
    "unit_log",
    "unit_exp",
    "AffineResidual",
    "ResidualNormObjective",
    "UnitNormConstraint",
    "unit_norm_constraint",
    "anchor_constraints",
    "squared_distance_objective",
    "StandardnessReport",
    "check_standardness",
    "GradientReport",
    "fd_gradient",
    "gradient_check",
    # solver
    "SolverConfig",
    "EqdqoProblem",
    "Stage1Result",
    "SolveReport",
    "TraceRow",
    "KktInfo",
    "mu_schedule_down_to",
    "solve_stage1",
    "solve_stage2",
    "solve_eqdqo",
    "inner_solve",
    "kkt_analysis",
    "kkt_residual",
    # handeye
    "Pose",
    "HandEyeDataset",
    "relative_motions",
    "build_axxb",
    "build_axyb",
    "generate_synthetic",
    "evaluate_solution",
    "rotation_angle_between",
    "MIN_AXIS_SPREAD",
    # posegraph
    "Edge",
    "PoseGraph",
    "edge_error",
    "error_vector",
    "RelativePoseResidual",
    "build_pgo",
    "spanning_tree_guess",
    "parse_graph",
    "serialize_graph",
    "generate_cycle_graph",
    "vertex_errors",
    # selftest
    "CheckResult",
    "run_all",
]
