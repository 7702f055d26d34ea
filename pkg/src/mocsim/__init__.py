"""mocsim: a deterministic soft-motion simulator with trajectory
verification and a retrieval-backed code generation harness."""
from .engine import (
    DeviceConfig,
    DistanceToTarget,
    Engine,
    EventBinding,
    InputEdge,
    Phase,
    PositionReached,
    RunResult,
    SetOutputAction,
    StartPosAction,
    TrajectoryLog,
    create_device,
)
from .interp import (
    LookaheadPlan,
    PathPlan,
    PathSegment,
    SegmentKind,
    plan_lookahead,
    plan_path,
    sample_path,
)
from .mcscript import (
    Diagnostic,
    DiagnosticCategory,
    ParseResult,
    Program,
    Statement,
    parse,
    preprocess,
    print_program,
    suggest,
    validate,
)
from .profiles import (
    ProfilePlan,
    ProfileSpec,
    ProfileType,
    Segment,
    plan_profile,
    profile_duration,
    validate_spec,
)
from .runner import ScriptResult, execute_program, run_script
from .verify import (
    ComparisonReport,
    Method,
    dtw_distance,
    dtw_pass,
    emit_plots,
    ftpr,
    ftpr_from_counts,
    match_endpoints,
)

__version__ = "0.1.0"

__all__ = [
    "ComparisonReport",
    "DeviceConfig",
    "Diagnostic",
    "DiagnosticCategory",
    "DistanceToTarget",
    "Engine",
    "EventBinding",
    "InputEdge",
    "LookaheadPlan",
    "Method",
    "ParseResult",
    "PathPlan",
    "PathSegment",
    "Phase",
    "PositionReached",
    "ProfilePlan",
    "ProfileSpec",
    "ProfileType",
    "Program",
    "RunResult",
    "ScriptResult",
    "Segment",
    "SegmentKind",
    "SetOutputAction",
    "StartPosAction",
    "Statement",
    "TrajectoryLog",
    "create_device",
    "dtw_distance",
    "dtw_pass",
    "emit_plots",
    "execute_program",
    "ftpr",
    "ftpr_from_counts",
    "match_endpoints",
    "parse",
    "plan_lookahead",
    "plan_path",
    "plan_profile",
    "preprocess",
    "print_program",
    "profile_duration",
    "run_script",
    "sample_path",
    "suggest",
    "validate",
    "validate_spec",
]
