"""Identify microservice candidates in a monolith from its dependency facts."""

from .candidates import (
    AnalysisConfig,
    CandidateMicroservice,
    Classification,
    Dedupe,
    GatewayAssessment,
    Outcome,
    Reason,
    Recommendation,
    SyncCase,
    Verdict,
    classify_candidate,
    classify_gateway,
    derive_candidate_io,
    parse_annotations,
    parse_config,
    recommend,
    synthesize_candidates,
    transaction_conflicts,
)
from .decomposition import SubsystemPartition, UnknownSubsystem, partition_tables, tables_of
from .graph import (
    DependencyGraph,
    FacadeTablePair,
    MetricsRow,
    Slice,
    build_graph,
    export_dot,
    graph_metrics,
    pairs_for_subsystem,
    reachable_pairs,
    slice_for,
)
from .model import (
    AccessEdge,
    AccessMode,
    AreaMap,
    CallEdge,
    IoSignature,
    SystemModel,
    parse_area_map,
    parse_model,
    validate_model,
)
from .report import SubsystemReport, analyze, render, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "AccessEdge",
    "AccessMode",
    "AnalysisConfig",
    "AreaMap",
    "CallEdge",
    "CandidateMicroservice",
    "Classification",
    "Dedupe",
    "DependencyGraph",
    "FacadeTablePair",
    "GatewayAssessment",
    "IoSignature",
    "MetricsRow",
    "Outcome",
    "Reason",
    "Recommendation",
    "Slice",
    "SubsystemPartition",
    "SubsystemReport",
    "SyncCase",
    "SystemModel",
    "UnknownSubsystem",
    "Verdict",
    "analyze",
    "build_graph",
    "classify_candidate",
    "classify_gateway",
    "derive_candidate_io",
    "export_dot",
    "graph_metrics",
    "pairs_for_subsystem",
    "parse_annotations",
    "parse_area_map",
    "parse_config",
    "parse_model",
    "partition_tables",
    "reachable_pairs",
    "recommend",
    "render",
    "run_pipeline",
    "slice_for",
    "synthesize_candidates",
    "tables_of",
    "transaction_conflicts",
    "validate_model",
]

