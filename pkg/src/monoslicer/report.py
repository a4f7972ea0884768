"""Run the whole analysis and render per-subsystem reports."""

from __future__ import annotations

import json
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .candidates import (
    AnalysisConfig,
    AnnotationSet,
    CandidateMicroservice,
    Classification,
    GatewayAssessment,
    Outcome,
    Reason,
    Recommendation,
    SyncCase,
    Verdict,
    classify_candidate,
    classify_gateway,
    parse_annotations,
    parse_config,
    recommend,
    synthesize_candidates,
    transaction_conflicts,
)
from .decomposition import SubsystemPartition, UnknownSubsystem, partition_tables
from .graph import (
    DependencyGraph,
    FacadeTablePair,
    MetricsRow,
    Slice,
    build_graph,
    graph_metrics,
    pairs_for_subsystem,
    reachable_pairs,
)
from .model import AreaMap, IoSignature, SystemModel, Violation, parse_area_map, parse_model, validate_model


class ValidationFailed(Exception):
    def __init__(self, violations: Sequence[Violation]):
        self.violations = list(violations)
        super().__init__(f"{len(self.violations)} validation violation(s)")


@dataclass(frozen=True)
class CandidateReport:
    candidate: CandidateMicroservice
    classification: Classification
    gateways: tuple[GatewayAssessment, ...]
    conflicts: tuple[str, ...] = ()

    @property
    def case_counts(self) -> dict[SyncCase, int]:
        counts = Counter(g.case for g in self.gateways)
        return {case: counts[case] for case in SyncCase}


@dataclass(frozen=True)
class SubsystemReport:
    subsystem: str
    metrics: MetricsRow
    candidates: tuple[CandidateReport, ...]
    recommendation: Recommendation

    @property
    def candidate_count(self) -> int:
        return len(self.candidates)


@dataclass
class Analysis:
    """Everything computed for a model, kept for DOT export and inspection."""

    model: SystemModel
    graph: DependencyGraph
    partition: SubsystemPartition
    pairs: tuple[FacadeTablePair, ...]
    reports: list[SubsystemReport]


def analyze_subsystem(
    ss: str,
    model: SystemModel,
    graph: DependencyGraph,
    partition: SubsystemPartition,
    pairs: Iterable[FacadeTablePair],
    annotations: AnnotationSet | None = None,
    config: AnalysisConfig | None = None,
) -> SubsystemReport:
    config = config or AnalysisConfig()
    selected = pairs_for_subsystem(pairs, partition, ss)
    candidates = synthesize_candidates(ss, selected, graph, model, partition, annotations, config)
    rows = []
    all_gateways: list[GatewayAssessment] = []
    for cand in candidates:
        gateways = tuple(classify_gateway(model, f, cand, partition) for f in cand.facades)
        conflicts = tuple(transaction_conflicts(model, partition, cand))
        rows.append(CandidateReport(cand, classify_candidate(cand, gateways, conflicts), gateways, conflicts))
        all_gateways.extend(gateways)
    rec = recommend(ss, [r.classification for r in rows], all_gateways, partition, config)
    return SubsystemReport(ss, graph_metrics(graph, partition, ss), tuple(rows), rec)


def analyze(
    model: SystemModel,
    area_map: AreaMap,
    annotations: AnnotationSet | None = None,
    config: AnalysisConfig | None = None,
    subsystems: Iterable[str] | None = None,
) -> Analysis:
    """Validate, then run every step for each (selected) subsystem in name order."""
    violations = validate_model(model, area_map)
    if violations:
        raise ValidationFailed(violations)
    partition = partition_tables(model, area_map)
    names = partition.names()
    if subsystems is not None:
        wanted = sorted(set(subsystems))
        for name in wanted:
            if name not in partition.subsystems:
                raise UnknownSubsystem(name)
        names = wanted
    graph = build_graph(model)
    pairs = reachable_pairs(graph)
    reports = [analyze_subsystem(ss, model, graph, partition, pairs, annotations, config) for ss in names]
    return Analysis(model, graph, partition, pairs, reports)


def run_pipeline(
    model_path: str | Path,
    areas_path: str | Path,
    annotations_path: str | Path | None = None,
    config_path: str | Path | None = None,
    subsystems: Iterable[str] | None = None,
) -> list[SubsystemReport]:
    return load_and_analyze(model_path, areas_path, annotations_path, config_path, subsystems).reports


def load_and_analyze(
    model_path: str | Path,
    areas_path: str | Path,
    annotations_path: str | Path | None = None,
    config_path: str | Path | None = None,
    subsystems: Iterable[str] | None = None,
) -> Analysis:
    model = parse_model(Path(model_path).read_bytes())
    area_map = parse_area_map(Path(areas_path).read_bytes())
    annotations = parse_annotations(Path(annotations_path).read_bytes()) if annotations_path else None
    config = parse_config(Path(config_path).read_bytes()) if config_path else AnalysisConfig()
    return analyze(model, area_map, annotations, config, subsystems)


# ---------------------------------------------------------------------------
# JSON


def _sig(io: IoSignature) -> dict[str, list[str]]:
    return {"in": sorted(io.inputs), "out": sorted(io.outputs)}


def report_to_dict(report: SubsystemReport) -> dict[str, Any]:
    m = report.metrics
    rec = report.recommendation
    return {
        "subsystem": report.subsystem,
        "metrics": {
            "tables": m.tables,
            "functions": m.functions,
            "call_edges": m.call_edges,
            "access_edges": m.access_edges,
        },
        "candidate_count": report.candidate_count,
        "candidates": [_candidate_to_dict(r) for r in report.candidates],
        "recommendation": {
            "outcome": rec.outcome.value,
            "reason": rec.reason.value if rec.reason else None,
            "actions": list(rec.actions),
        },
    }


def _candidate_to_dict(row: CandidateReport) -> dict[str, Any]:
    c = row.candidate
    return {
        "name": c.name,
        "subsystem": c.subsystem,
        "purpose": c.purpose,
        "io": _sig(c.io),
        "features": list(c.features),
        "data": sorted(c.data),
        "fingerprint": c.fingerprint,
        "annotated": c.annotated,
        "notes": list(c.notes),
        "slices": [
            {"facade": s.facade, "tables": sorted(s.tables), "functions": sorted(s.functions)} for s in c.slices
        ],
        "source_pairs": [{"facade": p.facade, "table": p.table, "witness": list(p.witness)} for p in c.source_pairs],
        "classification": {
            "verdict": row.classification.verdict.value,
            "reasons": list(row.classification.reasons),
        },
        "conflicts": list(row.conflicts),
        "gateways": [
            {"facade": g.facade, "case": g.case.value, "async_eligible": g.async_eligible} for g in row.gateways
        ],
        "gateway_cases": {case.value: n for case, n in row.case_counts.items()},
    }


def report_from_dict(doc: dict[str, Any]) -> SubsystemReport:
    m = doc["metrics"]
    rec = doc["recommendation"]
    rows = []
    for c in doc["candidates"]:
        cand = CandidateMicroservice(
            subsystem=c["subsystem"],
            name=c["name"],
            purpose=c["purpose"],
            io=IoSignature.of(c["io"]["in"], c["io"]["out"]),
            features=tuple(c["features"]),
            data=frozenset(c["data"]),
            slices=tuple(
                Slice(s["facade"], frozenset(s["tables"]), frozenset(s["functions"])) for s in c["slices"]
            ),
            source_pairs=tuple(
                FacadeTablePair(p["facade"], p["table"], tuple(p["witness"])) for p in c["source_pairs"]
            ),
            notes=tuple(c["notes"]),
            annotated=c["annotated"],
        )
        gateways = tuple(
            GatewayAssessment(g["facade"], cand.name, SyncCase(g["case"]), g["async_eligible"]) for g in c["gateways"]
        )
        cls = Classification(Verdict(c["classification"]["verdict"]), tuple(c["classification"]["reasons"]))
        rows.append(CandidateReport(cand, cls, gateways, tuple(c["conflicts"])))
    return SubsystemReport(
        doc["subsystem"],
        MetricsRow(m["tables"], m["functions"], m["call_edges"], m["access_edges"]),
        tuple(rows),
        Recommendation(
            doc["subsystem"],
            Outcome(rec["outcome"]),
            Reason(rec["reason"]) if rec["reason"] else None,
            tuple(rec["actions"]),
        ),
    )


def load_reports(raw: bytes | str) -> list[SubsystemReport]:
    return [report_from_dict(d) for d in json.loads(raw)]


# ---------------------------------------------------------------------------
# Rendering

_ROWS = (
    ("Tables (vertices)", lambda r: r.metrics.tables),
    ("Functions (vertices)", lambda r: r.metrics.functions),
    ("Function calls (edges)", lambda r: r.metrics.call_edges),
    ("Database accesses (edges)", lambda r: r.metrics.access_edges),
    ("Microservices candidates", lambda r: r.candidate_count),
)


def render(reports: Sequence[SubsystemReport], format: str = "json") -> bytes:
    if format == "json":
        text = json.dumps([report_to_dict(r) for r in reports], indent=2, sort_keys=True, ensure_ascii=False)
    elif format == "markdown":
        text = render_markdown(reports)
    else:
        raise ValueError(f"unknown format {format!r}")
    return (text.rstrip("\n") + "\n").encode("utf-8")


def _items(values: Iterable[str]) -> str:
    values = sorted(values)
    return ", ".join(values) if values else "none"


def render_markdown(reports: Sequence[SubsystemReport]) -> str:
    out = ["# Microservice candidates", ""]
    if not reports:
        out.append("No subsystems analysed.")
        return "\n".join(out)

    out += ["## Evaluated subsystems", ""]
    out.append("| Subsystem | " + " | ".join(r.subsystem for r in reports) + " |")
    out.append("|---|" + "---:|" * len(reports))
    for label, get in _ROWS:
        out.append(f"| {label} | " + " | ".join(str(get(r)) for r in reports) + " |")
    out.append("| Recommendation | " + " | ".join(str(r.recommendation) for r in reports) + " |")

    for r in reports:
        out += ["", f"## {r.subsystem}", "", f"Recommendation: **{r.recommendation}**"]
        for action in r.recommendation.actions:
            out.append(f"- {action}")
        for row in r.candidates:
            c = row.candidate
            counts = row.case_counts
            queued = sum(1 for g in row.gateways if g.async_eligible)
            out += ["", f"### {c.name}", ""]
            out.append(f"- Name: {c.name}")
            out.append(f"- Purpose: {c.purpose}")
            out.append(f"- Input/Output: input {_items(c.io.inputs)}; output {_items(c.io.outputs)}")
            out.append("- Features:")
            out += [f"  - {feat}" for feat in c.features] or ["  - none"]
            out.append(f"- Data: {_items(c.data)}")
            out.append(f"- Classification: {row.classification.verdict.value}")
            out += [f"  - {reason}" for reason in row.classification.reasons]
            out.append(
                f"- Gateways: {len(row.gateways)} "
                f"(SequentialI {counts[SyncCase.SEQUENTIAL_I]}, IndependentII {counts[SyncCase.INDEPENDENT_II]}, "
                f"SplitIII {counts[SyncCase.SPLIT_III]}; {queued} asynchronous)"
            )
            out.append(f"- Source facades: {_items(c.facades)}")
            for note in c.notes:
                out.append(f"- Note: {note}")
    return "\n".join(out)
