"""Candidate microservices, API gateway assessment and subsystem recommendations."""

from __future__ import annotations

import hashlib
import json
import re
from collections import Counter, defaultdict
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, TypeVar

from .decomposition import SubsystemPartition, UnknownSubsystem, tables_of
from .graph import DependencyGraph, FacadeTablePair, Slice, VertexKind, build_graph, slice_for, slice_mask
from .model import (
    AccessEdge,
    AccessMode,
    CallEdge,
    FactSyntaxError,
    IoSignature,
    SchemaError,
    SystemModel,
)


_S = TypeVar("_S", frozenset, int)


class MissingSignature(KeyError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(name)

    def __str__(self) -> str:
        return f"function {self.name!r} has no I/O signature"


class NotASourceFacade(ValueError):
    pass


class Dedupe(str, Enum):
    BY_SLICE = "by-slice"
    OFF = "off"


@dataclass(frozen=True)
class AnalysisConfig:
    max_split_gateways: int = 10
    dedupe: Dedupe = Dedupe.BY_SLICE

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> AnalysisConfig:
        unknown = sorted(set(doc) - {"max_split_gateways", "dedupe"})
        if unknown:
            raise SchemaError(unknown[0], "unknown config key")
        limit = doc.get("max_split_gateways", cls.max_split_gateways)
        if isinstance(limit, bool) or not isinstance(limit, int) or limit < 0:
            raise SchemaError("max_split_gateways", "expected a non-negative integer")
        try:
            dedupe = Dedupe(doc.get("dedupe", cls.dedupe.value))
        except ValueError:
            raise SchemaError("dedupe", "expected 'by-slice' or 'off'") from None
        return cls(limit, dedupe)


def parse_config(raw: bytes | str) -> AnalysisConfig:
    doc = _load_json(raw)
    if not isinstance(doc, dict):
        raise SchemaError("$", "config must be a JSON object")
    return AnalysisConfig.from_dict(doc)


def _load_json(raw: bytes | str) -> Any:
    try:
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw
        return json.loads(text)
    except UnicodeDecodeError as exc:
        raise FactSyntaxError(f"not valid UTF-8: {exc.reason}") from exc
    except json.JSONDecodeError as exc:
        raise FactSyntaxError(exc.msg, exc.lineno, exc.colno) from exc


# ---------------------------------------------------------------------------
# Annotations

_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*\.[A-Za-z_][A-Za-z0-9_]*$")


def slice_fingerprint(functions: Iterable[str]) -> str:
    digest = hashlib.sha256("\n".join(sorted(functions)).encode("utf-8"))
    return digest.hexdigest()[:16]


def subsystem_token(ss: str) -> str:
    """``Business Actions`` -> ``BusinessActions``, usable as a name segment."""
    token = re.sub(r"[^A-Za-z0-9_]", "", ss)
    if not token or token[0].isdigit():
        token = "SS" + token
    return token


@dataclass(frozen=True)
class Annotation:
    name: str | None = None
    purpose: str | None = None
    features: tuple[str, ...] = ()


@dataclass(frozen=True)
class AnnotationSet:
    entries: Mapping[tuple[str | None, str], Annotation] = field(default_factory=dict)

    __hash__ = None  # type: ignore[assignment]

    def lookup(self, ss: str, functions: Iterable[str]) -> Annotation | None:
        fp = slice_fingerprint(functions)
        return self.entries.get((ss, fp)) or self.entries.get((None, fp))


def parse_annotations(raw: bytes | str) -> AnnotationSet:
    """Load human-written names, purposes and features.

    Accepts an object keyed by slice fingerprint, or a list of entries that
    carry either ``fingerprint`` or ``subsystem`` plus ``functions``.
    """
    doc = _load_json(raw)
    items: list[tuple[str, Mapping[str, Any]]]
    if isinstance(doc, dict):
        items = [(f"{fp}", entry) for fp, entry in doc.items()]
    elif isinstance(doc, list):
        items = [(f"[{i}]", entry) for i, entry in enumerate(doc)]
    else:
        raise SchemaError("$", "annotations must be an object or a list")

    entries: dict[tuple[str | None, str], Annotation] = {}
    for path, entry in items:
        if not isinstance(entry, dict):
            raise SchemaError(path, "expected an object")
        ss = entry.get("subsystem")
        if ss is not None and not isinstance(ss, str):
            raise SchemaError(f"{path}.subsystem", "expected a string")
        if isinstance(doc, dict):
            fp = path
        elif "fingerprint" in entry:
            fp = entry["fingerprint"]
            if not isinstance(fp, str):
                raise SchemaError(f"{path}.fingerprint", "expected a string")
        elif "functions" in entry:
            fns = entry["functions"]
            if not isinstance(fns, list) or not all(isinstance(f, str) for f in fns):
                raise SchemaError(f"{path}.functions", "expected a list of strings")
            fp = slice_fingerprint(fns)
        else:
            raise SchemaError(path, "entry needs 'fingerprint' or 'functions'")
        name = entry.get("name")
        if name is not None:
            if not isinstance(name, str) or not (_NAME_RE.match(name) or re.match(r"^[A-Za-z_]\w*$", name)):
                raise SchemaError(f"{path}.name", "expected 'Subsystem.Process' or 'Process'")
        purpose = entry.get("purpose")
        if purpose is not None and not isinstance(purpose, str):
            raise SchemaError(f"{path}.purpose", "expected a string")
        features = entry.get("features", [])
        if not isinstance(features, list) or not all(isinstance(f, str) for f in features):
            raise SchemaError(f"{path}.features", "expected a list of strings")
        entries[(ss, fp)] = Annotation(name, purpose, tuple(features))
    return AnnotationSet(entries)


# ---------------------------------------------------------------------------
# Candidates


class _CallIndex:
    """Per-model lookup tables shared by the I/O and gateway rules."""

    def __init__(self, model: SystemModel):
        self.model = model
        self.graph = build_graph(model)
        self.calls: dict[str, list[CallEdge]] = defaultdict(list)
        for c in sorted(model.call_edges, key=lambda c: (c.caller, c.ordinal)):
            self.calls[c.caller].append(c)
        self.accesses: dict[str, list[AccessEdge]] = defaultdict(list)
        for e in model.access_edges:
            self.accesses[e.function].append(e)
        self._fn_mask = self.graph.kind_mask(VertexKind.FUNCTION)
        self._subtrees: dict[str, frozenset[str]] = {}
        self._reach: dict[str, frozenset[str]] = {}

    def subtree(self, function: str) -> frozenset[str]:
        """``function`` plus every function it can reach through calls."""
        if function not in self._subtrees:
            m = self.graph.descendants_mask(function) & self._fn_mask
            self._subtrees[function] = frozenset(self.graph.unmask(m)) | {function}
        return self._subtrees[function]

    def reachable_functions(self, caller: str) -> frozenset[str]:
        if caller not in self._reach:
            self._reach[caller] = frozenset(self.graph.unmask(self.graph.descendants_mask(caller) & self._fn_mask))
        return self._reach[caller]


def _index(model: SystemModel) -> _CallIndex:
    idx = model.__dict__.get("_call_index")
    if idx is None:
        idx = _CallIndex(model)
        object.__setattr__(model, "_call_index", idx)
    return idx


def _signature(model: SystemModel, name: str) -> IoSignature:
    try:
        return model.signatures[name]
    except KeyError:
        raise MissingSignature(name) from None


def derive_candidate_io(model: SystemModel, slice_: Slice) -> IoSignature:
    """Input/output data of the code a slice would move into a service.

    Inputs are what slice functions consume but no other slice function
    produces.  Outputs are slice products consumed by the facade's code
    outside the slice, plus facade response items produced inside it.
    """
    sigs = {f: _signature(model, f) for f in sorted(slice_.functions)}
    producers = Counter(item for sig in sigs.values() for item in sig.outputs)
    inputs: set[str] = set()
    for sig in sigs.values():
        inputs.update(i for i in sig.inputs if producers[i] - (i in sig.outputs) == 0)
    produced = set(producers)

    idx = _index(model)
    outside = idx.reachable_functions(slice_.facade) - slice_.functions
    consumed_outside = set().union(*(model.signature(r).inputs for r in outside))
    facade_out = model.signature(slice_.facade).outputs
    outputs = (produced & consumed_outside) | (produced & facade_out)
    return IoSignature(frozenset(inputs), frozenset(outputs))


@dataclass(frozen=True)
class CandidateMicroservice:
    subsystem: str
    name: str
    purpose: str
    io: IoSignature
    features: tuple[str, ...]
    data: frozenset[str]
    slices: tuple[Slice, ...]
    source_pairs: tuple[FacadeTablePair, ...]
    notes: tuple[str, ...] = ()
    annotated: bool = False

    @property
    def functions(self) -> frozenset[str]:
        return frozenset().union(*(s.functions for s in self.slices))

    @property
    def facades(self) -> tuple[str, ...]:
        return tuple(s.facade for s in self.slices)

    @property
    def fingerprint(self) -> str:
        return slice_fingerprint(self.functions)

    def slice_of(self, facade: str) -> Slice:
        for s in self.slices:
            if s.facade == facade:
                return s
        raise NotASourceFacade(f"{facade!r} is not a source facade of {self.name}")


def merge_by_slice(groups: Sequence[tuple[_S, frozenset[FacadeTablePair]]]) -> list[tuple[_S, frozenset[FacadeTablePair]]]:
    """Merge (functions, pairs) groups whose function sets overlap, transitively.

    ``functions`` may be a frozenset or an int bitmask; only ``&`` and ``|``
    are used.  The result is ordered by each group's smallest pair, and
    applying it to its own output changes nothing.
    """
    merged: list[tuple[_S, set[FacadeTablePair]]] = []
    for functions, pairs in groups:
        keep = []
        acc_f, acc_p = functions, set(pairs)
        for other_f, other_p in merged:
            if other_f & acc_f:
                acc_f = acc_f | other_f
                acc_p |= other_p
            else:
                keep.append((other_f, other_p))
        keep.append((acc_f, acc_p))
        merged = keep
    # Components stay pairwise disjoint, so a single pass is already closed.
    out = [(f, frozenset(p)) for f, p in merged]
    return sorted(out, key=lambda g: min(g[1]))


def synthesize_candidates(
    ss: str,
    pairs: Iterable[FacadeTablePair],
    graph: DependencyGraph,
    model: SystemModel,
    partition: SubsystemPartition,
    annotations: AnnotationSet | None = None,
    config: AnalysisConfig | None = None,
) -> list[CandidateMicroservice]:
    """One descriptor per pair, merged by overlapping slices unless dedupe is off."""
    config = config or AnalysisConfig()
    ss_tables = tables_of(partition, ss)
    pairs = sorted(pairs)
    stray = [p for p in pairs if p.table not in ss_tables]
    if stray:
        raise ValueError(f"pair {stray[0].key} does not belong to subsystem {ss!r}")

    groups = [(slice_mask(graph, p.facade, (p.table,)), frozenset({p})) for p in pairs]
    if config.dedupe is Dedupe.BY_SLICE:
        groups = merge_by_slice(groups)
    return [
        _make_candidate(ss, n, group_pairs, graph, model, annotations)
        for n, (_, group_pairs) in enumerate(groups, start=1)
    ]


def _make_candidate(
    ss: str,
    n: int,
    pairs: Iterable[FacadeTablePair],
    graph: DependencyGraph,
    model: SystemModel,
    annotations: AnnotationSet | None,
) -> CandidateMicroservice:
    pairs = tuple(sorted(pairs))
    tables_by_facade: dict[str, set[str]] = defaultdict(set)
    for p in pairs:
        tables_by_facade[p.facade].add(p.table)
    slices = tuple(slice_for(graph, f, tables_by_facade[f]) for f in sorted(tables_by_facade))
    ios = [derive_candidate_io(model, s) for s in slices]
    io = IoSignature(
        frozenset().union(*(x.inputs for x in ios)),
        frozenset().union(*(x.outputs for x in ios)),
    )
    data = frozenset(p.table for p in pairs)
    functions = frozenset().union(*(s.functions for s in slices))

    note = annotations.lookup(ss, functions) if annotations else None
    token = subsystem_token(ss)
    name = f"{token}.Process_{n}"
    purpose = f"Not annotated; operates on {', '.join(sorted(data))}."
    features = _feature_hints(model, functions, data)
    if note is not None:
        if note.name:
            name = note.name if "." in note.name else f"{token}.{note.name}"
        purpose = note.purpose or purpose
        features = note.features or features
    return CandidateMicroservice(
        subsystem=ss,
        name=name,
        purpose=purpose,
        io=io,
        features=features,
        data=data,
        slices=slices,
        source_pairs=pairs,
        notes=_merge_hints(pairs),
        annotated=note is not None,
    )


def _feature_hints(model: SystemModel, functions: frozenset[str], data: frozenset[str]) -> tuple[str, ...]:
    seen = set()
    for e in model.access_edges:
        if e.function in functions and e.table in data:
            seen.add((e.table, e.mode, e.function))
    verbs = {AccessMode.READ: "Retrieve", AccessMode.WRITE: "Update"}
    return tuple(f"{verbs[mode]} {table} records in {fn}" for table, mode, fn in sorted(seen))


def _merge_hints(pairs: Sequence[FacadeTablePair]) -> tuple[str, ...]:
    # A table reached from strictly fewer facades than another data table
    # is only ever used alongside it; suggest folding the two together.
    reached: dict[str, frozenset[str]] = {}
    for t in sorted({p.table for p in pairs}):
        reached[t] = frozenset(p.facade for p in pairs if p.table == t)
    hints = []
    for t, facades in reached.items():
        wider = [u for u, fu in reached.items() if u != t and facades < fu]
        if wider:
            hints.append(f"table {t} could be merged with {min(wider)}")
    return tuple(hints)


# ---------------------------------------------------------------------------
# Gateways


class SyncCase(str, Enum):
    SEQUENTIAL_I = "SequentialI"
    INDEPENDENT_II = "IndependentII"
    SPLIT_III = "SplitIII"


@dataclass(frozen=True)
class GatewayAssessment:
    facade: str
    candidate: str
    case: SyncCase
    async_eligible: bool


def residual_signature(model: SystemModel, facade: str, slice_functions: frozenset[str], service_io: IoSignature) -> IoSignature:
    """I/O of the facade once the slice is moved out.

    The residual keeps the code under the facade's non-slice calls.  Request
    items only the slice consumed disappear from its inputs; response items
    the slice produces become inputs it must receive from the service.
    """
    idx = _index(model)
    residual: set[str] = set()
    for call in idx.calls.get(facade, []):
        if idx.subtree(call.callee).isdisjoint(slice_functions):
            residual |= idx.subtree(call.callee)
    residual -= slice_functions
    used = set().union(*(model.signature(r).inputs for r in residual))
    made = set().union(*(model.signature(r).outputs for r in residual))
    response = model.signature(facade).outputs
    inputs = (used - made) | ((response & service_io.outputs) - made)
    outputs = made | (response - service_io.outputs)
    return IoSignature(frozenset(inputs), frozenset(outputs))


def classify_gateway(
    model: SystemModel,
    facade: str,
    candidate: CandidateMicroservice,
    partition: SubsystemPartition | None = None,
) -> GatewayAssessment:
    """Decide how a gateway for ``facade`` would synchronise the service and the residual facade.

    ``partition`` lets control tables be ignored when looking for slice
    callees that also do work for other tables.
    """
    if facade not in {p.facade for p in candidate.source_pairs}:
        raise NotASourceFacade(f"{facade!r} is not a source facade of {candidate.name}")
    idx = _index(model)
    slice_functions = candidate.slice_of(facade).functions
    calls = idx.calls.get(facade, [])
    hit_calls = [c for c in calls if not idx.subtree(c.callee).isdisjoint(slice_functions)]
    hit = [c.ordinal for c in hit_calls]
    k = len(calls)
    prefix = hit == list(range(1, len(hit) + 1))
    suffix = hit == list(range(k - len(hit) + 1, k + 1))

    # A slice callee that also drives non-slice code touching other tables
    # cannot be lifted out whole.
    control = partition.control if partition else frozenset()
    spill = set().union(*(idx.subtree(c.callee) for c in hit_calls)) - slice_functions
    mixed = any(
        e.table not in candidate.data and e.table not in control for f in spill for e in idx.accesses.get(f, ())
    )

    service = candidate.io
    rest = residual_signature(model, facade, slice_functions, service)
    request = model.signature(facade).inputs
    cross = bool(service.outputs & rest.inputs) or bool(rest.outputs & service.inputs)

    if mixed:
        case = SyncCase.SPLIT_III
    elif (prefix or suffix) and cross:
        case = SyncCase.SEQUENTIAL_I
    elif not cross and service.inputs <= request and rest.inputs <= request:
        case = SyncCase.INDEPENDENT_II
    else:
        case = SyncCase.SPLIT_III
    return GatewayAssessment(
        facade,
        candidate.name,
        case,
        async_eligible=case is SyncCase.INDEPENDENT_II and not service.outputs,
    )


def transaction_conflicts(
    model: SystemModel, partition: SubsystemPartition, candidate: CandidateMicroservice
) -> list[str]:
    """Transaction scopes where the slice writes its own tables alongside a foreign write."""
    own = tables_of(partition, candidate.subsystem)
    functions = candidate.functions
    local: set[str] = set()
    foreign: set[str] = set()
    for e in model.access_edges:
        if e.mode is not AccessMode.WRITE or e.txn_scope is None:
            continue
        if e.table in own:
            if e.function in functions:
                local.add(e.txn_scope)
        elif e.table not in partition.control:
            foreign.add(e.txn_scope)
    return sorted(local & foreign)


# ---------------------------------------------------------------------------
# Verdicts


class Verdict(str, Enum):
    STRONG = "Strong"
    ADDITIONAL_EFFORT = "AdditionalEffort"
    NON_CANDIDATE = "NonCandidate"


@dataclass(frozen=True)
class Classification:
    verdict: Verdict
    reasons: tuple[str, ...] = ()


def classify_candidate(
    candidate: CandidateMicroservice,
    gateways: Sequence[GatewayAssessment],
    conflicts: Sequence[str],
) -> Classification:
    if conflicts:
        return Classification(
            Verdict.NON_CANDIDATE,
            tuple(f"transaction {t} writes tables of another subsystem" for t in sorted(conflicts)),
        )
    split = sorted(g.facade for g in gateways if g.case is SyncCase.SPLIT_III)
    if split:
        return Classification(
            Verdict.ADDITIONAL_EFFORT,
            tuple(f"facade {f} must be split around {candidate.name}" for f in split),
        )
    return Classification(Verdict.STRONG)


class Outcome(str, Enum):
    MIGRATE = "Migrate"
    DO_NOT_MIGRATE = "DoNotMigrate"
    DISREGARDED = "Disregarded"


class Reason(str, Enum):
    SHARED_TABLES = "shared-tables"
    NON_CANDIDATE = "non-candidate"
    EXCESS_SPLIT_EFFORT = "excess-split-effort"
    NO_CANDIDATES = "no-candidates"


@dataclass(frozen=True)
class Recommendation:
    subsystem: str
    outcome: Outcome
    reason: Reason | None = None
    actions: tuple[str, ...] = ()

    def __str__(self) -> str:
        return self.outcome.value + (f"({self.reason.value})" if self.reason else "")


def recommend(
    ss: str,
    classifications: Sequence[Classification],
    gateways: Sequence[GatewayAssessment],
    partition: SubsystemPartition,
    config: AnalysisConfig | None = None,
) -> Recommendation:
    config = config or AnalysisConfig()
    if ss not in partition.subsystems:
        raise UnknownSubsystem(ss)
    if ss in partition.disqualified:
        return Recommendation(ss, Outcome.DISREGARDED, Reason.SHARED_TABLES)
    if any(c.verdict is Verdict.NON_CANDIDATE for c in classifications):
        return Recommendation(ss, Outcome.DO_NOT_MIGRATE, Reason.NON_CANDIDATE)
    if not classifications:
        return Recommendation(ss, Outcome.DO_NOT_MIGRATE, Reason.NO_CANDIDATES)
    split = sum(1 for g in gateways if g.case is SyncCase.SPLIT_III)
    if split > config.max_split_gateways:
        return Recommendation(ss, Outcome.DO_NOT_MIGRATE, Reason.EXCESS_SPLIT_EFFORT)

    names = sorted({g.candidate for g in gateways})
    tables = sorted(tables_of(partition, ss))
    cases = Counter(g.case for g in gateways)
    queued = sum(1 for g in gateways if g.async_eligible)
    actions = [
        f"Implement the microservices {', '.join(names)}",
        f"Create an independent database holding {', '.join(tables)}",
        f"Develop {len(gateways)} API gateways "
        f"({cases[SyncCase.SEQUENTIAL_I]} sequential, {cases[SyncCase.INDEPENDENT_II]} independent, "
        f"{cases[SyncCase.SPLIT_III]} requiring a facade split)",
    ]
    if queued:
        actions.append(f"Replace {queued} output-less gateway calls with message queue puts")
    actions.append(f"Remove the {ss} code and tables from the monolith")
    return Recommendation(ss, Outcome.MIGRATE, None, tuple(actions))

