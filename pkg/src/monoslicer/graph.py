"""Typed dependency graph over facades, business functions and tables.

Edges are calls (facade/function -> function) and accesses (function ->
table).  On top of the graph sit the facade/table reachability pairs, the
per-subsystem pair selection, slices, per-subsystem size metrics and DOT export.

Reachability sets are held as int bitmasks indexed by the sorted vertex
order; the transitive closure is computed once per graph over the SCC
condensation, so cycles between business functions are fine.
"""

from __future__ import annotations

from collections import deque
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

from .decomposition import SubsystemPartition, tables_of
from .model import AccessMode, SystemModel


class VertexKind(str, Enum):
    FACADE = "facade"
    FUNCTION = "function"
    TABLE = "table"


class EdgeKind(str, Enum):
    CALL = "call"
    ACCESS = "access"


class UnknownVertex(KeyError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(name)

    def __str__(self) -> str:
        return f"unknown vertex {self.name!r}"


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    kind: EdgeKind
    ordinal: int | None = None
    mode: AccessMode | None = None
    txn_scope: str | None = None


@dataclass(frozen=True, order=True)
class FacadeTablePair:
    facade: str
    table: str
    witness: tuple[str, ...] = field(default=(), compare=False)

    @property
    def key(self) -> tuple[str, str]:
        return (self.facade, self.table)


@dataclass(frozen=True)
class Slice:
    """Functions lying on some path from ``facade`` to any table in ``tables``."""

    facade: str
    tables: frozenset[str]
    functions: frozenset[str]


@dataclass(frozen=True)
class MetricsRow:
    tables: int
    functions: int
    call_edges: int
    access_edges: int

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.tables, self.functions, self.call_edges, self.access_edges)


class DependencyGraph:
    """Immutable view of a :class:`SystemModel` as a directed graph."""

    def __init__(self, kinds: Mapping[str, VertexKind], edges: Iterable[Edge]):
        self._kinds = dict(sorted(kinds.items()))
        self._edges = tuple(edges)
        for e in self._edges:
            for v in (e.src, e.dst):
                if v not in self._kinds:
                    raise UnknownVertex(v)
        succ: dict[str, set[str]] = {v: set() for v in self._kinds}
        pred: dict[str, set[str]] = {v: set() for v in self._kinds}
        for e in self._edges:
            succ[e.src].add(e.dst)
            pred[e.dst].add(e.src)
        self._succ = {v: tuple(sorted(s)) for v, s in succ.items()}
        self._pred = {v: tuple(sorted(s)) for v, s in pred.items()}
        self._index = {v: i for i, v in enumerate(self._kinds)}
        self._order = list(self._kinds)

    @property
    def vertices(self) -> Mapping[str, VertexKind]:
        return self._kinds

    @property
    def edges(self) -> tuple[Edge, ...]:
        return self._edges

    def kind(self, v: str) -> VertexKind:
        try:
            return self._kinds[v]
        except KeyError:
            raise UnknownVertex(v) from None

    def of_kind(self, kind: VertexKind) -> list[str]:
        return [v for v, k in self._kinds.items() if k is kind]

    @property
    def facades(self) -> list[str]:
        return self.of_kind(VertexKind.FACADE)

    @property
    def functions(self) -> list[str]:
        return self.of_kind(VertexKind.FUNCTION)

    @property
    def tables(self) -> list[str]:
        return self.of_kind(VertexKind.TABLE)

    def successors(self, v: str) -> tuple[str, ...]:
        return self._succ[v]

    def predecessors(self, v: str) -> tuple[str, ...]:
        return self._pred[v]

    def has_edge(self, src: str, dst: str) -> bool:
        return dst in self._succ.get(src, ())

    # -- closure ---------------------------------------------------------

    def mask(self, vertices: Iterable[str]) -> int:
        m = 0
        for v in vertices:
            m |= 1 << self._index[v]
        return m

    def unmask(self, m: int) -> Iterator[str]:
        bits = bin(m)[:1:-1]
        i = bits.find("1")
        while i != -1:
            yield self._order[i]
            i = bits.find("1", i + 1)

    @cached_property
    def _kind_masks(self) -> dict[VertexKind, int]:
        return {k: self.mask(self.of_kind(k)) for k in VertexKind}

    @cached_property
    def _descendants(self) -> list[int]:
        return _closure(self._order, self._index, self._succ)

    @cached_property
    def _ancestors(self) -> list[int]:
        return _closure(self._order, self._index, self._pred)

    def descendants(self, v: str) -> frozenset[str]:
        """Every vertex reachable from ``v`` by at least one edge."""
        return frozenset(self.unmask(self._descendants[self._index[v]]))

    def ancestors(self, v: str) -> frozenset[str]:
        return frozenset(self.unmask(self._ancestors[self._index[v]]))

    def descendants_mask(self, v: str) -> int:
        return self._descendants[self._index[v]]

    def ancestors_mask(self, v: str) -> int:
        return self._ancestors[self._index[v]]

    def kind_mask(self, kind: VertexKind) -> int:
        return self._kind_masks[kind]


def _closure(order: list[str], index: Mapping[str, int], adj: Mapping[str, tuple[str, ...]]) -> list[int]:
    """Reachability bitmask per vertex (iterative Tarjan, then condensation DP)."""
    n = len(order)
    low = [0] * n
    num = [-1] * n
    on_stack = [False] * n
    stack: list[int] = []
    comp = [-1] * n
    comps: list[list[int]] = []
    counter = 0
    succ_idx = [[index[w] for w in adj[v]] for v in order]

    for root in range(n):
        if num[root] != -1:
            continue
        work = [(root, 0)]
        num[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, i = work[-1]
            if i < len(succ_idx[v]):
                work[-1] = (v, i + 1)
                w = succ_idx[v][i]
                if num[w] == -1:
                    num[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, 0))
                elif on_stack[w]:
                    low[v] = min(low[v], num[w])
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == num[v]:
                members = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp[w] = len(comps)
                    members.append(w)
                    if w == v:
                        break
                comps.append(members)

    # Tarjan emits components in reverse topological order: successors first.
    comp_reach = [0] * len(comps)
    for c, members in enumerate(comps):
        m = 0
        cyclic = len(members) > 1
        for v in members:
            for w in succ_idx[v]:
                if comp[w] == c:
                    cyclic = True
                else:
                    m |= comp_reach[comp[w]] | (1 << w)
        if cyclic:
            for v in members:
                m |= 1 << v
        comp_reach[c] = m
    return [comp_reach[comp[v]] for v in range(n)]


# ---------------------------------------------------------------------------
# Graph construction, reachability and slicing


def build_graph(model: SystemModel) -> DependencyGraph:
    kinds: dict[str, VertexKind] = {}
    kinds.update((f, VertexKind.FACADE) for f in model.facades)
    kinds.update((f, VertexKind.FUNCTION) for f in model.functions)
    kinds.update((t, VertexKind.TABLE) for t in model.tables)
    edges = [Edge(e.caller, e.callee, EdgeKind.CALL, ordinal=e.ordinal) for e in model.call_edges]
    edges += [
        Edge(e.function, e.table, EdgeKind.ACCESS, mode=e.mode, txn_scope=e.txn_scope) for e in model.access_edges
    ]
    return DependencyGraph(kinds, edges)


def _distances_to(graph: DependencyGraph, target: str) -> dict[str, int]:
    dist = {target: 0}
    queue = deque([target])
    while queue:
        v = queue.popleft()
        for p in graph.predecessors(v):
            if p not in dist:
                dist[p] = dist[v] + 1
                queue.append(p)
    return dist


def _witness(graph: DependencyGraph, facade: str, dist: Mapping[str, int]) -> tuple[str, ...]:
    # Shortest path; at each step take the smallest-named successor that stays on one.
    path = [facade]
    v = facade
    while dist[v]:
        v = next(s for s in graph.successors(v) if dist.get(s) == dist[v] - 1)
        path.append(v)
    return tuple(path)


def reachable_pairs(graph: DependencyGraph) -> tuple[FacadeTablePair, ...]:
    """All (facade, table) pairs joined by a directed path, sorted by facade then table."""
    facades = graph.kind_mask(VertexKind.FACADE)
    pairs = []
    for table in graph.tables:
        sources = graph.ancestors_mask(table) & facades
        if not sources:
            continue
        dist = _distances_to(graph, table)
        for facade in graph.unmask(sources):
            pairs.append(FacadeTablePair(facade, table, _witness(graph, facade, dist)))
    return tuple(sorted(pairs))


def pairs_for_subsystem(
    pairs: Iterable[FacadeTablePair], partition: SubsystemPartition, ss: str
) -> tuple[FacadeTablePair, ...]:
    tables = tables_of(partition, ss)
    return tuple(sorted(p for p in pairs if p.table in tables))


def slice_mask(graph: DependencyGraph, facade: str, tables: Iterable[str]) -> int:
    """Bitmask form of :func:`slice_for`'s function set."""
    if graph.kind(facade) is not VertexKind.FACADE:
        raise UnknownVertex(facade)
    target = 0
    for t in tables:
        if graph.kind(t) is not VertexKind.TABLE:
            raise UnknownVertex(t)
        target |= graph.ancestors_mask(t)
    return graph.descendants_mask(facade) & target & graph.kind_mask(VertexKind.FUNCTION)


def slice_for(graph: DependencyGraph, facade: str, tables: Iterable[str]) -> Slice:
    tables = frozenset(tables)
    return Slice(facade, tables, frozenset(graph.unmask(slice_mask(graph, facade, tables))))


@dataclass(frozen=True)
class Subgraph:
    facades: frozenset[str]
    functions: frozenset[str]
    tables: frozenset[str]
    edges: tuple[Edge, ...]

    @property
    def vertices(self) -> frozenset[str]:
        return self.facades | self.functions | self.tables


def subsystem_subgraph(graph: DependencyGraph, partition: SubsystemPartition, ss: str) -> Subgraph:
    """The part of the graph serving one subsystem.

    Vertices are the subsystem's tables, every function on some
    facade-to-subsystem-table path, and the facades starting those paths.
    """
    tables = tables_of(partition, ss)
    target = graph.mask(tables)
    co = 0
    for t in tables:
        co |= graph.ancestors_mask(t)
    from_facades = 0
    for f in graph.facades:
        from_facades |= graph.descendants_mask(f)
    functions = frozenset(graph.unmask(co & from_facades & graph.kind_mask(VertexKind.FUNCTION)))
    facades = frozenset(f for f in graph.facades if graph.descendants_mask(f) & target)
    keep = facades | functions | tables
    edges = tuple(e for e in graph.edges if e.src in keep and e.dst in keep)
    return Subgraph(facades, functions, frozenset(tables), edges)


def graph_metrics(graph: DependencyGraph, partition: SubsystemPartition, ss: str) -> MetricsRow:
    """Counts for one subsystem: tables, functions, function calls, table accesses.

    Entry calls from facades are not counted; only calls between the
    subsystem's functions are.
    """
    sub = subsystem_subgraph(graph, partition, ss)
    calls = sum(1 for e in sub.edges if e.kind is EdgeKind.CALL and e.src in sub.functions)
    accesses = sum(1 for e in sub.edges if e.kind is EdgeKind.ACCESS)
    return MetricsRow(len(sub.tables), len(sub.functions), calls, accesses)


# ---------------------------------------------------------------------------
# DOT

_SHAPES = {VertexKind.FACADE: "box", VertexKind.FUNCTION: "ellipse", VertexKind.TABLE: "cylinder"}


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_dot(
    graph: DependencyGraph,
    partition: SubsystemPartition | None = None,
    subsystem: str | None = None,
) -> str:
    """Render the graph (or one subsystem's subgraph) as a DOT digraph.

    Output is sorted so the same graph always yields the same text.
    """
    if subsystem is not None:
        if partition is None:
            raise ValueError("a partition is required to filter by subsystem")
        sub = subsystem_subgraph(graph, partition, subsystem)
        vertices = sorted(sub.vertices)
        edges = sub.edges
        title = subsystem
    else:
        vertices = list(graph.vertices)
        edges = graph.edges
        title = "monolith"

    lines = [f"digraph {_quote(title)} {{"]
    if vertices:
        lines.append("  rankdir=LR;")
    for v in vertices:
        kind = graph.kind(v)
        lines.append(f"  {_quote(v)} [shape={_SHAPES[kind]}, kind={kind.value}];")

    def sort_key(e: Edge) -> tuple:
        return (e.src, e.dst, e.kind.value, e.ordinal or 0, e.mode.value if e.mode else "", e.txn_scope or "")

    for e in sorted(edges, key=sort_key):
        if e.kind is EdgeKind.CALL:
            attrs = f"label={_quote(str(e.ordinal))}"
        else:
            label = e.mode.value if e.mode else ""
            if e.txn_scope:
                label += f" [{e.txn_scope}]"
            attrs = f"style=dashed, label={_quote(label)}"
        lines.append(f"  {_quote(e.src)} -> {_quote(e.dst)} [{attrs}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
