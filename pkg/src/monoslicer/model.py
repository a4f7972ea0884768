"""Domain types for a monolith described as facts, plus loaders and a validator.

A fact file declares facades (entry points), business functions and database
tables, the ordered calls between callables, and the table accesses of each
function.  The area map assigns tables to business areas.  Nothing in here
looks at source code; the facts are the ingestion boundary.
"""

from __future__ import annotations

import csv
import io
import json
from collections import Counter, defaultdict
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

CONTROL_AREA = "control"


class ModelError(Exception):
    """Base class for every error raised while loading input documents."""


class FactSyntaxError(ModelError):
    """The document is not well-formed (bad JSON/CSV, bad encoding)."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + where)


class SchemaError(ModelError):
    """A field is missing or has the wrong type.  ``path`` names the field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class EmptyMapError(ModelError):
    """The area map contains no rows."""


class AccessMode(str, Enum):
    READ = "read"
    WRITE = "write"


@dataclass(frozen=True, order=True)
class CallEdge:
    caller: str
    callee: str
    ordinal: int


@dataclass(frozen=True)
class AccessEdge:
    function: str
    table: str
    mode: AccessMode
    txn_scope: str | None = None


def access_key(e: AccessEdge) -> tuple[str, str, str, str]:
    return (e.function, e.table, e.mode.value, e.txn_scope or "")


@dataclass(frozen=True)
class IoSignature:
    inputs: frozenset[str] = frozenset()
    outputs: frozenset[str] = frozenset()

    @classmethod
    def of(cls, inputs: Iterable[str] = (), outputs: Iterable[str] = ()) -> IoSignature:
        return cls(frozenset(inputs), frozenset(outputs))


EMPTY_SIGNATURE = IoSignature()


@dataclass(frozen=True, eq=True)
class SystemModel:
    facades: frozenset[str] = frozenset()
    functions: frozenset[str] = frozenset()
    tables: frozenset[str] = frozenset()
    call_edges: tuple[CallEdge, ...] = ()
    access_edges: tuple[AccessEdge, ...] = ()
    signatures: Mapping[str, IoSignature] = field(default_factory=dict)

    __hash__ = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        # Edge lists are sets in disguise; a canonical order makes equality
        # independent of how the facts were listed.
        object.__setattr__(self, "call_edges", tuple(sorted(self.call_edges)))
        object.__setattr__(self, "access_edges", tuple(sorted(self.access_edges, key=access_key)))

    def signature(self, name: str) -> IoSignature:
        return self.signatures.get(name, EMPTY_SIGNATURE)

    def calls_from(self, caller: str) -> list[CallEdge]:
        """Outgoing calls of ``caller`` in body order."""
        return sorted((e for e in self.call_edges if e.caller == caller), key=lambda e: e.ordinal)


@dataclass(frozen=True)
class AreaMap:
    assignments: Mapping[str, frozenset[str]]
    control_tables: frozenset[str] = frozenset()

    __hash__ = None  # type: ignore[assignment]

    @classmethod
    def from_rows(cls, rows: Iterable[tuple[str, str]]) -> AreaMap:
        """Build from (table, area) rows; the reserved ``control`` area feeds the SSC."""
        assignments: dict[str, set[str]] = defaultdict(set)
        control: set[str] = set()
        for table, area in rows:
            if area == CONTROL_AREA:
                control.add(table)
            else:
                assignments[table].add(area)
        both = sorted(control & assignments.keys())
        if both:
            raise FactSyntaxError(f"table {both[0]!r} is listed both as control and under a business area")
        return cls({t: frozenset(a) for t, a in sorted(assignments.items())}, frozenset(control))

    @property
    def areas(self) -> frozenset[str]:
        return frozenset(a for areas in self.assignments.values() for a in areas)


# ---------------------------------------------------------------------------
# Fact file


def _decode(raw: bytes | str) -> str:
    if isinstance(raw, str):
        return raw
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FactSyntaxError(f"not valid UTF-8: {exc.reason}", None, exc.start) from exc


def _expect(value: Any, kind: type | tuple[type, ...], path: str) -> Any:
    if isinstance(value, bool) or not isinstance(value, kind):
        want = kind.__name__ if isinstance(kind, type) else "/".join(k.__name__ for k in kind)
        raise SchemaError(path, f"expected {want}, got {type(value).__name__}")
    return value


def _name(value: Any, path: str) -> str:
    _expect(value, str, path)
    if not value:
        raise SchemaError(path, "empty name")
    return value


def _name_list(doc: Mapping[str, Any], key: str, path: str, unique: bool = True) -> list[str]:
    if key not in doc:
        raise SchemaError(f"{path}{key}", "missing field")
    items = _expect(doc[key], list, f"{path}{key}")
    names = [_name(v, f"{path}{key}[{i}]") for i, v in enumerate(items)]
    if unique:
        dup = [n for n, c in Counter(names).items() if c > 1]
        if dup:
            raise SchemaError(f"{path}{key}", f"duplicate name {sorted(dup)[0]!r}")
    return names


def parse_model(raw: bytes | str) -> SystemModel:
    """Parse a JSON fact file into a :class:`SystemModel`.

    Referential problems (an edge naming an undeclared vertex, a facade that
    touches a table) are left for :func:`validate_model`; this only checks
    the document shape.
    """
    text = _decode(raw)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FactSyntaxError(exc.msg, exc.lineno, exc.colno) from exc
    _expect(doc, dict, "$")

    facades = _name_list(doc, "facades", "")
    functions = _name_list(doc, "functions", "")
    tables = _name_list(doc, "tables", "")

    calls = []
    for i, item in enumerate(_field(doc, "calls", list)):
        p = f"calls[{i}]"
        _expect(item, dict, p)
        for key in ("caller", "callee", "ordinal"):
            if key not in item:
                raise SchemaError(f"{p}.{key}", "missing field")
        calls.append(
            CallEdge(
                _name(item["caller"], f"{p}.caller"),
                _name(item["callee"], f"{p}.callee"),
                _expect(item["ordinal"], int, f"{p}.ordinal"),
            )
        )

    accesses = []
    for i, item in enumerate(_field(doc, "accesses", list)):
        p = f"accesses[{i}]"
        _expect(item, dict, p)
        for key in ("function", "table", "mode"):
            if key not in item:
                raise SchemaError(f"{p}.{key}", "missing field")
        mode = _expect(item["mode"], str, f"{p}.mode")
        try:
            access_mode = AccessMode(mode)
        except ValueError:
            raise SchemaError(f"{p}.mode", f"expected 'read' or 'write', got {mode!r}") from None
        txn = item.get("txn")
        if txn is not None:
            txn = _name(txn, f"{p}.txn")
        accesses.append(
            AccessEdge(_name(item["function"], f"{p}.function"), _name(item["table"], f"{p}.table"), access_mode, txn)
        )

    raw_sigs = _field(doc, "signatures", dict)
    signatures: dict[str, IoSignature] = {}
    for name, sig in raw_sigs.items():
        p = f"signatures.{name}"
        if not name:
            raise SchemaError(p, "empty name")
        _expect(sig, dict, p)
        signatures[name] = IoSignature(
            frozenset(_name_list(sig, "in", f"{p}.", unique=False)),
            frozenset(_name_list(sig, "out", f"{p}.", unique=False)),
        )
    for name in [*facades, *functions]:
        if name not in signatures:
            raise SchemaError(f"signatures.{name}", "missing signature for declared callable")

    return SystemModel(
        frozenset(facades),
        frozenset(functions),
        frozenset(tables),
        tuple(calls),
        tuple(accesses),
        signatures,
    )


def _field(doc: Mapping[str, Any], key: str, kind: type) -> Any:
    if key not in doc:
        raise SchemaError(key, "missing field")
    return _expect(doc[key], kind, key)


def model_to_dict(model: SystemModel) -> dict[str, Any]:
    accesses = []
    for e in model.access_edges:
        item: dict[str, Any] = {"function": e.function, "table": e.table, "mode": e.mode.value}
        if e.txn_scope is not None:
            item["txn"] = e.txn_scope
        accesses.append(item)
    return {
        "facades": sorted(model.facades),
        "functions": sorted(model.functions),
        "tables": sorted(model.tables),
        "calls": [{"caller": e.caller, "callee": e.callee, "ordinal": e.ordinal} for e in model.call_edges],
        "accesses": accesses,
        "signatures": {
            name: {"in": sorted(sig.inputs), "out": sorted(sig.outputs)}
            for name, sig in sorted(model.signatures.items())
        },
    }


def serialize_model(model: SystemModel) -> bytes:
    return (json.dumps(model_to_dict(model), indent=2, ensure_ascii=False) + "\n").encode("utf-8")


# ---------------------------------------------------------------------------
# Area map


def parse_area_map(raw: bytes | str) -> AreaMap:
    """Parse a ``table,area`` CSV.  Rows whose area is ``control`` go to the SSC."""
    text = _decode(raw)
    rows = list(csv.reader(io.StringIO(text)))
    rows = [(n, r) for n, r in enumerate(rows, start=1) if any(cell.strip() for cell in r)]
    if not rows:
        raise EmptyMapError("area map has no rows")
    lineno, header = rows[0]
    if [c.strip() for c in header] != ["table", "area"]:
        raise FactSyntaxError(f"expected header 'table,area', got {','.join(header)!r}", lineno)
    pairs = []
    for lineno, row in rows[1:]:
        if len(row) != 2:
            raise FactSyntaxError(f"expected 2 columns, got {len(row)}", lineno)
        table, area = (c.strip() for c in row)
        if not table or not area:
            raise FactSyntaxError("empty table or area", lineno)
        pairs.append((table, area))
    if not pairs:
        raise EmptyMapError("area map has a header but no assignments")
    return AreaMap.from_rows(pairs)


def serialize_area_map(area_map: AreaMap) -> bytes:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["table", "area"])
    for table in sorted(area_map.assignments):
        for area in sorted(area_map.assignments[table]):
            writer.writerow([table, area])
    for table in sorted(area_map.control_tables):
        writer.writerow([table, CONTROL_AREA])
    return out.getvalue().encode("utf-8")


# ---------------------------------------------------------------------------
# Validation


class ViolationCode(str, Enum):
    DANGLING_EDGE = "DanglingEdge"
    FACADE_ACCESSES_TABLE = "FacadeAccessesTable"
    ORDINAL_GAP = "OrdinalGap"
    UNMAPPED_TABLE = "UnmappedTable"
    CALL_TO_FACADE = "CallToFacade"
    DUPLICATE_ID = "DuplicateId"
    MISSING_SIGNATURE = "MissingSignature"


@dataclass(frozen=True, order=True)
class Violation:
    code: ViolationCode
    subject: str
    message: str

    def __str__(self) -> str:
        return f"{self.code.value}: {self.subject}: {self.message}"


ValidationReport = list[Violation]


def validate_model(model: SystemModel, area_map: AreaMap) -> ValidationReport:
    """Check every structural invariant; an empty list means the model is valid."""
    found: list[Violation] = []

    def add(code: ViolationCode, subject: str, message: str) -> None:
        found.append(Violation(code, subject, message))

    for name, kinds in sorted(_namespace_clashes(model).items()):
        add(ViolationCode.DUPLICATE_ID, name, f"declared as {' and '.join(kinds)}")

    callables = model.facades | model.functions
    for e in model.call_edges:
        subject = f"{e.caller}->{e.callee}#{e.ordinal}"
        if e.caller not in callables:
            add(ViolationCode.DANGLING_EDGE, subject, f"caller {e.caller!r} is not a declared facade or function")
        elif e.callee in model.facades:
            add(ViolationCode.CALL_TO_FACADE, subject, f"callee {e.callee!r} is a facade")
        elif e.callee not in model.functions:
            add(ViolationCode.DANGLING_EDGE, subject, f"callee {e.callee!r} is not a declared function")

    for e in model.access_edges:
        subject = f"{e.function}->{e.table}"
        if e.function in model.facades and e.function not in model.functions:
            add(ViolationCode.FACADE_ACCESSES_TABLE, subject, "facades never touch tables directly")
        elif e.function not in model.functions:
            add(ViolationCode.DANGLING_EDGE, subject, f"{e.function!r} is not a declared function")
        elif e.table not in model.tables:
            add(ViolationCode.DANGLING_EDGE, subject, f"{e.table!r} is not a declared table")

    by_caller: dict[str, list[int]] = defaultdict(list)
    for e in model.call_edges:
        by_caller[e.caller].append(e.ordinal)
    for caller, ordinals in sorted(by_caller.items()):
        if sorted(ordinals) != list(range(1, len(ordinals) + 1)):
            add(ViolationCode.ORDINAL_GAP, caller, f"call ordinals {sorted(ordinals)} are not 1..{len(ordinals)}")

    for name in sorted(callables - model.signatures.keys()):
        add(ViolationCode.MISSING_SIGNATURE, name, "callable has no I/O signature")
    for name in sorted(model.signatures.keys() - callables):
        add(ViolationCode.DANGLING_EDGE, name, "signature for an undeclared callable")

    mapped = area_map.assignments.keys() | area_map.control_tables
    for table in sorted(model.tables - mapped):
        add(ViolationCode.UNMAPPED_TABLE, table, "table has no business area and is not a control table")

    return found


def _namespace_clashes(model: SystemModel) -> dict[str, list[str]]:
    kinds: dict[str, list[str]] = defaultdict(list)
    for label, names in (("facade", model.facades), ("function", model.functions), ("table", model.tables)):
        for n in names:
            kinds[n].append(label)
    return {n: k for n, k in kinds.items() if len(k) > 1}
