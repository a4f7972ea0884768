"""Partition tables into business subsystems.

Each business area of the area map becomes a subsystem.  Tables claimed by
two or more areas are pulled out of every subsystem into ``shared_tables``
and the claiming subsystems are disqualified.  Control tables form the SSC,
which takes part in reachability but never yields candidates.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass

from .model import AreaMap, SystemModel


class UnknownSubsystem(KeyError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(name)

    def __str__(self) -> str:
        return f"unknown subsystem {self.name!r}"


@dataclass(frozen=True)
class Subsystem:
    name: str
    tables: frozenset[str]


@dataclass(frozen=True)
class SubsystemPartition:
    subsystems: Mapping[str, Subsystem]
    control: frozenset[str]
    shared_tables: frozenset[str]
    disqualified: frozenset[str]

    __hash__ = None  # type: ignore[assignment]

    def names(self) -> list[str]:
        return sorted(self.subsystems)

    def owner(self, table: str) -> str | None:
        """Subsystem owning ``table``, or None for control, shared or unmapped tables."""
        for name, ss in self.subsystems.items():
            if table in ss.tables:
                return name
        return None


def partition_tables(model: SystemModel, area_map: AreaMap) -> SubsystemPartition:
    """Split the model's tables into subsystems, the SSC and the shared set.

    Areas whose every table turned out to be shared are kept as empty,
    disqualified subsystems so they still show up in reports.
    """
    owned: dict[str, set[str]] = {area: set() for area in area_map.areas}
    shared: set[str] = set()
    disqualified: set[str] = set()
    for table in model.tables:
        areas = area_map.assignments.get(table)
        if not areas:
            continue
        if len(areas) >= 2:
            shared.add(table)
            disqualified.update(areas)
        else:
            (area,) = areas
            owned[area].add(table)
    subsystems = {name: Subsystem(name, frozenset(owned[name])) for name in sorted(owned)}
    return SubsystemPartition(
        subsystems,
        frozenset(model.tables & area_map.control_tables),
        frozenset(shared),
        frozenset(disqualified),
    )


def tables_of(partition: SubsystemPartition, ss: str) -> frozenset[str]:
    try:
        return partition.subsystems[ss].tables
    except KeyError:
        raise UnknownSubsystem(ss) from None
