"""Build the index-coding instance equivalent to a network-coding instance.

The server holds one variable per network source (``src:<id>``) and one per
edge (``edge:<id>``). Clients are one per edge (``edge:<id>``), one per
network terminal (``t:<id>``) and a single ``all`` client that has every
source variable and wants every edge variable. The broadcast rate is the
total edge capacity.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Mapping, Sequence

from .model import (
    IndexInstance,
    IndexSource,
    IndexTerminal,
    InstanceError,
    NetworkInstance,
    Rational,
    as_fraction,
    in_set,
    rational_json,
    require_valid_network,
)

ALL = "all"


def source_name(source_id: str) -> str:
    return f"src:{source_id}"


def edge_name(edge_id: str) -> str:
    return f"edge:{edge_id}"


def terminal_name(terminal_id: str) -> str:
    return f"t:{terminal_id}"


@dataclass(frozen=True)
class Origin:
    kind: str  # "source", "edge", "terminal" or "all"
    id: str | None = None

    def to_json(self) -> dict[str, Any]:
        return {"kind": self.kind, "id": self.id}


@dataclass(frozen=True)
class ReductionMap:
    """Where every index-coding source and client came from."""

    source_of: Mapping[str, Origin]
    terminal_of: Mapping[str, Origin]
    c_hat_b: Fraction

    def source_origin_ids(self) -> tuple[str, ...]:
        return tuple(k for k, o in self.source_of.items() if o.kind == "source")

    def edge_origin_ids(self) -> tuple[str, ...]:
        return tuple(k for k, o in self.source_of.items() if o.kind == "edge")

    def terminal_for(self, kind: str, ident: str | None = None) -> str:
        for k, o in self.terminal_of.items():
            if o.kind == kind and o.id == ident:
                return k
        raise KeyError(f"map has no {kind} terminal {ident!r}")

    def all_terminal(self) -> str:
        return self.terminal_for("all")

    def to_json(self) -> dict[str, Any]:
        return {
            "sources": {k: o.to_json() for k, o in self.source_of.items()},
            "terminals": {k: o.to_json() for k, o in self.terminal_of.items()},
            "c_hat_b": rational_json(self.c_hat_b),
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "ReductionMap":
        try:
            return cls(
                source_of={k: Origin(v["kind"], v.get("id")) for k, v in data["sources"].items()},
                terminal_of={k: Origin(v["kind"], v.get("id")) for k, v in data["terminals"].items()},
                c_hat_b=as_fraction(data["c_hat_b"]),
            )
        except (KeyError, TypeError, AttributeError) as exc:
            raise InstanceError(f"malformed reduction map: {exc}") from exc


def reduce_rates(inst: NetworkInstance, rates: Sequence[Rational] | Mapping[str, Rational]) -> tuple[Fraction, ...]:
    """Rates of the index sources: source rates first, then edge capacities."""
    if isinstance(rates, Mapping):
        if set(rates) != set(inst.source_ids):
            raise ValueError(f"rates given for {sorted(rates)}, sources are {sorted(inst.source_ids)}")
        values = [rates[s] for s in inst.source_ids]
    else:
        values = list(rates)
        if len(values) != len(inst.sources):
            raise ValueError(f"{len(values)} rates given for {len(inst.sources)} sources")
    return tuple(as_fraction(r) for r in values) + tuple(e.capacity for e in inst.edges)


def reduce_instance(
    inst: NetworkInstance, rates: Sequence[Rational] | Mapping[str, Rational] | None = None
) -> tuple[IndexInstance, ReductionMap]:
    require_valid_network(inst)
    if rates is None:
        rates = [s.rate for s in inst.sources]
    hat_rates = reduce_rates(inst, rates)

    names = [source_name(s) for s in inst.source_ids] + [edge_name(e) for e in inst.edge_ids]
    sources = tuple(IndexSource(name, r) for name, r in zip(names, hat_rates))
    source_of: dict[str, Origin] = {source_name(s): Origin("source", s) for s in inst.source_ids}
    source_of.update({edge_name(e): Origin("edge", e) for e in inst.edge_ids})

    source_nodes = {s.node for s in inst.sources}

    terminals: list[IndexTerminal] = []
    terminal_of: dict[str, Origin] = {}
    for e in inst.edges:
        name = edge_name(e.id)
        rename = source_name if e.tail in source_nodes else edge_name
        has = frozenset(rename(i) for i in in_set(inst, e.id))
        terminals.append(IndexTerminal(name, frozenset({name}), has))
        terminal_of[name] = Origin("edge", e.id)
    for t in inst.terminals:
        name = terminal_name(t.id)
        terminals.append(IndexTerminal(
            name,
            frozenset(source_name(s) for s in t.wants),
            frozenset(edge_name(i) for i in in_set(inst, t.id)),
        ))
        terminal_of[name] = Origin("terminal", t.id)
    terminals.append(IndexTerminal(
        ALL,
        frozenset(edge_name(e) for e in inst.edge_ids),
        frozenset(source_name(s) for s in inst.source_ids),
    ))
    terminal_of[ALL] = Origin("all")

    c_hat_b = sum((e.capacity for e in inst.edges), Fraction(0))
    return IndexInstance(sources, tuple(terminals), c_hat_b), ReductionMap(source_of, terminal_of, c_hat_b)


def check_map(inst: NetworkInstance, hat: IndexInstance, rmap: ReductionMap) -> None:
    """Raise unless ``(hat, rmap)`` is exactly the reduction of ``inst``."""
    try:
        rates = [hat.source(source_name(s)).rate for s in inst.source_ids]
    except KeyError as exc:
        raise InstanceError(f"index instance lacks a network source: {exc}") from None
    expected_hat, expected_map = reduce_instance(inst, rates)
    if rmap != expected_map:
        raise InstanceError("reduction map does not match the network instance")
    if hat != expected_hat:
        raise InstanceError("index instance is not the reduction of the network instance")
