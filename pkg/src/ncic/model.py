"""Network-coding and index-coding problem instances.

Instances are immutable. Structural checks are reported through
:class:`ValidationReport` rather than raised, so a malformed file can be
inspected in full; operations that need a well-formed instance call
:func:`require_valid_network` / :func:`require_valid_index` first.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Mapping, Sequence, Union

Rational = Union[int, Fraction, str, float]


class InstanceError(ValueError):
    """An instance is malformed or fails structural validation."""


class WidthError(ValueError):
    """A rate/capacity times the block length is not an integral bit count."""


def as_fraction(value: Rational) -> Fraction:
    """Parse a rational given as an int, a Fraction, a float or a ``"p/q"`` string."""
    if isinstance(value, bool):
        raise InstanceError(f"not a rational: {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        # JSON numbers like 0.5 are exact binary fractions; 0.1 is not and is refused.
        frac = Fraction(value)
        if frac.limit_denominator(1 << 16) != frac:
            raise InstanceError(f"float {value!r} is not a short rational; use a 'p/q' string")
        return frac
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise InstanceError(f"not a rational: {value!r}") from exc
    raise InstanceError(f"not a rational: {value!r}")


def fraction_str(value: Fraction) -> str:
    """Serialize a probability as an exact ``"p/q"`` string (``1`` becomes ``"1/1"``)."""
    value = Fraction(value)
    return f"{value.numerator}/{value.denominator}"


def rational_json(value: Fraction) -> int | str:
    """Rates and capacities: integers stay JSON numbers, the rest become ``"p/q"``."""
    if value.denominator == 1:
        return value.numerator
    return fraction_str(value)


@dataclass(frozen=True)
class MessageSpace:
    """The integer interval ``[0, 2**width_bits)``."""

    width_bits: int

    def __post_init__(self) -> None:
        if not isinstance(self.width_bits, int) or self.width_bits < 0:
            raise WidthError(f"width must be a nonnegative integer, got {self.width_bits!r}")

    @classmethod
    def for_rate(cls, rate: Rational, block_length: int) -> "MessageSpace":
        bits = as_fraction(rate) * block_length
        if bits.denominator != 1:
            raise WidthError(f"rate {rate} at block length {block_length} gives {bits} bits")
        return cls(int(bits))

    @property
    def cardinality(self) -> int:
        return 1 << self.width_bits

    def __contains__(self, value: object) -> bool:
        return isinstance(value, int) and 0 <= value < self.cardinality


@dataclass(frozen=True)
class Edge:
    id: str
    tail: str
    head: str
    capacity: Fraction


@dataclass(frozen=True)
class Source:
    id: str
    node: str
    rate: Fraction


@dataclass(frozen=True)
class Terminal:
    id: str
    node: str
    wants: frozenset[str]


@dataclass(frozen=True)
class IndexSource:
    id: str
    rate: Fraction


@dataclass(frozen=True)
class IndexTerminal:
    id: str
    wants: frozenset[str]
    has: frozenset[str]


@dataclass(frozen=True)
class Violation:
    rule: str
    message: str
    element: str | None = None


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()
    warnings: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def to_json(self) -> dict[str, Any]:
        def rows(items):
            return [{"rule": v.rule, "message": v.message, "element": v.element} for v in items]

        return {"ok": self.ok, "violations": rows(self.violations), "warnings": rows(self.warnings)}


@dataclass(frozen=True)
class NetworkInstance:
    """A directed acyclic network with capacitated edges, sources and demanding terminals."""

    nodes: tuple[str, ...]
    edges: tuple[Edge, ...]
    sources: tuple[Source, ...]
    terminals: tuple[Terminal, ...]
    _edge_index: dict[str, int] = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_edge_index", {e.id: i for i, e in enumerate(self.edges)})

    @classmethod
    def build(
        cls,
        nodes: Iterable[str],
        edges: Iterable[tuple[str, str, str, Rational]],
        sources: Iterable[tuple[str, str, Rational]],
        terminals: Iterable[tuple[str, str, Iterable[str]]],
    ) -> "NetworkInstance":
        """Convenience constructor from plain tuples ``(id, from, to, capacity)`` etc."""
        return cls(
            nodes=tuple(nodes),
            edges=tuple(Edge(i, u, v, as_fraction(c)) for i, u, v, c in edges),
            sources=tuple(Source(i, node, as_fraction(r)) for i, node, r in sources),
            terminals=tuple(Terminal(i, node, frozenset(w)) for i, node, w in terminals),
        )

    def edge(self, edge_id: str) -> Edge:
        try:
            return self.edges[self._edge_index[edge_id]]
        except KeyError:
            raise KeyError(f"unknown edge {edge_id!r}") from None

    def source(self, source_id: str) -> Source:
        for s in self.sources:
            if s.id == source_id:
                return s
        raise KeyError(f"unknown source {source_id!r}")

    def terminal(self, terminal_id: str) -> Terminal:
        for t in self.terminals:
            if t.id == terminal_id:
                return t
        raise KeyError(f"unknown terminal {terminal_id!r}")

    @property
    def source_ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.sources)

    @property
    def edge_ids(self) -> tuple[str, ...]:
        return tuple(e.id for e in self.edges)

    def wanted_sources(self, terminal_id: str) -> tuple[str, ...]:
        """Wanted sources of a terminal, in source declaration order."""
        wants = self.terminal(terminal_id).wants
        return tuple(s for s in self.source_ids if s in wants)

    def with_capacities(self, capacities: Mapping[str, Rational]) -> "NetworkInstance":
        edges = tuple(
            Edge(e.id, e.tail, e.head, as_fraction(capacities.get(e.id, e.capacity)))
            for e in self.edges
        )
        return NetworkInstance(self.nodes, edges, self.sources, self.terminals)

    def to_json(self) -> dict[str, Any]:
        return {
            "nodes": list(self.nodes),
            "edges": [
                {"id": e.id, "from": e.tail, "to": e.head, "capacity": rational_json(e.capacity)}
                for e in self.edges
            ],
            "sources": [
                {"id": s.id, "node": s.node, "rate": rational_json(s.rate)} for s in self.sources
            ],
            "terminals": [
                {"id": t.id, "node": t.node, "wants": [s for s in self.source_ids if s in t.wants]
                 + sorted(t.wants - set(self.source_ids))}
                for t in self.terminals
            ],
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "NetworkInstance":
        try:
            return cls(
                nodes=tuple(str(n) for n in data["nodes"]),
                edges=tuple(
                    Edge(str(e["id"]), str(e["from"]), str(e["to"]), as_fraction(e["capacity"]))
                    for e in data["edges"]
                ),
                sources=tuple(
                    Source(str(s["id"]), str(s["node"]), as_fraction(s["rate"]))
                    for s in data["sources"]
                ),
                terminals=tuple(
                    Terminal(str(t["id"]), str(t["node"]), frozenset(str(w) for w in t["wants"]))
                    for t in data["terminals"]
                ),
            )
        except (KeyError, TypeError) as exc:
            raise InstanceError(f"malformed network instance: missing or bad field {exc}") from exc


@dataclass(frozen=True)
class IndexInstance:
    """A broadcast-with-side-information problem: one server, many clients."""

    sources: tuple[IndexSource, ...]
    terminals: tuple[IndexTerminal, ...]
    broadcast_rate: Fraction

    @classmethod
    def build(
        cls,
        sources: Iterable[tuple[str, Rational]],
        terminals: Iterable[tuple[str, Iterable[str], Iterable[str]]],
        broadcast_rate: Rational,
    ) -> "IndexInstance":
        return cls(
            sources=tuple(IndexSource(i, as_fraction(r)) for i, r in sources),
            terminals=tuple(IndexTerminal(i, frozenset(w), frozenset(h)) for i, w, h in terminals),
            broadcast_rate=as_fraction(broadcast_rate),
        )

    @property
    def source_ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.sources)

    def source(self, source_id: str) -> IndexSource:
        for s in self.sources:
            if s.id == source_id:
                return s
        raise KeyError(f"unknown source {source_id!r}")

    def terminal(self, terminal_id: str) -> IndexTerminal:
        for t in self.terminals:
            if t.id == terminal_id:
                return t
        raise KeyError(f"unknown terminal {terminal_id!r}")

    def ordered(self, ids: Iterable[str]) -> tuple[str, ...]:
        """Restrict source declaration order to ``ids``."""
        ids = set(ids)
        return tuple(s for s in self.source_ids if s in ids)

    def with_broadcast_rate(self, rate: Rational) -> "IndexInstance":
        return IndexInstance(self.sources, self.terminals, as_fraction(rate))

    def with_terminals(self, terminals: Sequence[IndexTerminal]) -> "IndexInstance":
        return IndexInstance(self.sources, tuple(terminals), self.broadcast_rate)

    def to_json(self) -> dict[str, Any]:
        return {
            "sources": [{"id": s.id, "rate": rational_json(s.rate)} for s in self.sources],
            "terminals": [
                {"id": t.id, "wants": list(self.ordered(t.wants)), "has": list(self.ordered(t.has))}
                for t in self.terminals
            ],
            "broadcast_rate": rational_json(self.broadcast_rate),
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "IndexInstance":
        try:
            return cls(
                sources=tuple(IndexSource(str(s["id"]), as_fraction(s["rate"])) for s in data["sources"]),
                terminals=tuple(
                    IndexTerminal(
                        str(t["id"]),
                        frozenset(str(w) for w in t["wants"]),
                        frozenset(str(h) for h in t.get("has", [])),
                    )
                    for t in data["terminals"]
                ),
                broadcast_rate=as_fraction(data["broadcast_rate"]),
            )
        except (KeyError, TypeError) as exc:
            raise InstanceError(f"malformed index instance: missing or bad field {exc}") from exc


def _duplicates(ids: Iterable[str]) -> list[str]:
    seen: set[str] = set()
    dup: list[str] = []
    for i in ids:
        if i in seen and i not in dup:
            dup.append(i)
        seen.add(i)
    return dup


def _find_cycle(nodes: Sequence[str], edges: Sequence[Edge]) -> list[str] | None:
    adj: dict[str, list[str]] = {n: [] for n in nodes}
    for e in edges:
        adj.setdefault(e.tail, []).append(e.head)
        adj.setdefault(e.head, [])
    color = dict.fromkeys(adj, 0)
    for root in adj:
        if color[root]:
            continue
        stack = [(root, iter(adj[root]))]
        path = [root]
        color[root] = 1
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                color[node] = 2
                stack.pop()
                path.pop()
            elif color[nxt] == 1:
                return path[path.index(nxt):] + [nxt]
            elif color[nxt] == 0:
                color[nxt] = 1
                stack.append((nxt, iter(adj[nxt])))
                path.append(nxt)
    return None


def validate_network(inst: NetworkInstance) -> ValidationReport:
    """Check every structural rule of a network instance and report all violations."""
    bad: list[Violation] = []
    for kind, ids in (
        ("node", inst.nodes),
        ("edge", inst.edge_ids),
        ("source", inst.source_ids),
        ("terminal", [t.id for t in inst.terminals]),
    ):
        for dup in _duplicates(ids):
            bad.append(Violation("unique-ids", f"duplicate {kind} id {dup!r}", dup))
    # in_set accepts an edge or a terminal id, so the two namespaces must not collide
    for clash in sorted(set(inst.edge_ids) & {t.id for t in inst.terminals}):
        bad.append(Violation("unique-ids", f"id {clash!r} names both an edge and a terminal", clash))

    nodes = set(inst.nodes)
    for e in inst.edges:
        for end in (e.tail, e.head):
            if end not in nodes:
                bad.append(Violation("unknown-node", f"edge {e.id!r} touches undeclared node {end!r}", e.id))
        if e.capacity < 0:
            bad.append(Violation("nonnegative", f"edge {e.id!r} has negative capacity", e.id))
    for s in inst.sources:
        if s.node not in nodes:
            bad.append(Violation("unknown-node", f"source {s.id!r} sits on undeclared node {s.node!r}", s.id))
        if s.rate < 0:
            bad.append(Violation("nonnegative", f"source {s.id!r} has negative rate", s.id))
    declared = set(inst.source_ids)
    for t in inst.terminals:
        if t.node not in nodes:
            bad.append(Violation("unknown-node", f"terminal {t.id!r} sits on undeclared node {t.node!r}", t.id))
        for w in sorted(t.wants - declared):
            bad.append(Violation("unknown-source", f"terminal {t.id!r} wants undeclared source {w!r}", t.id))

    cycle = _find_cycle(inst.nodes, inst.edges)
    if cycle is not None:
        bad.append(Violation("acyclicity", "directed cycle " + " -> ".join(cycle), cycle[0]))

    source_nodes = {s.node for s in inst.sources}
    terminal_nodes = {t.node for t in inst.terminals}
    for e in inst.edges:
        if e.head in source_nodes:
            bad.append(Violation("source-no-incoming", f"edge {e.id!r} enters source node {e.head!r}", e.id))
        if e.tail in terminal_nodes:
            bad.append(Violation("terminal-no-outgoing", f"edge {e.id!r} leaves terminal node {e.tail!r}", e.id))
    return ValidationReport(tuple(bad))


def require_valid_network(inst: NetworkInstance) -> None:
    report = validate_network(inst)
    if not report.ok:
        raise InstanceError("; ".join(v.message for v in report.violations))


def validate_index(inst: IndexInstance) -> ValidationReport:
    bad: list[Violation] = []
    warn: list[Violation] = []
    for kind, ids in (("source", inst.source_ids), ("terminal", [t.id for t in inst.terminals])):
        for dup in _duplicates(ids):
            bad.append(Violation("unique-ids", f"duplicate {kind} id {dup!r}", dup))
    for s in inst.sources:
        if s.rate < 0:
            bad.append(Violation("nonnegative", f"source {s.id!r} has negative rate", s.id))
    if inst.broadcast_rate < 0:
        bad.append(Violation("nonnegative", "broadcast rate is negative"))
    declared = set(inst.source_ids)
    for t in inst.terminals:
        for ref in sorted((t.wants | t.has) - declared):
            bad.append(Violation("unknown-source", f"terminal {t.id!r} references undeclared source {ref!r}", t.id))
        if not t.wants:
            # reductions of terminals demanding nothing land here; tolerated
            warn.append(Violation("empty-wants", f"terminal {t.id!r} wants nothing", t.id))
        if t.wants & t.has:
            warn.append(Violation("wants-has-overlap", f"terminal {t.id!r} already has some of what it wants", t.id))
    return ValidationReport(tuple(bad), tuple(warn))


def require_valid_index(inst: IndexInstance) -> None:
    report = validate_index(inst)
    if not report.ok:
        raise InstanceError("; ".join(v.message for v in report.violations))


def in_set(inst: NetworkInstance, x: str) -> tuple[str, ...]:
    """Inputs of an edge or a terminal.

    For an edge ``(u, v)`` these are the edges entering ``u``, or the sources
    located at ``u`` when ``u`` is a source node. For a terminal they are the
    edges entering its node. Edge ids come in declaration order, and so do
    source ids.
    """
    if x in inst._edge_index:
        node = inst.edge(x).tail
        here = tuple(s.id for s in inst.sources if s.node == node)
        if here:
            return here
    else:
        try:
            node = inst.terminal(x).node
        except KeyError:
            raise KeyError(f"{x!r} is neither an edge nor a terminal") from None
    return tuple(e.id for e in inst.edges if e.head == node)


def topological_order(inst: NetworkInstance) -> tuple[str, ...]:
    """Edges ordered so that every edge follows its inputs; ties go to declaration order."""
    require_valid_network(inst)
    pos = inst._edge_index
    deps = {e.id: {i for i in in_set(inst, e.id) if i in pos} for e in inst.edges}
    users: dict[str, list[str]] = {e.id: [] for e in inst.edges}
    for e, ins in deps.items():
        for i in ins:
            users[i].append(e)
    pending = {e: len(ins) for e, ins in deps.items()}
    ready = [pos[e] for e, k in pending.items() if k == 0]
    heapq.heapify(ready)
    order: list[str] = []
    while ready:
        e = inst.edges[heapq.heappop(ready)].id
        order.append(e)
        for u in users[e]:
            pending[u] -= 1
            if pending[u] == 0:
                heapq.heappush(ready, pos[u])
    return tuple(order)


def load_json(path: str) -> Any:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def load_network(path: str) -> NetworkInstance:
    return NetworkInstance.from_json(load_json(path))


def load_index(path: str) -> IndexInstance:
    return IndexInstance.from_json(load_json(path))
