"""Codes as explicit truth tables, and exact success probabilities by enumeration.

Packing conventions, shared by every table and every file:

* a tuple of inputs ``(v0, v1, ..)`` over spaces of sizes ``(m0, m1, ..)`` is
  the mixed-radix index ``(..(v0 * m1 + v1) * m2 + ..)``; the first input is
  most significant;
* several wanted sources are concatenated in source declaration order, first
  source in the most significant bits.

Realizations are enumerated in the same mixed-radix order over the sources
of the instance.
"""

from __future__ import annotations

import itertools
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Iterable, Mapping, Sequence, Union

from .model import (
    IndexInstance,
    MessageSpace,
    NetworkInstance,
    Rational,
    as_fraction,
    in_set,
    require_valid_index,
    require_valid_network,
    topological_order,
)

DEFAULT_MAX_REALIZATIONS = 1 << 24
MAX_REALIZATIONS_ENV = "NCIC_MAX_REALIZATIONS"


class BudgetExceeded(RuntimeError):
    """An exhaustive enumeration would exceed its configured cap."""


class CodeError(ValueError):
    """A code does not fit the instance it is evaluated against."""


def max_realizations() -> int:
    raw = os.environ.get(MAX_REALIZATIONS_ENV)
    return int(raw) if raw else DEFAULT_MAX_REALIZATIONS


def check_budget(count: int, cap: int | None = None, what: str = "realizations") -> None:
    cap = max_realizations() if cap is None else cap
    if count > cap:
        raise BudgetExceeded(f"{count} {what} exceed the enumeration cap of {cap}")


def pack(values: Sequence[int], widths: Sequence[int]) -> int:
    index = 0
    for v, w in zip(values, widths):
        index = (index << w) | v
    return index


def unpack(index: int, widths: Sequence[int]) -> tuple[int, ...]:
    out = []
    for w in reversed(widths):
        out.append(index & ((1 << w) - 1))
        index >>= w
    return tuple(reversed(out))


@dataclass(frozen=True)
class TruthTable:
    """A total function between message spaces, stored row by row."""

    input_spaces: tuple[MessageSpace, ...]
    output_space: MessageSpace
    entries: tuple[int, ...]

    def __post_init__(self) -> None:
        rows = 1 << sum(s.width_bits for s in self.input_spaces)
        if len(self.entries) != rows:
            raise CodeError(f"table has {len(self.entries)} rows, expected {rows}")
        top = self.output_space.cardinality
        for i, v in enumerate(self.entries):
            if not (0 <= v < top):
                raise CodeError(f"row {i} holds {v}, outside [0, {top})")

    @classmethod
    def from_widths(cls, input_widths: Sequence[int], output_width: int, entries: Iterable[int]) -> "TruthTable":
        return cls(tuple(MessageSpace(w) for w in input_widths), MessageSpace(output_width), tuple(entries))

    @classmethod
    def tabulate(cls, input_widths: Sequence[int], output_width: int, fn: Callable[..., int]) -> "TruthTable":
        """Materialize ``fn`` over every input tuple, in row order."""
        ranges = [range(1 << w) for w in input_widths]
        return cls.from_widths(input_widths, output_width, (fn(*args) for args in itertools.product(*ranges)))

    @classmethod
    def constant(cls, input_widths: Sequence[int], output_width: int, value: int = 0) -> "TruthTable":
        return cls.from_widths(input_widths, output_width, [value] * (1 << sum(input_widths)))

    @property
    def input_widths(self) -> tuple[int, ...]:
        return tuple(s.width_bits for s in self.input_spaces)

    @property
    def output_width(self) -> int:
        return self.output_space.width_bits

    def __call__(self, *args: int) -> int:
        return self.entries[pack(args, self.input_widths)]

    def __len__(self) -> int:
        return len(self.entries)

    def with_row(self, row: int, value: int) -> "TruthTable":
        entries = list(self.entries)
        entries[row] = value
        return TruthTable(self.input_spaces, self.output_space, tuple(entries))


@dataclass(frozen=True)
class NetworkCode:
    """Local encoders per edge and decoders per terminal.

    Encoder inputs follow :func:`in_set` of the edge; decoder inputs follow
    :func:`in_set` of the terminal and decoders output the wanted sources
    concatenated.
    """

    block_length: int
    encoders: Mapping[str, TruthTable]
    decoders: Mapping[str, TruthTable]

    def to_json(self) -> dict[str, Any]:
        return {
            "block_length": self.block_length,
            "encoders": {e: list(t.entries) for e, t in self.encoders.items()},
            "decoders": {d: list(t.entries) for d, t in self.decoders.items()},
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any], inst: NetworkInstance) -> "NetworkCode":
        n = _block_length(data)
        shapes = network_shapes(inst, n)
        encoders = _tables(data, "encoders", inst.edge_ids, shapes)
        decoders = _tables(data, "decoders", [t.id for t in inst.terminals], shapes)
        code = cls(n, encoders, decoders)
        bind_network_code(inst, code)
        return code


@dataclass(frozen=True)
class IndexCode:
    """A broadcast encoder over all sources plus per-terminal decoders.

    Decoder inputs are the broadcast value followed by the has-set sources in
    declaration order.
    """

    block_length: int
    encoder: TruthTable
    decoders: Mapping[str, TruthTable]

    def to_json(self) -> dict[str, Any]:
        return {
            "block_length": self.block_length,
            "encoder": list(self.encoder.entries),
            "decoders": {d: list(t.entries) for d, t in self.decoders.items()},
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any], inst: IndexInstance) -> "IndexCode":
        n = _block_length(data)
        shapes = index_shapes(inst, n)
        if "encoder" not in data:
            raise CodeError("code has no 'encoder' table")
        encoder = _table("encoder", data["encoder"], shapes[None])
        decoders = _tables(data, "decoders", [t.id for t in inst.terminals], shapes)
        code = cls(n, encoder, decoders)
        bind_index_code(inst, code)
        return code


def _table(name: str, rows: Any, shape: tuple[tuple[int, ...], int]) -> TruthTable:
    if not isinstance(rows, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in rows):
        raise CodeError(f"table {name!r} must be a list of integers")
    return TruthTable.from_widths(*shape, rows)


def _tables(data: Mapping[str, Any], key: str, ids: Sequence[str], shapes: Mapping) -> dict[str, TruthTable]:
    tables = data.get(key)
    if not isinstance(tables, Mapping):
        raise CodeError(f"code has no {key!r} object")
    missing = [i for i in ids if i not in tables]
    extra = sorted(set(tables) - set(ids))
    if missing or extra:
        raise CodeError(f"{key} must cover exactly {list(ids)}; missing {missing}, unknown {extra}")
    return {i: _table(i, tables[i], shapes[i]) for i in ids}


def _block_length(data: Mapping[str, Any]) -> int:
    if not isinstance(data, Mapping):
        raise CodeError(f"code JSON must be an object, got {type(data).__name__}")
    n = data.get("block_length")
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise CodeError(f"block_length must be a positive integer, got {n!r}")
    return n


def network_widths(inst: NetworkInstance, n: int) -> dict[str, int]:
    """Bit widths of every source and edge variable at block length ``n``."""
    widths = {s.id: MessageSpace.for_rate(s.rate, n).width_bits for s in inst.sources}
    widths.update({e.id: MessageSpace.for_rate(e.capacity, n).width_bits for e in inst.edges})
    return widths


def network_shapes(inst: NetworkInstance, n: int) -> dict[str, tuple[tuple[int, ...], int]]:
    """Expected ``(input widths, output width)`` of each encoder and decoder."""
    widths = network_widths(inst, n)
    shapes = {e.id: (tuple(widths[i] for i in in_set(inst, e.id)), widths[e.id]) for e in inst.edges}
    for t in inst.terminals:
        shapes[t.id] = (
            tuple(widths[i] for i in in_set(inst, t.id)),
            sum(widths[s] for s in inst.wanted_sources(t.id)),
        )
    return shapes


def index_widths(inst: IndexInstance, n: int) -> dict[str, int]:
    return {s.id: MessageSpace.for_rate(s.rate, n).width_bits for s in inst.sources}


def broadcast_width(inst: IndexInstance, n: int) -> int:
    return MessageSpace.for_rate(inst.broadcast_rate, n).width_bits


def index_shapes(inst: IndexInstance, n: int) -> dict[str | None, tuple[tuple[int, ...], int]]:
    """Shapes of the index code tables; the encoder is keyed by ``None``."""
    widths = index_widths(inst, n)
    b = broadcast_width(inst, n)
    shapes: dict[str | None, tuple[tuple[int, ...], int]] = {None: (tuple(widths[s] for s in inst.source_ids), b)}
    for t in inst.terminals:
        shapes[t.id] = (
            (b,) + tuple(widths[s] for s in inst.ordered(t.has)),
            sum(widths[s] for s in inst.ordered(t.wants)),
        )
    return shapes


def _check_table(name: str, table: TruthTable, shape: tuple[tuple[int, ...], int]) -> None:
    ins, out = shape
    if table.input_widths != ins or table.output_width != out:
        raise CodeError(
            f"table {name!r} maps widths {table.input_widths} -> {table.output_width}, "
            f"instance needs {ins} -> {out}"
        )


def bind_network_code(inst: NetworkInstance, code: NetworkCode) -> None:
    """Raise :class:`CodeError` unless ``code`` has exactly the tables ``inst`` needs."""
    shapes = network_shapes(inst, code.block_length)
    if set(code.encoders) != set(inst.edge_ids):
        raise CodeError(f"encoders cover {sorted(code.encoders)}, edges are {sorted(inst.edge_ids)}")
    tids = {t.id for t in inst.terminals}
    if set(code.decoders) != tids:
        raise CodeError(f"decoders cover {sorted(code.decoders)}, terminals are {sorted(tids)}")
    for name, table in itertools.chain(code.encoders.items(), code.decoders.items()):
        _check_table(name, table, shapes[name])


def bind_index_code(inst: IndexInstance, code: IndexCode) -> None:
    shapes = index_shapes(inst, code.block_length)
    _check_table("encoder", code.encoder, shapes[None])
    tids = {t.id for t in inst.terminals}
    if set(code.decoders) != tids:
        raise CodeError(f"decoders cover {sorted(code.decoders)}, terminals are {sorted(tids)}")
    for name, table in code.decoders.items():
        _check_table(name, table, shapes[name])


Realization = Mapping[str, int]


def _realization_tuple(ids: Sequence[str], widths: Mapping[str, int], x: Realization) -> tuple[int, ...]:
    try:
        values = tuple(x[i] for i in ids)
    except KeyError as exc:
        raise CodeError(f"realization has no value for source {exc}") from None
    for i, v in zip(ids, values):
        if not (isinstance(v, int) and 0 <= v < (1 << widths[i])):
            raise CodeError(f"value {v!r} of source {i!r} is outside its message space")
    return values


class NetworkEvaluator:
    """Precompiled evaluation of a network code, realization by realization."""

    def __init__(self, inst: NetworkInstance, code: NetworkCode, order: Sequence[str] | None = None):
        require_valid_network(inst)
        bind_network_code(inst, code)
        self.inst = inst
        self.code = code
        self.widths = network_widths(inst, code.block_length)
        self.source_ids = inst.source_ids
        self.source_widths = tuple(self.widths[s] for s in self.source_ids)
        if order is None:
            order = topological_order(inst)
        else:
            _check_order(inst, order)
        self.order = tuple(order)
        self._steps = [(e, code.encoders[e], in_set(inst, e)) for e in self.order]
        self._finals = [
            (t.id, code.decoders[t.id], in_set(inst, t.id), inst.wanted_sources(t.id)) for t in inst.terminals
        ]
        self.total = 1 << sum(self.source_widths)

    def edge_values(self, sources: Mapping[str, int]) -> dict[str, int]:
        values = dict(sources)
        for e, table, ins in self._steps:
            values[e] = table(*(values[i] for i in ins))
        return values

    def satisfied(self, sources: Mapping[str, int]) -> set[str]:
        values = self.edge_values(sources)
        ok = set()
        for tid, table, ins, wants in self._finals:
            got = table(*(values[i] for i in ins))
            if got == pack([values[s] for s in wants], [self.widths[s] for s in wants]):
                ok.add(tid)
        return ok

    def realization(self, index: int) -> dict[str, int]:
        return dict(zip(self.source_ids, unpack(index, self.source_widths)))

    def all_satisfied(self, index: int) -> bool:
        return len(self.satisfied(self.realization(index))) == len(self._finals)


def _check_order(inst: NetworkInstance, order: Sequence[str]) -> None:
    if sorted(order) != sorted(inst.edge_ids):
        raise CodeError("evaluation order is not a permutation of the edges")
    seen: set[str] = set()
    edge_ids = set(inst.edge_ids)
    for e in order:
        missing = [i for i in in_set(inst, e) if i in edge_ids and i not in seen]
        if missing:
            raise CodeError(f"edge {e!r} is evaluated before its inputs {missing}")
        seen.add(e)


def eval_global(
    inst: NetworkInstance, code: NetworkCode, x: Realization, order: Sequence[str] | None = None
) -> dict[str, int]:
    """Value carried by every edge under the source realization ``x``."""
    ev = NetworkEvaluator(inst, code, order)
    values = ev.edge_values(dict(zip(ev.source_ids, _realization_tuple(ev.source_ids, ev.widths, x))))
    return {e: values[e] for e in inst.edge_ids}


def network_satisfied(inst: NetworkInstance, code: NetworkCode, x: Realization) -> set[str]:
    ev = NetworkEvaluator(inst, code)
    return ev.satisfied(dict(zip(ev.source_ids, _realization_tuple(ev.source_ids, ev.widths, x))))


def _count_network(args: tuple[NetworkInstance, NetworkCode, int, int]) -> int:
    inst, code, start, stop = args
    ev = NetworkEvaluator(inst, code)
    return sum(1 for i in range(start, stop) if ev.all_satisfied(i))


def _partition(total: int, jobs: int) -> list[tuple[int, int]]:
    jobs = max(1, min(jobs, total))
    bounds = [total * k // jobs for k in range(jobs + 1)]
    return [(bounds[k], bounds[k + 1]) for k in range(jobs)]


def _parallel_sum(worker: Callable[[Any], int], head: tuple, total: int, jobs: int) -> int:
    chunks = [head + chunk for chunk in _partition(total, jobs)]
    if len(chunks) == 1:
        return worker(chunks[0])
    with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
        return sum(pool.map(worker, chunks))


def network_success_probability(
    inst: NetworkInstance, code: NetworkCode, *, jobs: int = 1, cap: int | None = None
) -> Fraction:
    """Exact probability that every terminal decodes, over uniform independent sources."""
    ev = NetworkEvaluator(inst, code)
    check_budget(ev.total, cap)
    good = _parallel_sum(_count_network, (inst, code), ev.total, jobs)
    return Fraction(good, ev.total)


def network_failure_count(inst: NetworkInstance, code: NetworkCode) -> int:
    """Number of realizations on which at least one terminal fails."""
    ev = NetworkEvaluator(inst, code)
    check_budget(ev.total)
    return sum(1 for i in range(ev.total) if not ev.all_satisfied(i))


class IndexEvaluator:
    def __init__(self, inst: IndexInstance, code: IndexCode):
        require_valid_index(inst)
        bind_index_code(inst, code)
        self.inst = inst
        self.code = code
        self.widths = index_widths(inst, code.block_length)
        self.source_ids = inst.source_ids
        self.source_widths = tuple(self.widths[s] for s in self.source_ids)
        pos = {s: k for k, s in enumerate(self.source_ids)}
        self._finals = []
        for t in inst.terminals:
            wants = inst.ordered(t.wants)
            self._finals.append((
                t.id,
                code.decoders[t.id],
                tuple(pos[s] for s in inst.ordered(t.has)),
                tuple(pos[s] for s in wants),
                tuple(self.widths[s] for s in wants),
            ))
        self.total = 1 << sum(self.source_widths)

    def broadcast(self, values: Sequence[int]) -> int:
        return self.code.encoder(*values)

    def satisfied_values(self, values: Sequence[int]) -> set[str]:
        b = self.code.encoder(*values)
        ok = set()
        for tid, table, has, wants, wwidths in self._finals:
            if table(b, *(values[k] for k in has)) == pack([values[k] for k in wants], wwidths):
                ok.add(tid)
        return ok

    def all_satisfied_values(self, values: Sequence[int]) -> bool:
        b = self.code.encoder(*values)
        for _, table, has, wants, wwidths in self._finals:
            if table(b, *(values[k] for k in has)) != pack([values[k] for k in wants], wwidths):
                return False
        return True

    def values(self, index: int) -> tuple[int, ...]:
        return unpack(index, self.source_widths)


def index_satisfied(inst: IndexInstance, code: IndexCode, x: Realization) -> set[str]:
    ev = IndexEvaluator(inst, code)
    return ev.satisfied_values(_realization_tuple(ev.source_ids, ev.widths, x))


def _count_index(args: tuple[IndexInstance, IndexCode, int, int]) -> int:
    inst, code, start, stop = args
    ev = IndexEvaluator(inst, code)
    return sum(1 for i in range(start, stop) if ev.all_satisfied_values(ev.values(i)))


def index_success_probability(
    inst: IndexInstance, code: IndexCode, *, jobs: int = 1, cap: int | None = None
) -> Fraction:
    ev = IndexEvaluator(inst, code)
    check_budget(ev.total, cap)
    good = _parallel_sum(_count_index, (inst, code), ev.total, jobs)
    return Fraction(good, ev.total)


def index_failure_count(inst: IndexInstance, code: IndexCode) -> int:
    ev = IndexEvaluator(inst, code)
    check_budget(ev.total)
    return sum(1 for i in range(ev.total) if not ev.all_satisfied_values(ev.values(i)))


AnyInstance = Union[NetworkInstance, IndexInstance]
AnyCode = Union[NetworkCode, IndexCode]


def success_probability(inst: AnyInstance, code: AnyCode, *, jobs: int = 1) -> Fraction:
    if isinstance(inst, NetworkInstance) and isinstance(code, NetworkCode):
        return network_success_probability(inst, code, jobs=jobs)
    if isinstance(inst, IndexInstance) and isinstance(code, IndexCode):
        return index_success_probability(inst, code, jobs=jobs)
    raise CodeError(f"cannot evaluate a {type(code).__name__} on a {type(inst).__name__}")


def check_feasible(inst: AnyInstance, code: AnyCode, eps: Rational, *, jobs: int = 1) -> bool:
    """True iff the code succeeds with probability at least ``1 - eps``."""
    eps = as_fraction(eps)
    if eps >= 1:
        # vacuous bound, but the code must still fit the instance
        if isinstance(inst, NetworkInstance) and isinstance(code, NetworkCode):
            bind_network_code(inst, code)
        elif isinstance(inst, IndexInstance) and isinstance(code, IndexCode):
            bind_index_code(inst, code)
        else:
            raise CodeError(f"cannot evaluate a {type(code).__name__} on a {type(inst).__name__}")
        return True
    return success_probability(inst, code, jobs=jobs) >= 1 - eps
