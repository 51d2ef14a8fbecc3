"""Moving codes between a network instance and its index-coding reduction.

Network to index: the broadcast carries, for every edge, the edge variable
xored with the value the network code puts on that edge. Each client peels
off the chunks of its inputs with its side information and replays the
network code.

Index to network: pin the broadcast input of every edge client's decoder to
one value ``sigma`` and use the result as that edge's local encoder (and the
terminal clients' decoders as network decoders). ``sigma`` is chosen to
cover as many source realizations as possible; with collocated sources, a
small set of such values plus an overhead message is used instead.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Mapping

from .codes import (
    BudgetExceeded,
    IndexCode,
    IndexEvaluator,
    NetworkCode,
    NetworkEvaluator,
    TruthTable,
    _partition,
    bind_network_code,
    broadcast_width,
    check_budget,
    index_widths,
    network_success_probability,
    network_widths,
    pack,
    unpack,
)
from .model import IndexInstance, InstanceError, NetworkInstance, Rational, as_fraction, fraction_str, in_set
from .reduction import ReductionMap, check_map, edge_name, reduce_instance, source_name

__all__ = [
    "BudgetExceeded",
    "Claim1Result",
    "CoverSet",
    "GoodSetTable",
    "InvariantError",
    "SigmaSelection",
    "TransferReport",
    "TwoPhaseReport",
    "check_claim1",
    "collocated_two_phase_check",
    "find_cover",
    "good_sets",
    "index_to_network_code",
    "network_to_index_code",
    "select_sigma",
    "transfer_report",
]


class InvariantError(AssertionError):
    """A guarantee of the construction failed to hold on a concrete code."""


def _chunk_layout(inst: NetworkInstance, n: int) -> dict[str, tuple[int, int]]:
    """``edge id -> (shift, width)`` of its chunk in the broadcast word (first edge most significant)."""
    widths = network_widths(inst, n)
    layout = {}
    shift = 0
    for e in reversed(inst.edge_ids):
        layout[e] = (shift, widths[e])
        shift += widths[e]
    return layout


def _chunk(b: int, shift: int, width: int) -> int:
    return (b >> shift) & ((1 << width) - 1)


def network_to_index_code(inst: NetworkInstance, rmap: ReductionMap, nc: NetworkCode) -> IndexCode:
    """Index code for the reduction of ``inst`` that succeeds exactly when ``nc`` does."""
    hat, expected = reduce_instance(inst)
    if rmap != expected:
        raise InstanceError("reduction map does not belong to this network instance")
    ev = NetworkEvaluator(inst, nc)
    n = nc.block_length
    widths = network_widths(inst, n)
    layout = _chunk_layout(inst, n)
    edge_bits = sum(widths[e] for e in inst.edge_ids)
    src_widths = [widths[s] for s in inst.source_ids]
    check_budget(1 << (sum(src_widths) + edge_bits), what="encoder rows")

    # Global encodings of every partial realization, packed like the broadcast word.
    global_word = []
    for xs in range(ev.total):
        values = ev.edge_values(ev.realization(xs))
        global_word.append(pack([values[e] for e in inst.edge_ids], [widths[e] for e in inst.edge_ids]))

    # Source variables precede edge variables, so a row index splits as (xs, xe);
    # chunk-wise xor of two packed words is the xor of the words.
    mask = (1 << edge_bits) - 1
    encoder = TruthTable.from_widths(
        src_widths + [widths[e] for e in inst.edge_ids],
        edge_bits,
        (global_word[row >> edge_bits] ^ (row & mask) for row in range(1 << (sum(src_widths) + edge_bits))),
    )

    source_nodes = {s.node for s in inst.sources}
    decoders: dict[str, TruthTable] = {}
    for e in inst.edges:
        ins = in_set(inst, e.id)
        f_e = nc.encoders[e.id]
        shift, width = layout[e.id]
        in_widths = [widths[i] for i in ins]
        if e.tail in source_nodes:
            def decode(b, *xs, f_e=f_e, shift=shift, width=width):
                return _chunk(b, shift, width) ^ f_e(*xs)
        else:
            in_layout = [layout[i] for i in ins]

            def decode(b, *xe, f_e=f_e, shift=shift, width=width, in_layout=in_layout):
                recovered = [_chunk(b, s, w) ^ x for (s, w), x in zip(in_layout, xe)]
                return _chunk(b, shift, width) ^ f_e(*recovered)
        decoders[edge_name(e.id)] = TruthTable.tabulate([edge_bits] + in_widths, widths[e.id], decode)

    for t in inst.terminals:
        ins = in_set(inst, t.id)
        g_t = nc.decoders[t.id]
        in_layout = [layout[i] for i in ins]

        def decode(b, *xe, g_t=g_t, in_layout=in_layout):
            return g_t(*(_chunk(b, s, w) ^ x for (s, w), x in zip(in_layout, xe)))

        decoders[rmap.terminal_for("terminal", t.id)] = TruthTable.tabulate(
            [edge_bits] + [widths[i] for i in ins], g_t.output_width, decode
        )

    decoders[rmap.all_terminal()] = TruthTable.tabulate(
        [edge_bits] + src_widths,
        edge_bits,
        lambda b, *xs: b ^ global_word[pack(xs, src_widths)],
    )
    ordered = {t.id: decoders[t.id] for t in hat.terminals}
    return IndexCode(n, encoder, ordered)


@dataclass(frozen=True)
class GoodSetTable:
    """For each partial realization of the source-origin variables, its good edge-variable realizations.

    ``good[xs]`` maps each good ``xe`` to the broadcast value it produces.
    Both ``xs`` and ``xe`` are mixed-radix indices over the source-origin and
    edge-origin variables, in declaration order.
    """

    block_length: int
    source_ids: tuple[str, ...]
    edge_ids: tuple[str, ...]
    source_widths: tuple[int, ...]
    edge_widths: tuple[int, ...]
    broadcast_bits: int
    good: Mapping[int, Mapping[int, int]]

    @property
    def partial_count(self) -> int:
        return 1 << sum(self.source_widths)

    @property
    def edge_count(self) -> int:
        return 1 << sum(self.edge_widths)

    @property
    def total(self) -> int:
        return self.partial_count * self.edge_count

    def sets(self) -> dict[int, frozenset[int]]:
        return {xs: frozenset(a) for xs, a in self.good.items()}

    def good_pairs(self) -> int:
        return sum(len(a) for a in self.good.values())

    def success_probability(self) -> Fraction:
        return Fraction(self.good_pairs(), self.total)

    def source_values(self, xs: int) -> dict[str, int]:
        return dict(zip(self.source_ids, unpack(xs, self.source_widths)))

    def edge_values(self, xe: int) -> dict[str, int]:
        return dict(zip(self.edge_ids, unpack(xe, self.edge_widths)))


def _split_layout(hat: IndexInstance, rmap: ReductionMap, n: int):
    src = hat.ordered(rmap.source_origin_ids())
    edges = hat.ordered(rmap.edge_origin_ids())
    if set(src) | set(edges) != set(hat.source_ids):
        raise InstanceError("reduction map does not classify every index source")
    widths = index_widths(hat, n)
    return src, edges, tuple(widths[s] for s in src), tuple(widths[e] for e in edges)


def _good_rows(args) -> list[tuple[int, int, int]]:
    hat, ic, rmap, start, stop = args
    ev = IndexEvaluator(hat, ic)
    src, edges, sw, ew = _split_layout(hat, rmap, ic.block_length)
    pos = {s: k for k, s in enumerate(hat.source_ids)}
    src_pos = [pos[s] for s in src]
    edge_pos = [pos[e] for e in edges]
    edge_bits = sum(ew)
    out = []
    values = [0] * len(hat.source_ids)
    for row in range(start, stop):
        xs, xe = row >> edge_bits, row & ((1 << edge_bits) - 1)
        for p, v in zip(src_pos, unpack(xs, sw)):
            values[p] = v
        for p, v in zip(edge_pos, unpack(xe, ew)):
            values[p] = v
        if ev.all_satisfied_values(values):
            out.append((xs, xe, ev.broadcast(values)))
    return out


def good_sets(hat: IndexInstance, ic: IndexCode, rmap: ReductionMap, *, jobs: int = 1) -> GoodSetTable:
    """Exhaustively classify every joint realization as good or bad."""
    n = ic.block_length
    src, edges, sw, ew = _split_layout(hat, rmap, n)
    IndexEvaluator(hat, ic)  # validates the binding up front
    total = 1 << (sum(sw) + sum(ew))
    check_budget(total)

    chunks = [(hat, ic, rmap, a, b) for a, b in _partition(total, jobs)]
    if len(chunks) == 1:
        rows = _good_rows(chunks[0])
    else:
        with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
            rows = [r for part in pool.map(_good_rows, chunks) for r in part]
    good: dict[int, dict[int, int]] = {xs: {} for xs in range(1 << sum(sw))}
    for xs, xe, b in rows:
        good[xs][xe] = b

    return GoodSetTable(n, src, edges, sw, ew, broadcast_width(hat, n), good)


@dataclass(frozen=True)
class Claim1Result:
    """Injectivity of the broadcast on each good set; falsy with a witness when it fails."""

    ok: bool
    counterexample: tuple[int, int, int] | None = None  # (xs, xe, xe') with equal broadcasts

    def __bool__(self) -> bool:
        return self.ok


def check_claim1(hat: IndexInstance, ic: IndexCode, rmap: ReductionMap, table: GoodSetTable) -> Claim1Result:
    """Check that no two good edge realizations of one ``xs`` share a broadcast value.

    Broadcast values are recomputed from ``ic`` rather than read from ``table``.
    """
    try:
        rmap.all_terminal()
    except KeyError:
        raise InstanceError("map has no 'all' terminal; injectivity is only guaranteed for reductions") from None
    ev = IndexEvaluator(hat, ic)
    pos = {s: k for k, s in enumerate(hat.source_ids)}
    values = [0] * len(hat.source_ids)
    for xs in sorted(table.good):
        for s, v in zip(table.source_ids, unpack(xs, table.source_widths)):
            values[pos[s]] = v
        seen: dict[int, int] = {}
        for xe in sorted(table.good[xs]):
            for e, v in zip(table.edge_ids, unpack(xe, table.edge_widths)):
                values[pos[e]] = v
            b = ev.broadcast(values)
            if b in seen:
                return Claim1Result(False, (xs, seen[b], xe))
            seen[b] = xe
    return Claim1Result(True)


def _coverage_index(table: GoodSetTable, members=None) -> dict[int, dict[int, int]]:
    """``sigma -> {xs: smallest good xe broadcasting sigma}``."""
    index: dict[int, dict[int, int]] = {}
    for xs in sorted(table.good):
        if members is not None and xs not in members:
            continue
        for xe in sorted(table.good[xs]):
            index.setdefault(table.good[xs][xe], {}).setdefault(xs, xe)
    return index


@dataclass(frozen=True)
class SigmaSelection:
    sigma: int
    covered: frozenset[int]
    coverage_fraction: Fraction
    witnesses: Mapping[int, int] = field(default_factory=dict, compare=False)


def select_sigma(table: GoodSetTable, hat: IndexInstance | None = None) -> SigmaSelection:
    """Broadcast value covering the most partial realizations; ties go to the smallest value.

    Values that no good pair broadcasts cover nothing, so the argmax over the
    whole broadcast space only needs the values that occur.
    """
    if hat is not None and hat.broadcast_rate * table.block_length != table.broadcast_bits:
        raise InstanceError("good-set table was computed for a different broadcast rate")
    index = _coverage_index(table)
    best, best_cover = 0, {}
    for sigma in sorted(index):
        if len(index[sigma]) > len(best_cover):
            best, best_cover = sigma, index[sigma]
    return SigmaSelection(
        best, frozenset(best_cover), Fraction(len(best_cover), table.partial_count), dict(best_cover)
    )


def _require_reduction(inst: NetworkInstance, hat: IndexInstance, rmap: ReductionMap) -> None:
    check_map(inst, hat, rmap)
    c = sum((e.capacity for e in inst.edges), Fraction(0))
    if hat.broadcast_rate != c or rmap.c_hat_b != c:
        raise InstanceError(
            f"broadcast rate {hat.broadcast_rate} must equal the total edge capacity {c}"
        )


def index_to_network_code(
    inst: NetworkInstance, hat: IndexInstance, rmap: ReductionMap, ic: IndexCode, sigma: int
) -> NetworkCode:
    """Network code whose encoders are the edge clients' decoders with the broadcast fixed to ``sigma``."""
    _require_reduction(inst, hat, rmap)
    n = ic.block_length
    IndexEvaluator(hat, ic)
    bits = ic.encoder.output_width
    if not (isinstance(sigma, int) and 0 <= sigma < (1 << bits)):
        raise ValueError(f"sigma={sigma!r} is outside the broadcast space [0, 2**{bits})")
    widths = network_widths(inst, n)

    def pinned(table: TruthTable, out_width: int) -> TruthTable:
        # the broadcast is the most significant input: its rows form one contiguous block
        rest = table.input_widths[1:]
        rows = 1 << sum(rest)
        return TruthTable.from_widths(rest, out_width, table.entries[sigma * rows:(sigma + 1) * rows])

    encoders = {e.id: pinned(ic.decoders[edge_name(e.id)], widths[e.id]) for e in inst.edges}
    decoders = {}
    for t in inst.terminals:
        d = ic.decoders[rmap.terminal_for("terminal", t.id)]
        decoders[t.id] = pinned(d, d.output_width)
    code = NetworkCode(n, encoders, decoders)
    bind_network_code(inst, code)
    return code


@dataclass(frozen=True)
class TransferReport:
    sigma: int
    coverage: Fraction
    index_success: Fraction
    network_success: Fraction
    claim1: Claim1Result
    code: NetworkCode = field(compare=False, repr=False)

    @property
    def ok(self) -> bool:
        return bool(self.claim1) and self.network_success >= self.coverage

    def to_json(self) -> dict[str, Any]:
        return {
            "ok": self.ok,
            "sigma": self.sigma,
            "coverage": fraction_str(self.coverage),
            "index_success": fraction_str(self.index_success),
            "network_success": fraction_str(self.network_success),
            "cover_size": 1,
            "overhead_bits": 0,
            "claim1": self.claim1.ok,
        }


def transfer_report(
    inst: NetworkInstance,
    hat: IndexInstance,
    rmap: ReductionMap,
    ic: IndexCode,
    *,
    sigma: int | None = None,
    jobs: int = 1,
) -> TransferReport:
    """Run good sets, injectivity, sigma choice and specialization; check the success bounds.

    ``sigma=None`` picks the best covering value.
    """
    _require_reduction(inst, hat, rmap)
    table = good_sets(hat, ic, rmap, jobs=jobs)
    claim1 = check_claim1(hat, ic, rmap, table)
    if sigma is None:
        sel = select_sigma(table, hat)
    else:
        covered = _coverage_index(table).get(sigma, {})
        sel = SigmaSelection(sigma, frozenset(covered), Fraction(len(covered), table.partial_count), dict(covered))
    nc = index_to_network_code(inst, hat, rmap, ic, sel.sigma)
    achieved = network_success_probability(inst, nc, jobs=jobs)
    index_success = table.success_probability()
    if achieved < sel.coverage_fraction:
        raise InvariantError(f"network success {achieved} below coverage {sel.coverage_fraction} at sigma={sel.sigma}")
    if claim1 and sigma is None and sel.coverage_fraction < index_success:
        raise InvariantError(f"best coverage {sel.coverage_fraction} below index success {index_success}")
    return TransferReport(sel.sigma, sel.coverage_fraction, index_success, achieved, claim1, nc)


@dataclass(frozen=True)
class CoverSet:
    """Broadcast values that together cover every heavy partial realization."""

    sigmas: tuple[int, ...]
    assignment: Mapping[int, tuple[int, int]]  # xs -> (sigma, witness xe)
    members: frozenset[int]  # the heavy partial realizations that must be covered
    threshold_exponent: Fraction
    randomized_bound: int  # size the random-batch argument would give; diagnostic only

    @property
    def overhead_bits(self) -> int:
        return (len(self.sigmas) - 1).bit_length() if self.sigmas else 0


def _at_least_power_of_two(count: int, exponent: Fraction) -> bool:
    """Exact test of ``count >= 2**exponent``."""
    if count <= 0:
        return False
    p, q = exponent.numerator, exponent.denominator
    if p <= 0:
        return True
    return count ** q >= 1 << p


def find_cover(table: GoodSetTable, hat: IndexInstance | None, delta: Rational) -> CoverSet:
    """Greedy cover of the heavy partial realizations by broadcast values.

    A partial realization is heavy when it has at least
    ``2**((1 - delta) * broadcast_bits - 1)`` good edge realizations. Each
    round adds the value covering the most still-uncovered heavy
    realizations (smallest value on ties).
    """
    delta = as_fraction(delta)
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if hat is not None and hat.broadcast_rate * table.block_length != table.broadcast_bits:
        raise InstanceError("good-set table was computed for a different broadcast rate")
    exponent = (1 - delta) * table.broadcast_bits - 1
    members = frozenset(xs for xs, a in table.good.items() if _at_least_power_of_two(len(a), exponent))
    index = _coverage_index(table, members)
    uncovered = set(members)
    sigmas: list[int] = []
    assignment: dict[int, tuple[int, int]] = {}
    while uncovered:
        best, gain = None, 0
        for sigma in sorted(index):
            g = sum(1 for xs in index[sigma] if xs in uncovered)
            if g > gain:
                best, gain = sigma, g
        assert best is not None  # every heavy member has at least one good pair
        sigmas.append(best)
        for xs, xe in index[best].items():
            if xs in uncovered:
                assignment[xs] = (best, xe)
                uncovered.discard(xs)
    return CoverSet(tuple(sigmas), assignment, members, exponent, _randomized_bound(len(members), delta, table))


def _randomized_bound(size: int, delta: Fraction, table: GoodSetTable) -> int:
    if size == 0:
        return 0
    rounds = max(1, math.ceil(math.log(size) / math.log(4 / 3)))
    return rounds * math.ceil(2 ** float(delta * table.broadcast_bits))


@dataclass(frozen=True)
class TwoPhaseReport:
    cover_size: int
    overhead_bits: int
    covered: int
    partial_count: int
    case_a_successes: int
    case_a_failures: tuple[int, ...]
    uncovered_fraction: Fraction
    error_bound: Fraction  # twice the index code's error
    first_sigma: int | None

    @property
    def success(self) -> Fraction:
        return Fraction(self.case_a_successes, self.partial_count)

    @property
    def coverage(self) -> Fraction:
        return Fraction(self.covered, self.partial_count)

    @property
    def ok(self) -> bool:
        return not self.case_a_failures and self.uncovered_fraction <= self.error_bound

    def to_json(self) -> dict[str, Any]:
        return {
            "ok": self.ok,
            "sigma": self.first_sigma,
            "coverage": fraction_str(self.coverage),
            "network_success": fraction_str(self.success),
            "cover_size": self.cover_size,
            "overhead_bits": self.overhead_bits,
            "uncovered": fraction_str(self.uncovered_fraction),
            "error_bound": fraction_str(self.error_bound),
            "case_a_failures": list(self.case_a_failures),
        }


def _require_collocated(inst: NetworkInstance) -> str:
    nodes = {s.node for s in inst.sources}
    if len(nodes) != 1:
        raise InstanceError(f"sources are not collocated: they sit on {sorted(nodes)}")
    (root,) = nodes
    adj: dict[str, list[str]] = {}
    for e in inst.edges:
        adj.setdefault(e.tail, []).append(e.head)
    seen, stack = {root}, [root]
    while stack:
        for v in adj.get(stack.pop(), []):
            if v not in seen:
                seen.add(v)
                stack.append(v)
    unreachable = [v for v in inst.nodes if v not in seen]
    if unreachable:
        raise InstanceError(f"nodes {unreachable} cannot be reached from the source node {root!r}")
    return root


def collocated_two_phase_check(
    inst: NetworkInstance,
    hat: IndexInstance,
    rmap: ReductionMap,
    ic: IndexCode,
    cover: CoverSet,
    table: GoodSetTable | None = None,
) -> TwoPhaseReport:
    """Check the announce-then-transmit scheme over collocated sources.

    Every covered partial realization is sent with the network code pinned to
    its assigned broadcast value and must decode at every terminal. The
    uncovered fraction must stay within twice the index code's error.
    """
    _require_collocated(inst)
    _require_reduction(inst, hat, rmap)
    if table is None:
        table = good_sets(hat, ic, rmap)
    to_network = {source_name(s): s for s in inst.source_ids}
    evaluators: dict[int, NetworkEvaluator] = {}
    successes = 0
    failures = []
    for xs in sorted(cover.assignment):
        sigma, _ = cover.assignment[xs]
        if sigma not in evaluators:
            evaluators[sigma] = NetworkEvaluator(inst, index_to_network_code(inst, hat, rmap, ic, sigma))
        ev = evaluators[sigma]
        x = {to_network[k]: v for k, v in table.source_values(xs).items()}
        if len(ev.satisfied(x)) == len(inst.terminals):
            successes += 1
        else:
            failures.append(xs)
    uncovered = 1 - Fraction(len(cover.assignment), table.partial_count)
    bound = 2 * (1 - table.success_probability())
    report = TwoPhaseReport(
        cover_size=len(cover.sigmas),
        overhead_bits=cover.overhead_bits,
        covered=len(cover.assignment),
        partial_count=table.partial_count,
        case_a_successes=successes,
        case_a_failures=tuple(failures),
        uncovered_fraction=uncovered,
        error_bound=bound,
        first_sigma=cover.sigmas[0] if cover.sigmas else None,
    )
    if uncovered > bound:
        raise InvariantError(f"uncovered fraction {uncovered} exceeds twice the index error ({bound})")
    return report
