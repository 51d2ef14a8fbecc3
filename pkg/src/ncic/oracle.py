"""Exhaustive code search on tiny instances.

Only encoders are enumerated. For a fixed encoder, giving each terminal the
most frequent wanted value among the realizations it cannot tell apart
maximizes that terminal's own success, so decoders are synthesized that way
(ties go to the smallest value). Candidates are visited in lexicographic
order of their row-major tables, so the witness returned is the first
satisfying one regardless of pruning.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

from .codes import (
    BudgetExceeded,
    IndexCode,
    NetworkCode,
    TruthTable,
    broadcast_width,
    index_widths,
    max_realizations,
    network_widths,
    pack,
    unpack,
)
from .model import (
    IndexInstance,
    NetworkInstance,
    Rational,
    as_fraction,
    in_set,
    require_valid_index,
    require_valid_network,
    topological_order,
)


@dataclass(frozen=True)
class SearchBudget:
    max_tables: int = 1 << 20
    max_realizations: int = field(default_factory=max_realizations)

    def __post_init__(self) -> None:
        if self.max_tables <= 0 or self.max_realizations <= 0:
            raise ValueError("search budgets must be positive")


def _majority(keys: list[int], wanted: list[int]) -> tuple[dict[int, int], int]:
    """Best guess per key and how many realizations it gets right."""
    groups: dict[int, Counter] = {}
    for k, w in zip(keys, wanted):
        groups.setdefault(k, Counter())[w] += 1
    choice = {}
    right = 0
    for k, c in groups.items():
        best = max(c.values())
        choice[k] = min(w for w, m in c.items() if m == best)
        right += best
    return choice, right


def _best_per_key(keys: list[tuple], wanted: list[int]) -> int:
    groups: dict[tuple, Counter] = {}
    for k, w in zip(keys, wanted):
        groups.setdefault(k, Counter())[w] += 1
    return sum(max(c.values()) for c in groups.values())


def search_network_code(
    inst: NetworkInstance,
    n: int,
    eps: Rational = 0,
    budget: SearchBudget | None = None,
    *,
    prune: bool = True,
) -> NetworkCode | None:
    """First network code (in lexicographic encoder order) with success at least ``1 - eps``.

    With pruning, a partial assignment is abandoned as soon as some terminal
    cannot reach ``1 - eps`` even with the best possible decoder: realizations
    that agree on everything the terminal can still learn (assigned edges on
    its frontier plus sources feeding unassigned edges) but differ in what it
    wants are counted as collisions.
    """
    budget = budget or SearchBudget()
    eps = as_fraction(eps)
    require_valid_network(inst)
    widths = network_widths(inst, n)
    order = topological_order(inst)
    src = inst.source_ids
    src_widths = [widths[s] for s in src]
    total = 1 << sum(src_widths)
    if total > budget.max_realizations:
        raise BudgetExceeded(f"{total} realizations exceed the cap of {budget.max_realizations}")

    ins = {e: in_set(inst, e) for e in order}
    row_counts = {e: 1 << sum(widths[i] for i in ins[e]) for e in order}
    space = 1
    for e in order:
        space *= (1 << widths[e]) ** row_counts[e]
    if space > budget.max_tables:
        raise BudgetExceeded(f"{space} candidate encoder assignments exceed the cap of {budget.max_tables}")

    need = (1 - eps) * total
    values: dict[str, list[int]] = {}
    for k, s in enumerate(src):
        values[s] = [unpack(r, src_widths)[k] for r in range(total)]
    edge_set = set(inst.edge_ids)
    terminals = [t.id for t in inst.terminals]
    t_ins = {t: in_set(inst, t) for t in terminals}
    wanted = {}
    for t in terminals:
        ws = inst.wanted_sources(t)
        wanted[t] = [pack([values[s][r] for s in ws], [widths[s] for s in ws]) for r in range(total)]

    def frontier(t: str, assigned: set[str]) -> tuple[str, ...]:
        out: set[str] = set()
        stack = list(t_ins[t])
        while stack:
            x = stack.pop()
            if x not in edge_set or x in assigned:
                out.add(x)
            else:
                stack.extend(ins[x])
        return tuple(sorted(out))

    frontiers = [
        {t: frontier(t, set(order[:k])) for t in terminals} for k in range(len(order) + 1)
    ]

    def hopeless(k: int) -> bool:
        for t in terminals:
            obs = frontiers[k][t]
            keys = list(zip(*(values[x] for x in obs))) if obs else [()] * total
            if _best_per_key(keys, wanted[t]) < need:
                return True
        return False

    tables: dict[str, tuple[int, ...]] = {}

    def leaf() -> NetworkCode | None:
        choices = {}
        for t in terminals:
            keys = [pack([values[i][r] for i in t_ins[t]], [widths[i] for i in t_ins[t]]) for r in range(total)]
            choice, _ = _majority(keys, wanted[t])
            choices[t] = (keys, choice)
        good = sum(
            1 for r in range(total) if all(choices[t][1][choices[t][0][r]] == wanted[t][r] for t in terminals)
        )
        if good < need:
            return None
        encoders = {e: TruthTable.from_widths([widths[i] for i in ins[e]], widths[e], tables[e]) for e in inst.edge_ids}
        decoders = {}
        for t in terminals:
            in_w = [widths[i] for i in t_ins[t]]
            out_w = sum(widths[s] for s in inst.wanted_sources(t))
            choice = choices[t][1]
            decoders[t] = TruthTable.from_widths(in_w, out_w, [choice.get(row, 0) for row in range(1 << sum(in_w))])
        return NetworkCode(n, encoders, decoders)

    def dfs(k: int) -> NetworkCode | None:
        if k == len(order):
            return leaf()
        e = order[k]
        in_w = [widths[i] for i in ins[e]]
        idx = [pack([values[i][r] for i in ins[e]], in_w) for r in range(total)]
        for table in itertools.product(range(1 << widths[e]), repeat=row_counts[e]):
            tables[e] = table
            values[e] = [table[i] for i in idx]
            if prune and hopeless(k + 1):
                continue
            found = dfs(k + 1)
            if found is not None:
                return found
        del values[e]
        del tables[e]
        return None

    if prune and hopeless(0):
        return None
    return dfs(0)


def search_index_code(
    hat: IndexInstance,
    n: int,
    eps: Rational = 0,
    budget: SearchBudget | None = None,
    *,
    prune: bool = True,
) -> IndexCode | None:
    """First broadcast encoder (row-major lexicographic) whose majority decoders reach ``1 - eps``.

    Pruning assigns encoder rows one realization at a time and stops when, for
    some terminal, the rows already assigned force more than ``eps`` of all
    realizations to fail.
    """
    budget = budget or SearchBudget()
    eps = as_fraction(eps)
    require_valid_index(hat)
    widths = index_widths(hat, n)
    bits = broadcast_width(hat, n)
    src = hat.source_ids
    src_widths = [widths[s] for s in src]
    total = 1 << sum(src_widths)
    if total > budget.max_realizations:
        raise BudgetExceeded(f"{total} realizations exceed the cap of {budget.max_realizations}")
    space = (1 << bits) ** total
    if space > budget.max_tables:
        raise BudgetExceeded(f"{space} candidate encoders exceed the cap of {budget.max_tables}")

    pos = {s: k for k, s in enumerate(src)}
    rows = [unpack(r, src_widths) for r in range(total)]
    terms = []
    for t in hat.terminals:
        has, wants = hat.ordered(t.has), hat.ordered(t.wants)
        has_w, want_w = [widths[s] for s in has], [widths[s] for s in wants]
        terms.append((
            t.id,
            sum(has_w),
            sum(want_w),
            [pack([v[pos[s]] for s in has], has_w) for v in rows],
            [pack([v[pos[s]] for s in wants], want_w) for v in rows],
        ))
    allowed = eps * total  # failures tolerated
    encoder = [0] * total
    groups = [dict() for _ in terms]
    forced = [0] * len(terms)

    def add(r: int, b: int, sign: int) -> None:
        for k, (_, has_bits, _, hk, wv) in enumerate(terms):
            key = (b << has_bits) | hk[r]
            c = groups[k].setdefault(key, Counter())
            before = sum(c.values()) - max(c.values(), default=0)
            c[wv[r]] += sign
            if c[wv[r]] == 0:
                del c[wv[r]]
            after = sum(c.values()) - max(c.values(), default=0)
            forced[k] += after - before

    def leaf() -> IndexCode | None:
        choices = []
        for _, has_bits, _, hk, wv in terms:
            keys = [(encoder[r] << has_bits) | hk[r] for r in range(total)]
            choice, _ = _majority(keys, wv)
            choices.append((keys, choice))
        good = sum(
            1 for r in range(total)
            if all(choice[keys[r]] == terms[k][4][r] for k, (keys, choice) in enumerate(choices))
        )
        if good < total - allowed:
            return None
        decoders = {}
        for (tid, has_bits, want_bits, _, _), (_, choice), t in zip(terms, choices, hat.terminals):
            in_w = [bits] + [widths[s] for s in hat.ordered(t.has)]
            decoders[tid] = TruthTable.from_widths(
                in_w, want_bits, [choice.get(row, 0) for row in range(1 << (bits + has_bits))]
            )
        return IndexCode(n, TruthTable.from_widths(src_widths, bits, encoder), decoders)

    def dfs(r: int) -> IndexCode | None:
        if r == total:
            return leaf()
        for b in range(1 << bits):
            encoder[r] = b
            if prune:
                add(r, b, +1)
                if max(forced, default=0) <= allowed:
                    found = dfs(r + 1)
                    if found is not None:
                        return found
                add(r, b, -1)
            else:
                found = dfs(r + 1)
                if found is not None:
                    return found
        encoder[r] = 0
        return None

    return dfs(0)


def min_broadcast_bits(hat: IndexInstance, n: int = 1, budget: SearchBudget | None = None) -> int:
    """Smallest broadcast width (in bits) admitting a zero-error index code.

    Broadcasting every source some terminal wants but lacks always works, so
    widths are searched only below that many bits.
    """
    require_valid_index(hat)
    widths = index_widths(hat, n)
    needed: set[str] = set()
    for t in hat.terminals:
        needed |= t.wants - t.has
    ceiling = sum(widths[s] for s in needed)
    for w in range(ceiling):
        if search_index_code(hat.with_broadcast_rate(Fraction(w, n)), n, 0, budget) is not None:
            return w
    return ceiling
