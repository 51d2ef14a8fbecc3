"""Random instance generators and brute-force oracles shared by the tests.

The oracles recompute evaluations straight from the definitions (recursive
edge values, direct table lookups) without going through the library's
evaluators, so they can be used as independent ground truth.
"""

from __future__ import annotations

import itertools
import random
from fractions import Fraction

from hypothesis import strategies as st

from ncic.codes import IndexCode, NetworkCode, TruthTable, index_shapes, network_shapes
from ncic.model import IndexInstance, NetworkInstance


def random_network(rng: random.Random, max_edges: int = 4, max_sources: int = 2) -> NetworkInstance:
    """A small valid DAG with 1-bit sources and unit edges."""
    k = rng.randint(1, max_sources)
    m = rng.randint(0, 2)
    r = rng.randint(1, 2)
    sources = [f"S{i}" for i in range(k)]
    internal = [f"V{i}" for i in range(m)]
    sinks = [f"T{i}" for i in range(r)]
    nodes = sources + internal + sinks
    rank = {v: i for i, v in enumerate(nodes)}
    pairs = [(a, b) for a in sources + internal for b in internal + sinks if rank[a] < rank[b]]
    n_edges = rng.randint(1, max_edges)
    edges = [(f"e{i}", *rng.choice(pairs), 1) for i in range(n_edges)]
    src = [(f"x{i}", node, 1) for i, node in enumerate(sources)]
    terminals = []
    for i, node in enumerate(sinks):
        wants = [s for s, _, _ in src if rng.random() < 0.6]
        terminals.append((f"t{i}", node, wants))
    return NetworkInstance.build(nodes, edges, src, terminals)


def random_table(rng: random.Random, in_widths, out_width) -> TruthTable:
    rows = 1 << sum(in_widths)
    return TruthTable.from_widths(in_widths, out_width, [rng.randrange(1 << out_width) for _ in range(rows)])


def random_network_code(rng: random.Random, inst: NetworkInstance, n: int = 1) -> NetworkCode:
    shapes = network_shapes(inst, n)
    encoders = {e: random_table(rng, *shapes[e]) for e in inst.edge_ids}
    decoders = {t.id: random_table(rng, *shapes[t.id]) for t in inst.terminals}
    return NetworkCode(n, encoders, decoders)


def random_index_code(rng: random.Random, hat: IndexInstance, n: int = 1) -> IndexCode:
    shapes = index_shapes(hat, n)
    return IndexCode(
        n,
        random_table(rng, *shapes[None]),
        {t.id: random_table(rng, *shapes[t.id]) for t in hat.terminals},
    )


def perturb_index_code(rng: random.Random, ic: IndexCode, flips: int) -> IndexCode:
    """Overwrite a few random decoder or encoder rows with random values."""
    encoder = ic.encoder
    decoders = dict(ic.decoders)
    names = [None] + list(decoders)
    for _ in range(flips):
        name = rng.choice(names)
        table = encoder if name is None else decoders[name]
        if table.output_width == 0:
            continue
        row = rng.randrange(len(table))
        new = table.with_row(row, rng.randrange(1 << table.output_width))
        if name is None:
            encoder = new
        else:
            decoders[name] = new
    return IndexCode(ic.block_length, encoder, decoders)


seeds = st.integers(min_value=0, max_value=2**32 - 1)


# ---------------------------------------------------------------- oracles


def _lookup(table: TruthTable, args) -> int:
    index = 0
    for space, v in zip(table.input_spaces, args):
        index = index * space.cardinality + v
    return table.entries[index]


def brute_edge_values(inst: NetworkInstance, code: NetworkCode, x: dict[str, int]) -> dict[str, int]:
    """Edge values by recursion on the definition of the global encoding."""
    memo: dict[str, int] = {}
    here = {}
    for s in inst.sources:
        here.setdefault(s.node, []).append(s.id)

    def value(e: str) -> int:
        if e not in memo:
            tail = inst.edge(e).tail
            if tail in here:
                args = [x[s] for s in here[tail]]
            else:
                args = [value(f.id) for f in inst.edges if f.head == tail]
            memo[e] = _lookup(code.encoders[e], args)
        return memo[e]

    return {e: value(e) for e in inst.edge_ids}


def brute_network_success(inst: NetworkInstance, code: NetworkCode) -> Fraction:
    n = code.block_length
    widths = {s.id: int(s.rate * n) for s in inst.sources}
    total = good = 0
    for combo in itertools.product(*(range(1 << widths[s]) for s in inst.source_ids)):
        x = dict(zip(inst.source_ids, combo))
        vals = brute_edge_values(inst, code, x)
        total += 1
        ok = True
        for t in inst.terminals:
            args = [vals[f.id] for f in inst.edges if f.head == t.node]
            expect = 0
            for s in inst.source_ids:
                if s in t.wants:
                    expect = (expect << widths[s]) | x[s]
            ok &= _lookup(code.decoders[t.id], args) == expect
        good += ok
    return Fraction(good, total)


def brute_index_outcomes(hat: IndexInstance, ic: IndexCode):
    """Yield ``(realization dict, set of satisfied terminals)`` for every realization."""
    n = ic.block_length
    widths = {s.id: int(s.rate * n) for s in hat.sources}
    ids = hat.source_ids
    for combo in itertools.product(*(range(1 << widths[s]) for s in ids)):
        x = dict(zip(ids, combo))
        b = _lookup(ic.encoder, combo)
        sat = set()
        for t in hat.terminals:
            has = [x[s] for s in ids if s in t.has]
            expect = 0
            for s in ids:
                if s in t.wants:
                    expect = (expect << widths[s]) | x[s]
            if _lookup(ic.decoders[t.id], [b] + has) == expect:
                sat.add(t.id)
        yield x, b, sat


def brute_index_success(hat: IndexInstance, ic: IndexCode) -> Fraction:
    total = good = 0
    for _, _, sat in brute_index_outcomes(hat, ic):
        total += 1
        good += len(sat) == len(hat.terminals)
    return Fraction(good, total)


def brute_coverage(hat: IndexInstance, ic: IndexCode, source_ids, sigma: int) -> Fraction:
    """Fraction of partial realizations having a good completion that broadcasts ``sigma``."""
    partial, covered = set(), set()
    for x, b, sat in brute_index_outcomes(hat, ic):
        key = tuple(x[s] for s in source_ids)
        partial.add(key)
        if b == sigma and len(sat) == len(hat.terminals):
            covered.add(key)
    return Fraction(len(covered), len(partial))
