import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings

from helpers import (
    brute_coverage,
    brute_index_success,
    brute_network_success,
    perturb_index_code,
    random_index_code,
    random_network,
    random_network_code,
    seeds,
)
from ncic import fixtures
from ncic.codes import IndexCode, TruthTable, index_success_probability, network_success_probability, pack
from ncic.model import InstanceError, NetworkInstance
from ncic.oracle import search_network_code
from ncic.reduction import reduce_instance
from ncic.transform import (
    GoodSetTable,
    InvariantError,
    check_claim1,
    collocated_two_phase_check,
    find_cover,
    good_sets,
    index_to_network_code,
    network_to_index_code,
    select_sigma,
    transfer_report,
)


def pipeline(inst, nc):
    hat, rmap = reduce_instance(inst)
    return hat, rmap, network_to_index_code(inst, rmap, nc)


@pytest.fixture(scope="module")
def butterfly_ic():
    inst = fixtures.butterfly()
    return (inst, *pipeline(inst, fixtures.butterfly_xor_code()))


@pytest.fixture(scope="module")
def butterfly_table(butterfly_ic):
    _, hat, rmap, ic = butterfly_ic
    return good_sets(hat, ic, rmap)


def wire_three_quarters():
    """Zero-error wire index code with one row of the all-client's decoder corrupted."""
    inst = fixtures.wire()
    hat, rmap, ic = pipeline(inst, fixtures.wire_identity_code())
    dec = ic.decoders["all"]
    broken = IndexCode(1, ic.encoder, dict(ic.decoders, all=dec.with_row(0, dec.entries[0] ^ 1)))
    return inst, hat, rmap, broken


class TestDirectionOne:
    def test_eq3_golden(self, butterfly_ic):
        _, hat, _, ic = butterfly_ic
        assert len(ic.encoder) == 512
        for row in range(512):
            bits = [(row >> (8 - k)) & 1 for k in range(9)]
            x1, x2, xe = bits[0], bits[1], tuple(bits[2:])
            expected = pack(fixtures.butterfly_broadcast_chunks(x1, x2, xe), [1] * 7)
            assert ic.encoder.entries[row] == expected, row

    def test_eq3_bottleneck_chunk(self, butterfly_ic):
        _, _, _, ic = butterfly_ic
        # chunk e5 is the third least significant bit
        for x1, x2, xe5 in itertools.product((0, 1), repeat=3):
            b = ic.encoder(x1, x2, 0, 0, 0, 0, xe5, 0, 0)
            assert (b >> 2) & 1 == xe5 ^ x1 ^ x2

    def test_eq3_success(self, butterfly_ic):
        _, hat, _, ic = butterfly_ic
        assert index_success_probability(hat, ic) == 1

    def test_wire_chunk(self):
        inst = fixtures.wire()
        hat, _, ic = pipeline(inst, fixtures.wire_identity_code())
        for x, xe in itertools.product((0, 1), repeat=2):
            b = ic.encoder(x, xe)
            assert b == x ^ xe
            assert ic.decoders["t:t"](b, xe) == x
            assert ic.decoders["edge:e"](b, x) == xe
            assert ic.decoders["all"](b, x) == xe

    def test_map_mismatch(self):
        hat, rmap = reduce_instance(fixtures.wire())
        with pytest.raises(InstanceError):
            network_to_index_code(fixtures.butterfly(), rmap, fixtures.butterfly_xor_code())

    @settings(max_examples=60, deadline=None)
    @given(seeds)
    def test_success_is_preserved(self, seed):
        rng = random.Random(seed)
        inst = random_network(rng)
        nc = random_network_code(rng, inst)
        hat, _, ic = pipeline(inst, nc)
        assert index_success_probability(hat, ic) == network_success_probability(inst, nc)
        assert brute_index_success(hat, ic) == brute_network_success(inst, nc)


class TestGoodSets:
    def test_butterfly_sizes(self, butterfly_table):
        assert butterfly_table.partial_count == 4
        assert [len(butterfly_table.good[xs]) for xs in range(4)] == [128] * 4
        assert butterfly_table.success_probability() == 1

    def test_total_matches_success(self):
        inst, hat, rmap, ic = wire_three_quarters()
        table = good_sets(hat, ic, rmap)
        assert table.good_pairs() == index_success_probability(hat, ic) * table.total == 3

    def test_constant_broadcast(self):
        inst = fixtures.wire()
        hat, rmap = reduce_instance(inst)
        ic = random_index_code(random.Random(1), hat)
        ic = IndexCode(1, TruthTable.constant(ic.encoder.input_widths, 1), ic.decoders)
        table = good_sets(hat, ic, rmap)
        assert all(len(a) <= 1 for a in table.good.values())

    def test_zero_rate_sources(self):
        inst = NetworkInstance.build(["s", "t"], [("e", "s", "t", 0)], [("x", "s", 0)], [("t", "t", ["x"])])
        hat, rmap = reduce_instance(inst)
        zero = TruthTable.constant([0, 0], 0)
        ic = IndexCode(1, zero, {t.id: TruthTable.constant([0, 0], 0) for t in hat.terminals})
        table = good_sets(hat, ic, rmap)
        assert table.total == 1 and table.good_pairs() == 1

    def test_jobs(self, butterfly_ic, butterfly_table):
        _, hat, rmap, ic = butterfly_ic
        assert good_sets(hat, ic, rmap, jobs=3) == butterfly_table


class TestClaim1:
    def test_butterfly(self, butterfly_ic, butterfly_table):
        _, hat, rmap, ic = butterfly_ic
        result = check_claim1(hat, ic, rmap, butterfly_table)
        assert result and result.counterexample is None
        for a in butterfly_table.good.values():
            assert len(set(a.values())) == 128

    def test_synthetic_violation(self):
        hat, rmap = reduce_instance(fixtures.wire())
        ic = IndexCode(
            1, TruthTable.constant([1, 1], 1), {t.id: TruthTable.constant([1, 1], 1) for t in hat.terminals}
        )
        fake = GoodSetTable(1, ("src:x",), ("edge:e",), (1,), (1,), 1, {0: {0: 0, 1: 0}, 1: {}})
        result = check_claim1(hat, ic, rmap, fake)
        assert not result
        assert result.counterexample == (0, 0, 1)

    def test_zero_edge_network(self):
        inst = NetworkInstance.build(["s"], [], [("x", "s", 1)], [])
        hat, rmap = reduce_instance(inst)
        ic = IndexCode(1, TruthTable.constant([1], 0), {"all": TruthTable.constant([0, 1], 0)})
        assert check_claim1(hat, ic, rmap, good_sets(hat, ic, rmap))

    @settings(max_examples=40, deadline=None)
    @given(seeds)
    def test_random_reductions(self, seed):
        rng = random.Random(seed)
        inst = random_network(rng, max_edges=3)
        hat, rmap = reduce_instance(inst)
        ic = random_index_code(rng, hat)
        assert check_claim1(hat, ic, rmap, good_sets(hat, ic, rmap))


class TestSelectSigma:
    def test_butterfly(self, butterfly_ic, butterfly_table):
        _, hat, _, _ = butterfly_ic
        sel = select_sigma(butterfly_table, hat)
        assert sel.sigma == 0 and sel.coverage_fraction == 1

    def test_three_quarter_toy_is_exact_argmax(self):
        _, hat, rmap, ic = wire_three_quarters()
        table = good_sets(hat, ic, rmap)
        sel = select_sigma(table, hat)
        brute = [brute_coverage(hat, ic, ["src:x"], s) for s in range(2)]
        assert sel.coverage_fraction == max(brute)
        assert sel.sigma == brute.index(max(brute))
        assert sel.coverage_fraction >= Fraction(3, 4)
        assert (sel.sigma, sel.coverage_fraction) == (1, 1)

    def test_single_value_space(self):
        inst = fixtures.wire(capacity=0)
        hat, rmap = reduce_instance(inst)
        ic = random_index_code(random.Random(3), hat)
        table = good_sets(hat, ic, rmap)
        sel = select_sigma(table, hat)
        assert sel.sigma == 0
        assert sel.coverage_fraction == index_success_probability(hat, ic)

    def test_rate_mismatch(self, butterfly_ic, butterfly_table):
        _, hat, _, _ = butterfly_ic
        with pytest.raises(InstanceError):
            select_sigma(butterfly_table, hat.with_broadcast_rate(6))

    @settings(max_examples=40, deadline=None)
    @given(seeds)
    def test_averaging_bound(self, seed):
        rng = random.Random(seed)
        inst = random_network(rng, max_edges=3)
        hat, rmap, ic = pipeline(inst, random_network_code(rng, inst))
        ic = perturb_index_code(rng, ic, rng.randint(0, 3))
        table = good_sets(hat, ic, rmap)
        sel = select_sigma(table, hat)
        assert sel.coverage_fraction >= index_success_probability(hat, ic)
        assert sel.coverage_fraction == Fraction(len(sel.covered), table.partial_count)
        src = rmap.source_origin_ids()
        assert sel.coverage_fraction == brute_coverage(hat, ic, src, sel.sigma)


class TestDirectionTwo:
    def test_eq5_round_trip(self, butterfly_ic):
        inst, hat, rmap, ic = butterfly_ic
        nc = index_to_network_code(inst, hat, rmap, ic, 0)
        assert nc == fixtures.butterfly_xor_code()
        assert network_success_probability(inst, nc) == 1

    def test_every_sigma(self, butterfly_ic):
        inst, hat, rmap, ic = butterfly_ic
        for sigma in range(128):
            assert network_success_probability(inst, index_to_network_code(inst, hat, rmap, ic, sigma)) == 1

    def test_sigma_out_of_range(self, butterfly_ic):
        inst, hat, rmap, ic = butterfly_ic
        with pytest.raises(ValueError):
            index_to_network_code(inst, hat, rmap, ic, 128)

    @settings(max_examples=40, deadline=None)
    @given(seeds)
    def test_round_trip_random(self, seed):
        rng = random.Random(seed)
        inst = random_network(rng)
        nc = random_network_code(rng, inst)
        hat, rmap, ic = pipeline(inst, nc)
        assert index_to_network_code(inst, hat, rmap, ic, 0) == nc

    def test_round_trip_zero_error_codes(self):
        rng = random.Random(20)
        found = 0
        while found < 20:
            inst = random_network(rng)
            nc = search_network_code(inst, 1)
            if nc is None:
                continue
            found += 1
            hat, rmap, ic = pipeline(inst, nc)
            assert index_to_network_code(inst, hat, rmap, ic, 0) == nc


class TestTransferReport:
    def test_butterfly(self, butterfly_ic):
        report = transfer_report(*butterfly_ic)
        assert report.ok and report.network_success == 1 and report.sigma == 0
        data = report.to_json()
        assert data["network_success"] == "1/1" and data["coverage"] == "1/1"

    def test_fixed_sigma(self, butterfly_ic):
        assert transfer_report(*butterfly_ic, sigma=77).network_success == 1

    @settings(max_examples=30, deadline=None)
    @given(seeds)
    def test_corrupted_codes(self, seed):
        rng = random.Random(seed)
        inst = random_network(rng, max_edges=3)
        hat, rmap, ic = pipeline(inst, random_network_code(rng, inst))
        ic = perturb_index_code(rng, ic, rng.randint(1, 4))
        report = transfer_report(inst, hat, rmap, ic)
        assert report.network_success >= report.coverage >= report.index_success
        assert report.network_success == brute_network_success(inst, report.code)

    def test_broadcast_mismatch(self, butterfly_ic):
        inst, hat, rmap, ic = butterfly_ic
        with pytest.raises(InstanceError):
            transfer_report(inst, hat.with_broadcast_rate(8), rmap, ic)


def disjoint_toy():
    inst = NetworkInstance.build(
        ["a", "b", "t1", "t2"],
        [("e1", "a", "t1", 1), ("e2", "b", "t2", 1)],
        [("X1", "a", 1), ("X2", "b", 1)],
        [("t1", "t1", ["X1"]), ("t2", "t2", ["X2"])],
    )
    hat, rmap = reduce_instance(inst)
    # the broadcast just names the source pair; only the all-zero edge pattern is good
    encoder = TruthTable.tabulate([1, 1, 1, 1], 2, lambda x1, x2, a, b: (x1 << 1) | x2)
    decoders = {
        "edge:e1": TruthTable.constant([2, 1], 1),
        "edge:e2": TruthTable.constant([2, 1], 1),
        "t:t1": TruthTable.tabulate([2, 1], 1, lambda b, e: b >> 1),
        "t:t2": TruthTable.tabulate([2, 1], 1, lambda b, e: b & 1),
        "all": TruthTable.constant([2, 1, 1], 2),
    }
    return inst, hat, rmap, IndexCode(1, encoder, decoders)


class TestFindCover:
    def test_butterfly(self, butterfly_ic, butterfly_table):
        _, hat, _, _ = butterfly_ic
        cover = find_cover(butterfly_table, hat, 0)
        assert cover.sigmas == (0,)
        assert set(cover.assignment) == {0, 1, 2, 3}
        assert cover.overhead_bits == 0

    def test_wire(self):
        inst = fixtures.wire()
        hat, rmap, ic = pipeline(inst, fixtures.wire_identity_code())
        assert len(find_cover(good_sets(hat, ic, rmap), hat, 0).sigmas) == 1

    def test_disjoint_images(self):
        _, hat, rmap, ic = disjoint_toy()
        table = good_sets(hat, ic, rmap)
        assert [len(table.good[xs]) for xs in range(4)] == [1] * 4
        cover = find_cover(table, hat, Fraction(1, 2))
        assert len(cover.sigmas) == len(cover.members) == 4
        assert cover.sigmas == (0, 1, 2, 3)
        assert cover.overhead_bits == 2

    def test_empty_heavy_set(self):
        _, hat, rmap, ic = disjoint_toy()
        cover = find_cover(good_sets(hat, ic, rmap), hat, 0)
        assert cover.members == frozenset() and cover.sigmas == () and cover.overhead_bits == 0

    def test_negative_delta(self, butterfly_table):
        with pytest.raises(ValueError):
            find_cover(butterfly_table, None, -1)

    @settings(max_examples=40, deadline=None)
    @given(seeds)
    def test_totality_and_witnesses(self, seed):
        rng = random.Random(seed)
        inst = random_network(rng, max_edges=3)
        hat, rmap, ic = pipeline(inst, random_network_code(rng, inst))
        ic = perturb_index_code(rng, ic, rng.randint(0, 3))
        table = good_sets(hat, ic, rmap)
        cover = find_cover(table, hat, Fraction(rng.randint(0, 4), 4))
        assert set(cover.assignment) == set(cover.members)
        assert len(set(cover.sigmas)) == len(cover.sigmas)
        for xs, (sigma, xe) in cover.assignment.items():
            assert sigma in cover.sigmas
            assert xe in table.good[xs]
            assert table.good[xs][xe] == sigma


class TestTwoPhase:
    def test_collocated_butterfly(self):
        inst = fixtures.collocated_butterfly()
        hat, rmap, ic = pipeline(inst, fixtures.collocated_butterfly_xor_code())
        table = good_sets(hat, ic, rmap)
        cover = find_cover(table, hat, 0)
        report = collocated_two_phase_check(inst, hat, rmap, ic, cover, table)
        assert report.ok
        assert report.case_a_successes == 4 and report.case_a_failures == ()
        assert report.overhead_bits == 0 and report.cover_size == 1
        assert report.uncovered_fraction == 0
        assert report.to_json()["network_success"] == "1/1"

    def test_quarter_error(self):
        inst, hat, rmap, ic = wire_three_quarters()
        table = good_sets(hat, ic, rmap)
        assert 1 - table.success_probability() == Fraction(1, 4)
        report = collocated_two_phase_check(inst, hat, rmap, ic, find_cover(table, hat, 0), table)
        assert report.uncovered_fraction <= Fraction(1, 2)
        assert report.ok

    def test_not_collocated(self, butterfly_ic, butterfly_table):
        inst, hat, rmap, ic = butterfly_ic
        with pytest.raises(InstanceError):
            collocated_two_phase_check(inst, hat, rmap, ic, find_cover(butterfly_table, hat, 0), butterfly_table)

    def test_unreachable_node(self):
        inst = NetworkInstance.build(
            ["s", "t", "w"], [("e", "s", "t", 1)], [("x", "s", 1)], [("t", "t", ["x"]), ("w", "w", [])]
        )
        hat, rmap = reduce_instance(inst)
        ic = random_index_code(random.Random(0), hat)
        table = good_sets(hat, ic, rmap)
        with pytest.raises(InstanceError):
            collocated_two_phase_check(inst, hat, rmap, ic, find_cover(table, hat, 0), table)

    def test_uncovered_over_bound_raises(self):
        inst, hat, rmap, ic = wire_three_quarters()
        table = good_sets(hat, ic, rmap)
        cover = find_cover(table, hat, 0)
        thin = type(cover)(cover.sigmas, {}, cover.members, cover.threshold_exponent, cover.randomized_bound)
        with pytest.raises(InvariantError):
            collocated_two_phase_check(inst, hat, rmap, ic, thin, table)
