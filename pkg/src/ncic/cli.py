"""Command-line entry point.

Exit codes: 0 success, 1 infeasible or verification failed, 2 usage error,
3 enumeration budget exceeded, 4 invalid input. Payloads are JSON on
standard output (or the ``-o`` file); diagnostics go to standard error.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from typing import Any, Sequence

from . import fixtures
from .codes import (
    BudgetExceeded,
    CodeError,
    IndexCode,
    NetworkCode,
    eval_global,
    index_success_probability,
    network_success_probability,
)
from .model import (
    IndexInstance,
    InstanceError,
    NetworkInstance,
    WidthError,
    as_fraction,
    fraction_str,
    load_json,
    require_valid_network,
    validate_index,
    validate_network,
)
from .oracle import SearchBudget, min_broadcast_bits, search_index_code, search_network_code
from .reduction import ReductionMap, check_map, reduce_instance
from .transform import (
    InvariantError,
    collocated_two_phase_check,
    find_cover,
    good_sets,
    index_to_network_code,
    network_to_index_code,
    select_sigma,
    transfer_report,
)

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_BUDGET, EXIT_INVALID = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


def _emit(payload: Any, out: str | None) -> None:
    text = json.dumps(payload, indent=2) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _network(args) -> NetworkInstance:
    if not args.instance:
        raise UsageError("--instance is required")
    return NetworkInstance.from_json(load_json(args.instance))


def _reduction(args) -> tuple[NetworkInstance, IndexInstance, ReductionMap]:
    """The network instance and its reduction, cross-checked against any supplied files."""
    inst = _network(args)
    hat, rmap = reduce_instance(inst)
    if getattr(args, "map", None):
        check_map(inst, hat, ReductionMap.from_json(load_json(args.map)))
    if getattr(args, "index_instance", None):
        check_map(inst, IndexInstance.from_json(load_json(args.index_instance)), rmap)
    return inst, hat, rmap


def _index_only(args) -> IndexInstance:
    if not args.index_instance:
        raise UsageError("--index-instance is required")
    return IndexInstance.from_json(load_json(args.index_instance))


def _code_json(args) -> Any:
    if not args.code:
        raise UsageError("--code is required")
    return load_json(args.code)


def _budget(args) -> SearchBudget:
    kwargs = {}
    if args.max_tables is not None:
        kwargs["max_tables"] = args.max_tables
    if args.max_realizations is not None:
        kwargs["max_realizations"] = args.max_realizations
    return SearchBudget(**kwargs)


def _sigma(raw: str | None) -> int | None:
    if raw is None or raw == "auto":
        return None
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"--sigma must be 'auto' or an integer, got {raw!r}") from None


def cmd_validate(args) -> int:
    if args.instance:
        report = validate_network(NetworkInstance.from_json(load_json(args.instance)))
        kind = "network"
    else:
        report = validate_index(_index_only(args))
        kind = "index"
    _emit({"kind": kind, **report.to_json()}, args.output)
    return EXIT_OK if report.ok else EXIT_FAILED


def cmd_reduce(args) -> int:
    inst = _network(args)
    hat, rmap = reduce_instance(inst)
    if args.map:
        _emit(rmap.to_json(), args.map)
    _emit(hat.to_json(), args.output)
    return EXIT_OK


def cmd_nc2ic(args) -> int:
    inst, hat, rmap = _reduction(args)
    nc = NetworkCode.from_json(_code_json(args), inst)
    _emit(network_to_index_code(inst, rmap, nc).to_json(), args.output)
    return EXIT_OK


def cmd_ic2nc(args) -> int:
    inst, hat, rmap = _reduction(args)
    ic = IndexCode.from_json(_code_json(args), hat)
    sigma = _sigma(args.sigma)
    if sigma is None:
        sigma = select_sigma(good_sets(hat, ic, rmap, jobs=args.jobs), hat).sigma
    _emit(index_to_network_code(inst, hat, rmap, ic, sigma).to_json(), args.output)
    return EXIT_OK


def cmd_verify(args) -> int:
    eps = as_fraction(args.eps)
    data = _code_json(args)
    if args.instance:
        inst = _network(args)
        success = network_success_probability(
            inst, NetworkCode.from_json(data, inst), jobs=args.jobs, cap=args.max_realizations
        )
        kind = "network"
    else:
        hat = _index_only(args)
        success = index_success_probability(
            hat, IndexCode.from_json(data, hat), jobs=args.jobs, cap=args.max_realizations
        )
        kind = "index"
    ok = success >= 1 - eps
    _emit({"ok": ok, "kind": kind, "success": fraction_str(success), "eps": fraction_str(eps)}, args.output)
    return EXIT_OK if ok else EXIT_FAILED


def cmd_cover(args) -> int:
    inst, hat, rmap = _reduction(args)
    ic = IndexCode.from_json(_code_json(args), hat)
    table = good_sets(hat, ic, rmap, jobs=args.jobs)
    cover = find_cover(table, hat, as_fraction(args.delta))
    if len({s.node for s in inst.sources}) == 1:
        report = collocated_two_phase_check(inst, hat, rmap, ic, cover, table)
        payload = report.to_json()
        ok = report.ok
    else:
        payload = {
            "ok": True,
            "sigma": cover.sigmas[0] if cover.sigmas else None,
            "coverage": fraction_str(Fraction(len(cover.assignment), table.partial_count)),
            "network_success": None,
            "cover_size": len(cover.sigmas),
            "overhead_bits": cover.overhead_bits,
        }
        ok = True
    payload["members"] = len(cover.members)
    payload["sigmas"] = list(cover.sigmas)
    payload["randomized_bound"] = cover.randomized_bound
    _emit(payload, args.output)
    return EXIT_OK if ok else EXIT_FAILED


def cmd_transfer_report(args) -> int:
    inst, hat, rmap = _reduction(args)
    ic = IndexCode.from_json(_code_json(args), hat)
    report = transfer_report(inst, hat, rmap, ic, sigma=_sigma(args.sigma), jobs=args.jobs)
    _emit(report.to_json(), args.output)
    return EXIT_OK if report.ok else EXIT_FAILED


def cmd_search_nc(args) -> int:
    inst = _network(args)
    code = search_network_code(inst, args.n, as_fraction(args.eps), _budget(args))
    payload = {"ok": code is not None, "feasible": code is not None, "witness": code and code.to_json()}
    _emit(payload, args.output)
    return EXIT_OK if code is not None else EXIT_FAILED


def cmd_search_ic(args) -> int:
    hat = _index_only(args)
    code = search_index_code(hat, args.n, as_fraction(args.eps), _budget(args))
    payload = {"ok": code is not None, "feasible": code is not None, "witness": code and code.to_json()}
    _emit(payload, args.output)
    return EXIT_OK if code is not None else EXIT_FAILED


def cmd_min_broadcast(args) -> int:
    hat = _index_only(args)
    _emit({"ok": True, "min_broadcast_bits": min_broadcast_bits(hat, args.n, _budget(args))}, args.output)
    return EXIT_OK


def demo_butterfly(jobs: int = 1) -> dict[str, Any]:
    """Run the butterfly walk-through end to end and collect every golden check."""
    checks: dict[str, bool] = {}
    inst = fixtures.butterfly()
    code = fixtures.butterfly_xor_code()
    require_valid_network(inst)
    network_success = network_success_probability(inst, code, jobs=jobs)
    checks["network_code_zero_error"] = network_success == 1
    checks["global_encodings"] = all(
        eval_global(inst, code, {"X1": a, "X2": b}) == fixtures.butterfly_global_xor(a, b)
        for a in (0, 1) for b in (0, 1)
    )

    hat, rmap = reduce_instance(inst)
    checks["reduction_shape"] = (
        len(hat.sources) == 9 and len(hat.terminals) == 10 and hat.broadcast_rate == 7
    )
    t1 = hat.terminal("t:t1")
    checks["reduction_t1"] = t1.has == {"edge:e4", "edge:e7"} and t1.wants == {"src:X1"}

    ic = network_to_index_code(inst, rmap, code)
    rows_ok = True
    for row in range(512):
        bits = [(row >> (8 - k)) & 1 for k in range(9)]
        chunks = fixtures.butterfly_broadcast_chunks(bits[0], bits[1], tuple(bits[2:]))
        word = 0
        for c in chunks:
            word = (word << 1) | c
        rows_ok &= ic.encoder.entries[row] == word
    checks["broadcast_encoder_golden"] = rows_ok
    index_success = index_success_probability(hat, ic, jobs=jobs)
    checks["index_code_zero_error"] = index_success == 1

    recovered = index_to_network_code(inst, hat, rmap, ic, 0)
    checks["recovered_code_matches"] = (
        dict(recovered.encoders) == dict(code.encoders) and dict(recovered.decoders) == dict(code.decoders)
    )
    recovered_success = network_success_probability(inst, recovered, jobs=jobs)
    checks["recovered_zero_error"] = recovered_success == 1
    checks["every_sigma_works"] = all(
        network_success_probability(inst, index_to_network_code(inst, hat, rmap, ic, s)) == 1 for s in range(128)
    )
    table = good_sets(hat, ic, rmap, jobs=jobs)
    checks["select_sigma_zero"] = select_sigma(table, hat).sigma == 0
    checks["single_sigma_cover"] = find_cover(table, hat, 0).sigmas == (0,)
    return {
        "ok": all(checks.values()),
        "network_success": fraction_str(network_success),
        "index_success": fraction_str(index_success),
        "recovered_network_success": fraction_str(recovered_success),
        "index_sources": len(hat.sources),
        "index_terminals": len(hat.terminals),
        "c_hat_b": int(hat.broadcast_rate),
        "checks": checks,
    }


def cmd_demo(args) -> int:
    if args.name != "butterfly":
        raise UsageError(f"unknown demo {args.name!r}; available: butterfly")
    payload = demo_butterfly(args.jobs)
    _emit(payload, args.output)
    for name, passed in payload["checks"].items():
        print(f"{'PASS' if passed else 'FAIL'} {name}", file=sys.stderr)
    return EXIT_OK if payload["ok"] else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--instance", help="network instance JSON")
    common.add_argument("--index-instance", dest="index_instance", help="index instance JSON")
    common.add_argument("--code", help="code JSON")
    common.add_argument("--map", help="reduction map JSON (written by reduce, checked elsewhere)")
    common.add_argument("--sigma", default="auto", help="broadcast value to pin, or 'auto'")
    common.add_argument("--eps", default="0", help="tolerated error probability, as p/q")
    common.add_argument("--delta", default="0", help="cover slack, as p/q")
    common.add_argument("--n", type=int, default=1, help="block length for searches")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for enumeration")
    common.add_argument("--max-tables", dest="max_tables", type=int, default=None)
    common.add_argument("--max-realizations", dest="max_realizations", type=int, default=None)
    common.add_argument("-o", "--output", help="write the payload here instead of stdout")

    parser = argparse.ArgumentParser(prog="ncic", description="Network coding / index coding reductions")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, help_text in (
        ("validate", cmd_validate, "check an instance file"),
        ("reduce", cmd_reduce, "build the index instance of a network instance"),
        ("nc2ic", cmd_nc2ic, "network code to index code"),
        ("ic2nc", cmd_ic2nc, "index code to network code"),
        ("verify", cmd_verify, "exact success probability against --eps"),
        ("cover", cmd_cover, "greedy broadcast cover and collocated two-phase check"),
        ("transfer-report", cmd_transfer_report, "good sets, sigma choice and achieved success"),
        ("search-nc", cmd_search_nc, "exhaustive network code search"),
        ("search-ic", cmd_search_ic, "exhaustive index code search"),
        ("min-broadcast", cmd_min_broadcast, "smallest zero-error broadcast width"),
    ):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.set_defaults(func=fn)
    demo = sub.add_parser("demo", parents=[common], help="bundled end-to-end walk-through")
    demo.add_argument("name", choices=["butterfly"])
    demo.set_defaults(func=cmd_demo)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except InvariantError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except (InstanceError, CodeError, WidthError, ValueError, OSError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
