"""Bundled instances and codes: the butterfly network and a single wire."""

from __future__ import annotations

from .codes import NetworkCode, TruthTable
from .model import NetworkInstance

BUTTERFLY_EDGES = ("e1", "e2", "e3", "e4", "e5", "e6", "e7")

_IDENTITY = (0, 1)
_XOR = (0, 1, 1, 0)


def butterfly() -> NetworkInstance:
    """Two unit-rate sources, two terminals each wanting one source, seven unit edges.

    ``e5`` is the bottleneck ``u -> v`` fed by ``e2`` (from ``s1``) and ``e3``
    (from ``s2``); ``t1`` listens to ``e4`` and ``e7``, ``t2`` to ``e1`` and ``e6``.
    """
    return NetworkInstance.build(
        nodes=["s1", "s2", "u", "v", "t1", "t2"],
        edges=[
            ("e1", "s1", "t2", 1),
            ("e2", "s1", "u", 1),
            ("e3", "s2", "u", 1),
            ("e4", "s2", "t1", 1),
            ("e5", "u", "v", 1),
            ("e6", "v", "t2", 1),
            ("e7", "v", "t1", 1),
        ],
        sources=[("X1", "s1", 1), ("X2", "s2", 1)],
        terminals=[("t1", "t1", ["X1"]), ("t2", "t2", ["X2"])],
    )


def butterfly_xor_code() -> NetworkCode:
    """The classic code: relay each source, xor at the bottleneck, xor again at the terminals."""
    one = TruthTable.from_widths([1], 1, _IDENTITY)
    two = TruthTable.from_widths([1, 1], 1, _XOR)
    encoders = {e: one for e in BUTTERFLY_EDGES}
    encoders["e5"] = two
    return NetworkCode(1, encoders, {"t1": two, "t2": two})


def butterfly_global_xor(x1: int, x2: int) -> dict[str, int]:
    """Edge values of :func:`butterfly_xor_code`, written out by hand."""
    return {"e1": x1, "e2": x1, "e3": x2, "e4": x2, "e5": x1 ^ x2, "e6": x1 ^ x2, "e7": x1 ^ x2}


def butterfly_broadcast_chunks(x1: int, x2: int, xe: tuple[int, ...]) -> tuple[int, ...]:
    """Broadcast chunks of the index code derived from the xor code, one per edge."""
    return (
        xe[0] ^ x1,
        xe[1] ^ x1,
        xe[2] ^ x2,
        xe[3] ^ x2,
        xe[4] ^ x1 ^ x2,
        xe[5] ^ x1 ^ x2,
        xe[6] ^ x1 ^ x2,
    )


def collocated_butterfly() -> NetworkInstance:
    """The butterfly with both sources on one node ``s``."""
    return NetworkInstance.build(
        nodes=["s", "u", "v", "t1", "t2"],
        edges=[
            ("e1", "s", "t2", 1),
            ("e2", "s", "u", 1),
            ("e3", "s", "u", 1),
            ("e4", "s", "t1", 1),
            ("e5", "u", "v", 1),
            ("e6", "v", "t2", 1),
            ("e7", "v", "t1", 1),
        ],
        sources=[("X1", "s", 1), ("X2", "s", 1)],
        terminals=[("t1", "t1", ["X1"]), ("t2", "t2", ["X2"])],
    )


def collocated_butterfly_xor_code() -> NetworkCode:
    first = TruthTable.tabulate([1, 1], 1, lambda a, b: a)
    second = TruthTable.tabulate([1, 1], 1, lambda a, b: b)
    one = TruthTable.from_widths([1], 1, _IDENTITY)
    two = TruthTable.from_widths([1, 1], 1, _XOR)
    encoders = {"e1": first, "e2": first, "e3": second, "e4": second, "e5": two, "e6": one, "e7": one}
    return NetworkCode(1, encoders, {"t1": two, "t2": two})


def wire(capacity: int = 1, rate: int = 1) -> NetworkInstance:
    return NetworkInstance.build(
        nodes=["s", "t"],
        edges=[("e", "s", "t", capacity)],
        sources=[("x", "s", rate)],
        terminals=[("t", "t", ["x"])],
    )


def wire_identity_code() -> NetworkCode:
    one = TruthTable.from_widths([1], 1, _IDENTITY)
    return NetworkCode(1, {"e": one}, {"t": one})


def wire_constant_code() -> NetworkCode:
    return NetworkCode(
        1, {"e": TruthTable.constant([1], 1)}, {"t": TruthTable.from_widths([1], 1, _IDENTITY)}
    )
