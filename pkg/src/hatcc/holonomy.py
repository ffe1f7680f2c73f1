"""Transport kernels, cycle holonomy matrices, and mode quotients.

A transport kernel is the Boolean support relation a factor induces
between two interface state spaces; composing kernels around a
fundamental cycle gives the chord's holonomy matrix.  Its strongly
connected components are the modes.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .factor_graph import FactorGraph
from .nerve import Backbone, FactorNerve, FundamentalCycle, NerveEdge
from .nerve import build_factor_nerve, backbone as build_backbone
from .nerve import fundamental_cycle

DEFAULT_INTERFACE_CAP = 2 ** 16


class InterfaceCapExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class TransportKernel:
    source_scope: tuple[int, ...]
    target_scope: tuple[int, ...]
    matrix: np.ndarray  # bool, |Omega(source)| x |Omega(target)|


@dataclass(frozen=True)
class HolonomyMatrix:
    chord: NerveEdge
    interface: tuple[int, ...]
    matrix: np.ndarray  # bool, square


@dataclass(frozen=True)
class ModeQuotient:
    modes: tuple[tuple[int, ...], ...]  # SCCs, ordered by smallest member
    quotient: np.ndarray  # state -> mode index
    fixed_point_mask: np.ndarray  # bool, H(x, x) = 1


def interface_size(graph: FactorGraph, scope: Sequence[int]) -> int:
    size = 1
    for v in scope:
        size *= graph.cardinality(v)
    return size


def transport_kernel(graph: FactorGraph, factor_id: int,
                     source: Sequence[int], target: Sequence[int],
                     tol: float = 0.0) -> TransportKernel:
    """Boolean support relation of a factor between two sub-scopes.

    Entry (x, y) is 1 iff some full scope configuration extending both
    has nonzero potential; pairs that disagree on shared variables are
    never supported.  ``tol`` widens what counts as zero.
    """
    f = graph.factors[factor_id]
    for name, part in (("source", source), ("target", target)):
        if not set(part) <= set(f.scope):
            raise ValueError(f"{name} scope {tuple(part)} not within "
                             f"factor {factor_id} scope {f.scope}")
    source = tuple(source)
    target = tuple(target)
    table = graph.factor_nd(f)
    supported = ~graph.ops.is_zero(table, tol)
    kernel = np.zeros((interface_size(graph, source),
                       interface_size(graph, target)), dtype=bool)
    configs = np.argwhere(supported)
    if configs.size:
        axis_of = {v: i for i, v in enumerate(f.scope)}
        src_shape = tuple(graph.cardinality(v) for v in source)
        tgt_shape = tuple(graph.cardinality(v) for v in target)
        src_idx = np.ravel_multi_index(
            tuple(configs[:, axis_of[v]] for v in source), src_shape) \
            if source else np.zeros(len(configs), dtype=np.int64)
        tgt_idx = np.ravel_multi_index(
            tuple(configs[:, axis_of[v]] for v in target), tgt_shape) \
            if target else np.zeros(len(configs), dtype=np.int64)
        kernel[src_idx, tgt_idx] = True
    return TransportKernel(source, target, kernel)


def compose(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Boolean matrix product."""
    return (a.astype(np.uint8) @ b.astype(np.uint8)) > 0


def holonomy_matrix(graph: FactorGraph, cycle: FundamentalCycle,
                    tol: float = 0.0,
                    cap: int = DEFAULT_INTERFACE_CAP) -> HolonomyMatrix:
    """Compose transport kernels around a fundamental cycle.

    The composition starts and ends at the chord interface: the first
    kernel carries chord-interface states into the path through the
    chord's far endpoint, then each path factor carries them one
    interface further, and the last kernel returns through the chord's
    near endpoint.
    """
    factors = cycle.factor_sequence
    interfaces = cycle.interface_sequence
    for J in interfaces:
        size = interface_size(graph, J)
        if size > cap:
            raise InterfaceCapExceeded(
                f"interface {J} has {size} states, exceeding the cap "
                f"{cap}; refusing to build the holonomy matrix")
    chord_iface = interfaces[-1]
    H = transport_kernel(graph, factors[0], chord_iface, interfaces[0],
                         tol).matrix
    for i in range(1, len(factors)):
        K = transport_kernel(graph, factors[i], interfaces[i - 1],
                             interfaces[i], tol).matrix
        H = compose(H, K)
    return HolonomyMatrix(cycle.chord, chord_iface, H)


def _tarjan_scc(adj: list[list[int]]) -> list[list[int]]:
    """Iterative Tarjan; returns SCCs as sorted state lists."""
    n = len(adj)
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    sccs: list[list[int]] = []
    counter = 0
    for start in range(n):
        if index[start] != -1:
            continue
        work = [(start, 0)]
        while work:
            node, pi = work[-1]
            if pi == 0:
                index[node] = low[node] = counter
                counter += 1
                stack.append(node)
                on_stack[node] = True
            advanced = False
            while pi < len(adj[node]):
                nb = adj[node][pi]
                pi += 1
                if index[nb] == -1:
                    work[-1] = (node, pi)
                    work.append((nb, 0))
                    advanced = True
                    break
                if on_stack[nb]:
                    low[node] = min(low[node], index[nb])
            if advanced:
                continue
            work.pop()
            if low[node] == index[node]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == node:
                        break
                sccs.append(sorted(comp))
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
    return sccs


def mode_quotient(H: HolonomyMatrix) -> ModeQuotient:
    """SCC partition of the digraph induced by the holonomy matrix."""
    mat = H.matrix
    adj = [list(np.flatnonzero(mat[x])) for x in range(mat.shape[0])]
    sccs = _tarjan_scc(adj)
    sccs.sort(key=lambda c: c[0])
    quotient = np.zeros(mat.shape[0], dtype=np.int64)
    for mode, comp in enumerate(sccs):
        for x in comp:
            quotient[x] = mode
    return ModeQuotient(tuple(tuple(c) for c in sccs), quotient,
                        np.diagonal(mat).copy())


def is_trivial(H: HolonomyMatrix) -> bool:
    """True iff the holonomy matrix is exactly the identity."""
    n = H.matrix.shape[0]
    return bool(np.array_equal(H.matrix, np.eye(n, dtype=bool)))


# ---------------------------------------------------------------------------
# Per-graph reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChordReport:
    cycle: FundamentalCycle
    holonomy: HolonomyMatrix
    quotient: ModeQuotient

    @property
    def trivial(self) -> bool:
        return is_trivial(self.holonomy)


@dataclass(frozen=True)
class HolonomyReport:
    nerve: FactorNerve
    backbone: Backbone
    chords: tuple[ChordReport, ...]


def diagnose(graph: FactorGraph, tol: float = 0.0,
             cap: int = DEFAULT_INTERFACE_CAP,
             root_rule: str = "max_degree") -> HolonomyReport:
    """Nerve, backbone, and per-chord holonomy/mode analysis."""
    nerve = build_factor_nerve(graph)
    bb = build_backbone(nerve, root_rule)
    chords = []
    for chord in bb.chords:
        cycle = fundamental_cycle(graph, bb, chord)
        H = holonomy_matrix(graph, cycle, tol, cap)
        chords.append(ChordReport(cycle, H, mode_quotient(H)))
    return HolonomyReport(nerve, bb, tuple(chords))


def report_to_json_dict(report: HolonomyReport) -> dict:
    chords = []
    for cr in report.chords:
        rows = ["".join("1" if x else "0" for x in row)
                for row in cr.holonomy.matrix]
        chords.append({
            "chord": list(cr.holonomy.chord.key),
            "interface": list(cr.holonomy.interface),
            "matrix_rows": rows,
            "mode_sizes": [len(m) for m in cr.quotient.modes],
            "trivial": cr.trivial,
        })
    return {
        "n_factors": len(report.nerve.vertices),
        "n_nerve_edges": len(report.nerve.edges),
        "n_chords": len(report.backbone.chords),
        "chords": chords,
    }


def structural_checksum(report: HolonomyReport) -> str:
    """Stable hash of the discrete holonomy/mode structure."""
    payload = json.dumps(report_to_json_dict(report), sort_keys=True,
                         separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()
