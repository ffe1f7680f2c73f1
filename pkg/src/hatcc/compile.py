"""Holonomy-aware compilation to an exactly solvable tree model.

Pipeline: detect chords of the factor nerve, compile each chord's
holonomy into a mode variable plus a selector factor, check the
augmented nerve is a tree, run two-pass separator message passing over
it, and marginalize the mode variables back out.  An all-zero selector
is an UNSAT certificate, returned as a result rather than raised.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from . import bp_engine
from .factor_graph import (FactorDecl, FactorGraph, PotentialSlice, Semiring,
                           VariableDecl, restrict, validate_strict)
from .holonomy import (ChordReport, HolonomyMatrix, HolonomyReport,
                       ModeQuotient, diagnose, report_to_json_dict)
from .nerve import NerveEdge


# ---------------------------------------------------------------------------
# Selectors and the augmented model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SelectorFactor:
    chord: tuple[int, int]
    interface: tuple[int, ...]
    n_modes: int
    table: np.ndarray  # shape = interface shape + (n_modes,), semiring 0/1


@dataclass(frozen=True)
class UnsatCertificate:
    chord: tuple[int, int]
    detail: str


@dataclass(frozen=True)
class ClusterEdge:
    a: int  # cluster index
    b: int
    separator: tuple[int, ...]  # sorted variable ids


@dataclass(frozen=True)
class CompiledModel:
    graph: FactorGraph  # augmented
    original_var_count: int
    original_factor_count: int
    mode_vars: dict  # chord key -> mode variable id
    selector_ids: dict  # chord key -> selector factor id
    cluster_edges: tuple[ClusterEdge, ...]
    roots: tuple[int, ...]  # cluster indices, one per component
    running_intersection_ok: bool
    ri_violations: tuple[int, ...]  # variable ids


def build_selector(graph: FactorGraph, chord: NerveEdge, H: HolonomyMatrix,
                   Q: ModeQuotient) -> Union[SelectorFactor, UnsatCertificate]:
    """Indicator tying an interface state to its mode and feasibility.

    sigma(x, m) = 1 iff the state's mode is m and the holonomy fixes x
    (H(x, x) = 1).  A selector with no support certifies UNSAT.
    """
    sr = graph.ops
    iface_shape = tuple(graph.cardinality(v) for v in H.interface)
    n_states = int(np.prod(iface_shape, dtype=np.int64))
    n_modes = len(Q.modes)
    flat = np.full((n_states, n_modes), sr.zero)
    for x in range(n_states):
        if Q.fixed_point_mask[x]:
            flat[x, Q.quotient[x]] = sr.one
    if not np.any(~sr.is_zero(flat)):
        return UnsatCertificate(chord.key,
                                "selector has empty support: no interface "
                                "state is fixed by the chord holonomy")
    return SelectorFactor(chord.key, H.interface, n_modes,
                          flat.reshape(iface_shape + (n_modes,)))


def _check_running_intersection(scopes: Sequence[Sequence[int]],
                                edges: Sequence[ClusterEdge]) -> list[int]:
    """Variables whose clusters do not form a connected subtree."""
    holders: dict[int, list[int]] = {}
    for ci, scope in enumerate(scopes):
        for v in scope:
            holders.setdefault(v, []).append(ci)
    adj: dict[int, list[int]] = {}
    for e in edges:
        adj.setdefault(e.a, []).append(e.b)
        adj.setdefault(e.b, []).append(e.a)
    bad = []
    for v, clusters in holders.items():
        if len(clusters) == 1:
            continue
        members = set(clusters)
        seen = {clusters[0]}
        frontier = [clusters[0]]
        while frontier:
            c = frontier.pop()
            for nb in adj.get(c, []):
                if nb in members and nb not in seen:
                    seen.add(nb)
                    frontier.append(nb)
        if seen != members:
            bad.append(v)
    return sorted(bad)


def augment(graph: FactorGraph,
            report: HolonomyReport) -> Union[CompiledModel, UnsatCertificate]:
    """Append one mode variable and one selector factor per chord.

    The augmented nerve keeps the backbone tree edges and attaches each
    selector as a leaf on the chord's smaller endpoint, so the edge
    count stays vertices minus components.  Running intersection is
    checked and flagged, not assumed.
    """
    variables = list(graph.variables)
    factors = list(graph.factors)
    mode_vars: dict = {}
    selector_ids: dict = {}
    for cr in report.chords:
        sel = build_selector(graph, cr.holonomy.chord, cr.holonomy,
                             cr.quotient)
        if isinstance(sel, UnsatCertificate):
            return sel
        mode_id = len(variables)
        variables.append(VariableDecl(mode_id, sel.n_modes,
                                      f"mode_{sel.chord[0]}_{sel.chord[1]}"))
        fac_id = len(factors)
        factors.append(FactorDecl(fac_id, sel.interface + (mode_id,),
                                  sel.table.ravel()))
        mode_vars[sel.chord] = mode_id
        selector_ids[sel.chord] = fac_id
    augmented = FactorGraph(graph.semiring, tuple(variables), tuple(factors))

    edges = [ClusterEdge(e.f1, e.f2, e.interface)
             for e in report.backbone.tree_edges]
    for cr in report.chords:
        chord = cr.holonomy.chord
        attach = min(chord.f1, chord.f2)
        edges.append(ClusterEdge(attach, selector_ids[chord.key],
                                 cr.holonomy.interface))
    # tree identity: edges = vertices - components on the augmented nerve
    assert len(edges) == len(factors) - len(report.backbone.roots), \
        "augmented nerve violates the tree edge-count identity"

    scopes = [f.scope for f in factors]
    bad = _check_running_intersection(scopes, edges)
    return CompiledModel(augmented, len(graph.variables), len(graph.factors),
                         mode_vars, selector_ids, tuple(edges),
                         tuple(report.backbone.roots), not bad, tuple(bad))


# ---------------------------------------------------------------------------
# Cluster-tree message passing
# ---------------------------------------------------------------------------

def _mul_into(sr: Semiring, table: np.ndarray, scope: tuple[int, ...],
              msg: PotentialSlice) -> np.ndarray:
    """Multiply a smaller-scope slice into a cluster table, broadcasting."""
    positions = [scope.index(v) for v in msg.scope]
    perm = sorted(range(len(positions)), key=lambda i: positions[i])
    aligned = np.transpose(msg.table, perm)
    shape = [1] * len(scope)
    for i in perm:
        shape[positions[i]] = msg.table.shape[i]
    return sr.mul(table, aligned.reshape(shape))


@dataclass(frozen=True)
class ClusterTreeResult:
    beliefs: tuple[PotentialSlice, ...]  # unnormalized, one per cluster
    Z: float
    unsat: bool


def cluster_tree_propagate(compiled: CompiledModel) -> ClusterTreeResult:
    """Two-pass separator message passing over the augmented nerve tree.

    The message from cluster a to neighbor b is the restriction to their
    separator of a's potential times all other incoming messages.  Z is
    read off the root beliefs, one factor per component.
    """
    g = compiled.graph
    sr = g.ops
    scopes = [f.scope for f in g.factors]
    tables = [g.factor_nd(f) for f in g.factors]
    adj: dict[int, list[tuple[int, tuple[int, ...]]]] = {
        i: [] for i in range(len(scopes))}
    for e in compiled.cluster_edges:
        adj[e.a].append((e.b, e.separator))
        adj[e.b].append((e.a, e.separator))

    messages: dict[tuple[int, int], PotentialSlice] = {}

    def send(src: int, dst: int, separator: tuple[int, ...]) -> None:
        acc = tables[src]
        for nb, _sep in adj[src]:
            if nb == dst:
                continue
            acc = _mul_into(sr, acc, scopes[src], messages[(nb, src)])
        messages[(src, dst)] = restrict(PotentialSlice(scopes[src], acc),
                                        separator, sr)

    seen = set()
    for root in compiled.roots:
        order = [(root, None, None)]
        seen.add(root)
        i = 0
        while i < len(order):
            node = order[i][0]
            i += 1
            for nb, sep in sorted(adj[node]):
                if nb not in seen:
                    seen.add(nb)
                    order.append((nb, node, sep))
        for node, par, sep in reversed(order):
            if par is not None:
                send(node, par, sep)
        for node, par, sep in order:
            if par is not None:
                send(par, node, sep)

    beliefs = []
    for c in range(len(scopes)):
        acc = tables[c]
        for nb, _sep in adj[c]:
            acc = _mul_into(sr, acc, scopes[c], messages[(nb, c)])
        beliefs.append(PotentialSlice(scopes[c], acc))

    root_set = set(compiled.roots)
    Z = sr.one
    for c in sorted(root_set):
        vec = beliefs[c].table.ravel()
        if g.semiring == "sum_product":
            total = vec.sum()
        elif g.semiring == "min_sum":
            total = vec.min()
        else:
            total = vec.max()
        Z = sr.mul(Z, total)
    unsat = (g.semiring != "min_sum" and Z == 0.0) or \
        (g.semiring == "min_sum" and not np.isfinite(Z))
    return ClusterTreeResult(tuple(beliefs), float(Z), bool(unsat))


def marginalize_modes(compiled: CompiledModel,
                      result: ClusterTreeResult) -> list[np.ndarray]:
    """Per-original-variable marginals from calibrated cluster beliefs."""
    g = compiled.graph
    sr = g.ops
    out = []
    holder: dict[int, int] = {}
    for ci, b in enumerate(result.beliefs):
        for v in b.scope:
            holder.setdefault(v, ci)
    for v_id in range(compiled.original_var_count):
        card = g.cardinality(v_id)
        if v_id not in holder:
            # variable untouched by any factor: uniform under sum-product
            out.append(np.full(card, 1.0 / card)
                       if g.semiring == "sum_product"
                       else np.full(card, sr.one))
            continue
        b = result.beliefs[holder[v_id]]
        vec = restrict(b, (v_id,), sr).table
        out.append(sr.normalize(vec))
    return out


# ---------------------------------------------------------------------------
# End-to-end pipeline
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HatccResult:
    status: str  # "ok" | "unsat"
    Z: float
    marginals: tuple[np.ndarray, ...]
    report: Optional[HolonomyReport]
    timings: dict
    running_intersection_ok: bool
    unsat_chord: Optional[tuple[int, int]] = None
    compiled: Optional[CompiledModel] = None


def hatcc_infer(graph: FactorGraph, tol: float = 0.0,
                cap: int = 2 ** 16,
                root_rule: str = "max_degree") -> HatccResult:
    """Run the full compile-and-solve pipeline.

    Phases: validate, nerve, backbone/cycles + holonomy, mode quotients
    and selectors, augmented-graph construction, separator passing over
    the augmented nerve tree, mode marginalization.  Graphs whose
    bipartite structure is already acyclic take an exact two-pass BP
    fast path.
    """
    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    validate_strict(graph)
    timings["validate"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    report = diagnose(graph, tol=tol, cap=cap, root_rule=root_rule)
    timings["diagnose"] = time.perf_counter() - t0

    if not report.backbone.chords and bp_engine.is_bipartite_forest(graph):
        t0 = time.perf_counter()
        bel, Z, _m, degenerate = bp_engine.run_tree_exact(graph)
        timings["tree_bp"] = time.perf_counter() - t0
        status = "unsat" if (graph.semiring != "min_sum" and Z == 0.0) \
            else "ok"
        return HatccResult(status, Z, tuple(bel), report, timings, True)

    t0 = time.perf_counter()
    compiled = augment(graph, report)
    timings["augment"] = time.perf_counter() - t0
    if isinstance(compiled, UnsatCertificate):
        card = [v.cardinality for v in graph.variables]
        marg = tuple(np.full(c, 1.0 / c) for c in card)
        return HatccResult("unsat", 0.0, marg, report, timings, True,
                           unsat_chord=compiled.chord)

    t0 = time.perf_counter()
    ct = cluster_tree_propagate(compiled)
    timings["propagate"] = time.perf_counter() - t0

    Z = ct.Z
    if graph.semiring == "sum_product":
        # variables untouched by any factor contribute their cardinality
        touched = set()
        for f in graph.factors:
            touched.update(f.scope)
        for v in graph.variables:
            if v.id not in touched:
                Z *= v.cardinality

    t0 = time.perf_counter()
    marg = marginalize_modes(compiled, ct)
    timings["marginalize"] = time.perf_counter() - t0

    status = "unsat" if ct.unsat else "ok"
    return HatccResult(status, Z, tuple(marg), report, timings,
                       compiled.running_intersection_ok, compiled=compiled)


# ---------------------------------------------------------------------------
# Descent data over covers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OverlapCheck:
    i: int
    j: int
    overlap: tuple[int, ...]
    discrepancy: float


@dataclass(frozen=True)
class DescentReport:
    compatible: bool
    overlaps: tuple[OverlapCheck, ...]
    tolerance: float


def check_descent_datum(graph: FactorGraph, cover: Sequence[Sequence[int]],
                        local_tables: Sequence[PotentialSlice],
                        tolerance: float = 1e-12) -> DescentReport:
    """Pairwise overlap compatibility of local tables on a cover.

    The cover must contain every variable and contain each factor scope
    within a single piece.  Each nonempty pairwise overlap is checked by
    restricting both local tables to it and comparing entrywise.
    """
    pieces = [tuple(sorted(set(p))) for p in cover]
    if len(pieces) != len(local_tables):
        raise ValueError("one local table per cover piece is required")
    covered = set().union(*[set(p) for p in pieces]) if pieces else set()
    missing = [v.id for v in graph.variables if v.id not in covered]
    if missing:
        raise ValueError(f"cover misses variable(s) {missing}")
    for f in graph.factors:
        if not any(set(f.scope) <= set(p) for p in pieces):
            raise ValueError(f"factor {f.id} scope {f.scope} fits in no "
                             "cover piece")
    for piece, slc in zip(pieces, local_tables):
        if tuple(sorted(slc.scope)) != piece:
            raise ValueError(f"local table scope {slc.scope} does not match "
                             f"cover piece {piece}")
    sr = graph.ops
    checks = []
    ok = True
    for i in range(len(pieces)):
        for j in range(i + 1, len(pieces)):
            overlap = tuple(sorted(set(pieces[i]) & set(pieces[j])))
            if not overlap:
                continue
            a = restrict(local_tables[i], overlap, sr).table
            b = restrict(local_tables[j], overlap, sr).table
            disc = float(np.abs(a - b).max())
            if not disc < tolerance:
                ok = False
            checks.append(OverlapCheck(i, j, overlap, disc))
    return DescentReport(ok, tuple(checks), tolerance)


def glue_restriction(cover: Sequence[Sequence[int]],
                     local_tables: Sequence[PotentialSlice],
                     target: Sequence[int], semiring: Semiring,
                     piece: Optional[int] = None) -> PotentialSlice:
    """Evaluate the glued global function on a covered sub-scope.

    For a descent datum the answer is independent of which containing
    piece is used; ``piece`` selects one explicitly so uniqueness can be
    exercised from the outside.
    """
    target_set = set(target)
    candidates = [i for i, p in enumerate(cover) if target_set <= set(p)]
    if not candidates:
        raise ValueError(f"target scope {tuple(target)} fits in no cover "
                         "piece")
    chosen = candidates[0] if piece is None else piece
    if chosen not in candidates:
        raise ValueError(f"piece {chosen} does not contain {tuple(target)}")
    return restrict(local_tables[chosen], tuple(target), semiring)


def result_to_json_dict(result: HatccResult,
                        include_timings: bool = True) -> dict:
    out: dict = {"status": result.status}
    if result.status == "unsat":
        out["unsat_chord"] = list(result.unsat_chord) \
            if result.unsat_chord else None
    out["Z"] = result.Z
    out["marginals"] = [[float(x) for x in m] for m in result.marginals]
    if result.report is not None:
        out["holonomy"] = report_to_json_dict(result.report)
    out["running_intersection_ok"] = result.running_intersection_ok
    if include_timings:
        out["timings_ms"] = {k: 1000.0 * v
                             for k, v in result.timings.items()}
    return out
