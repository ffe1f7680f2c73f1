"""Base-vertex sector decomposition for pairwise models.

A spanning tree of the variable graph leaves one holonomy generator per
off-tree edge, acting on the base variable's state space.  Orbits of the
generated action partition that fiber; inference is run once per orbit
with the base clamped to it, and the per-orbit marginals are recombined
with normalized evidence weights.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import bp_engine
from .factor_graph import FactorDecl, FactorGraph, validate_strict
from .holonomy import _tarjan_scc, compose, transport_kernel


@dataclass(frozen=True)
class VariableTree:
    base: int
    tree_factors: tuple[int, ...]  # pairwise factor ids forming the tree
    offtree_factors: tuple[int, ...]
    parent: dict  # var -> (parent var, connecting factor id); base -> None


@dataclass(frozen=True)
class SectorDecomposition:
    base: int
    tree: VariableTree
    generators: tuple[np.ndarray, ...]  # bool matrices on the base fiber
    orbits: tuple[tuple[int, ...], ...]


@dataclass(frozen=True)
class SectorResult:
    decomposition: SectorDecomposition
    mode: str  # "decomposition" | "sector_bp"
    evidences: tuple[float, ...]
    weights: tuple[float, ...]
    per_orbit_marginals: tuple[tuple[np.ndarray, ...], ...]
    marginals: tuple[np.ndarray, ...]  # recombined
    converged: tuple[bool, ...]  # per orbit (True for exact tree runs)
    unsat: bool


def _pairwise_structure(graph: FactorGraph):
    """Split factors into unary and pairwise; reject higher arity."""
    unary, pairwise = [], []
    for f in graph.factors:
        if len(f.scope) == 1:
            unary.append(f.id)
        elif len(f.scope) == 2:
            pairwise.append(f.id)
        else:
            raise ValueError(f"factor {f.id} has arity {len(f.scope)}; "
                             "sector decomposition handles pairwise models "
                             "only")
    return unary, pairwise


def variable_tree(graph: FactorGraph, base: int) -> VariableTree:
    """BFS spanning tree of the variable graph rooted at the base."""
    _unary, pairwise = _pairwise_structure(graph)
    adj: dict[int, list[tuple[int, int]]] = {v.id: []
                                             for v in graph.variables}
    for fid in pairwise:
        a, b = graph.factors[fid].scope
        adj[a].append((b, fid))
        adj[b].append((a, fid))
    for v in adj:
        adj[v].sort()
    parent: dict[int, Optional[tuple[int, int]]] = {base: None}
    order = [base]
    tree_factors: list[int] = []
    i = 0
    while i < len(order):
        u = order[i]
        i += 1
        for nb, fid in adj[u]:
            if nb not in parent:
                parent[nb] = (u, fid)
                tree_factors.append(fid)
                order.append(nb)
    if len(parent) != len(graph.variables):
        raise ValueError("sector decomposition requires a connected "
                         "pairwise model")
    offtree = tuple(sorted(set(pairwise) - set(tree_factors)))
    return VariableTree(base, tuple(sorted(tree_factors)), offtree, parent)


def _edge_transport(graph: FactorGraph, fid: int, src: int, dst: int,
                    tol: float) -> np.ndarray:
    return transport_kernel(graph, fid, (src,), (dst,), tol).matrix


def _path_transport(graph: FactorGraph, tree: VariableTree, src: int,
                    dst: int, tol: float) -> np.ndarray:
    """Compose edge transports along the tree path from src to dst.

    Both endpoints hang below the base, so the path runs through their
    lowest common ancestor in the BFS tree.
    """
    def chain_to_base(v):
        chain = [v]
        while tree.parent[chain[-1]] is not None:
            chain.append(tree.parent[chain[-1]][0])
        return chain

    up_src = chain_to_base(src)
    up_dst = chain_to_base(dst)
    pos = {v: i for i, v in enumerate(up_src)}
    k = 0
    while up_dst[k] not in pos:
        k += 1
    lca = up_dst[k]
    path = up_src[:pos[lca] + 1] + list(reversed(up_dst[:k]))
    M = np.eye(graph.cardinality(src), dtype=bool)
    for a, b in zip(path, path[1:]):
        # the connecting factor is recorded on the child side
        if tree.parent[a] is not None and tree.parent[a][0] == b:
            fid = tree.parent[a][1]
        else:
            fid = tree.parent[b][1]
        M = compose(M, _edge_transport(graph, fid, a, b, tol))
    return M


def base_generators(graph: FactorGraph, base: int,
                    tol: float = 0.0) -> tuple[VariableTree,
                                               list[np.ndarray]]:
    """One holonomy generator per off-tree edge, rebased at the base.

    Generator = transport base->i along the tree, across the off-tree
    factor i->j, then j->base along the tree.
    """
    validate_strict(graph)
    tree = variable_tree(graph, base)
    gens = []
    for fid in tree.offtree_factors:
        i, j = graph.factors[fid].scope
        M = _path_transport(graph, tree, base, i, tol)
        M = compose(M, _edge_transport(graph, fid, i, j, tol))
        M = compose(M, _path_transport(graph, tree, j, base, tol))
        gens.append(M)
    return tree, gens


def orbit_partition(generators, fiber_size: int,
                    strict_group: bool = False) -> tuple[tuple[int, ...], ...]:
    """Mutual-reachability classes under the generated action.

    Default (monoid) semantics: SCCs of the union digraph of all
    generators.  ``strict_group`` requires every generator to be a
    permutation and closes under inverses (symmetrizes).
    """
    union = np.zeros((fiber_size, fiber_size), dtype=bool)
    for g in generators:
        g = np.asarray(g, dtype=bool)
        if g.shape != (fiber_size, fiber_size):
            raise ValueError("generator shape does not match the fiber")
        if strict_group:
            if not (np.all(g.sum(0) == 1) and np.all(g.sum(1) == 1)):
                raise ValueError("strict group mode requires permutation "
                                 "generators")
        union |= g
    if strict_group:
        union |= union.T
    adj = [list(np.flatnonzero(union[x])) for x in range(fiber_size)]
    sccs = _tarjan_scc(adj)
    sccs.sort(key=lambda c: c[0])
    return tuple(tuple(c) for c in sccs)


def decompose(graph: FactorGraph, base: Optional[int] = None,
              tol: float = 0.0,
              strict_group: bool = False) -> SectorDecomposition:
    """Pick a base (max degree by default), build generators and orbits."""
    _unary, pairwise = _pairwise_structure(graph)
    if base is None:
        degree = {v.id: 0 for v in graph.variables}
        for fid in pairwise:
            for v in graph.factors[fid].scope:
                degree[v] += 1
        base = max(degree, key=lambda v: (degree[v], -v))
    tree, gens = base_generators(graph, base, tol)
    orbits = orbit_partition(gens, graph.cardinality(base), strict_group)
    return SectorDecomposition(base, tree, tuple(gens), orbits)


def _clamped_graph(graph: FactorGraph, keep_factors, base: int,
                   orbit) -> FactorGraph:
    """Sub-model with a unary indicator clamping the base to the orbit."""
    sr = graph.ops
    factors = []
    for fid in keep_factors:
        f = graph.factors[fid]
        factors.append(FactorDecl(len(factors), f.scope, f.table))
    clamp = np.full(graph.cardinality(base), sr.zero)
    for s in orbit:
        clamp[s] = sr.one
    factors.append(FactorDecl(len(factors), (base,), clamp))
    return FactorGraph(graph.semiring, graph.variables, tuple(factors))


def sector_infer(graph: FactorGraph,
                 decomposition: Optional[SectorDecomposition] = None,
                 base: Optional[int] = None, mode: str = "sector_bp",
                 tol: float = 0.0, max_iters: int = 200,
                 residual_threshold: float = 1e-6) -> SectorResult:
    """Per-orbit clamped inference and evidence-weighted recombination.

    'decomposition' mode drops the off-tree factors and solves the
    spanning tree exactly.  'sector_bp' mode keeps them: exact two-pass
    BP when the clamped model is acyclic, loopy BP otherwise.  Evidence
    Z comes from the exact tree model unless the sector-BP model is
    itself acyclic.
    """
    if graph.semiring != "sum_product":
        raise ValueError("sector_infer requires the sum_product semiring")
    if mode not in ("decomposition", "sector_bp"):
        raise ValueError(f"unknown sector mode '{mode}'")
    if decomposition is None:
        decomposition = decompose(graph, base, tol)
    dec = decomposition
    unary, _pairwise = _pairwise_structure(graph)
    tree_keep = sorted(set(unary) | set(dec.tree.tree_factors))
    full_keep = list(range(len(graph.factors)))

    evidences: list[float] = []
    all_marg: list[tuple[np.ndarray, ...]] = []
    converged: list[bool] = []
    for orbit in dec.orbits:
        tree_model = _clamped_graph(graph, tree_keep, dec.base, orbit)
        if mode == "decomposition":
            bel, Z, _m, _deg = bp_engine.run_tree_exact(tree_model)
            evidences.append(Z)
            all_marg.append(tuple(bel))
            converged.append(True)
            continue
        full_model = _clamped_graph(graph, full_keep, dec.base, orbit)
        if bp_engine.is_bipartite_forest(full_model):
            bel, Z, _m, _deg = bp_engine.run_tree_exact(full_model)
            evidences.append(Z)
            all_marg.append(tuple(bel))
            converged.append(True)
        else:
            res = bp_engine.run(full_model, max_iters=max_iters,
                                residual_threshold=residual_threshold)
            _bel, Z, _m, _deg = bp_engine.run_tree_exact(tree_model)
            evidences.append(Z)
            all_marg.append(res.beliefs)
            converged.append(res.converged)

    total = float(sum(evidences))
    n_orbits = len(dec.orbits)
    if total <= 0.0:
        weights = tuple(0.0 for _ in range(n_orbits))
        marg = tuple(np.full(v.cardinality, 1.0 / v.cardinality)
                     for v in graph.variables)
        return SectorResult(dec, mode, tuple(evidences), weights,
                            tuple(all_marg), marg, tuple(converged), True)
    weights = tuple(z / total for z in evidences)
    marg = []
    for v in graph.variables:
        acc = np.zeros(v.cardinality)
        for w, sector_marg in zip(weights, all_marg):
            acc += w * sector_marg[v.id]
        marg.append(acc)
    return SectorResult(dec, mode, tuple(evidences), weights,
                        tuple(all_marg), tuple(marg), tuple(converged),
                        False)


def sector_report_json(result: SectorResult) -> dict:
    return {
        "base": result.decomposition.base,
        "n_generators": len(result.decomposition.generators),
        "n_nontrivial_generators": sum(
            1 for g in result.decomposition.generators
            if not np.array_equal(g, np.eye(g.shape[0], dtype=bool))),
        "orbit_sizes": [len(o) for o in result.decomposition.orbits],
        "evidences": list(result.evidences),
        "weights": list(result.weights),
        "unsat": result.unsat,
    }
