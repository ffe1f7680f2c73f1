"""Factor nerve, backbone spanning tree, chords, fundamental cycles.

The nerve has one vertex per factor and an edge wherever two factor
scopes overlap, weighted by the log-cardinality of the shared interface.
A maximum-weight spanning forest is the backbone; the remaining edges
are chords, each closing one fundamental cycle through the tree.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .factor_graph import FactorGraph


@dataclass(frozen=True)
class NerveEdge:
    f1: int
    f2: int  # f1 < f2
    interface: tuple[int, ...]  # sorted variable ids
    weight: float

    @property
    def key(self) -> tuple[int, int]:
        return (self.f1, self.f2)


@dataclass(frozen=True)
class FactorNerve:
    vertices: tuple[int, ...]
    edges: tuple[NerveEdge, ...]

    def edge_map(self) -> dict[tuple[int, int], NerveEdge]:
        return {e.key: e for e in self.edges}


@dataclass(frozen=True)
class Backbone:
    tree_edges: tuple[NerveEdge, ...]
    chords: tuple[NerveEdge, ...]
    roots: tuple[int, ...]  # one per connected component
    parent: dict  # factor id -> parent factor id (roots map to None)

    @property
    def root(self) -> int:
        return self.roots[0]


@dataclass(frozen=True)
class FundamentalCycle:
    chord: NerveEdge
    factor_sequence: tuple[int, ...]  # tree path, chord endpoints at the ends
    interface_sequence: tuple[tuple[int, ...], ...]  # last = chord interface


def build_factor_nerve(graph: FactorGraph) -> FactorNerve:
    """All-pairs scope overlap scan."""
    scopes = [set(f.scope) for f in graph.factors]
    edges = []
    for i in range(len(scopes)):
        for j in range(i + 1, len(scopes)):
            shared = scopes[i] & scopes[j]
            if not shared:
                continue
            interface = tuple(sorted(shared))
            w = sum(math.log(graph.cardinality(v)) for v in interface)
            edges.append(NerveEdge(i, j, interface, w))
    return FactorNerve(tuple(range(len(scopes))), tuple(edges))


def backbone(nerve: FactorNerve, root_rule: str = "max_degree") -> Backbone:
    """Maximum-weight spanning forest via Kruskal, deterministic ties.

    Equal-weight ties prefer the lexicographically smaller (f1, f2).
    Disconnected nerves yield one tree and one root per component.
    ``root_rule`` is 'max_degree' (ties to smallest id) or 'first'.
    """
    order = sorted(nerve.edges, key=lambda e: (-e.weight, e.f1, e.f2))
    parent_uf = {v: v for v in nerve.vertices}

    def find(x):
        root = x
        while parent_uf[root] != root:
            root = parent_uf[root]
        while parent_uf[x] != x:
            parent_uf[x], x = root, parent_uf[x]
        return root

    tree, chords = [], []
    for e in order:
        a, b = find(e.f1), find(e.f2)
        if a == b:
            chords.append(e)
        else:
            parent_uf[a] = b
            tree.append(e)
    chords.sort(key=lambda e: e.key)
    tree.sort(key=lambda e: e.key)

    adj: dict[int, list[int]] = {v: [] for v in nerve.vertices}
    for e in tree:
        adj[e.f1].append(e.f2)
        adj[e.f2].append(e.f1)
    degree = {v: 0 for v in nerve.vertices}
    for e in nerve.edges:
        degree[e.f1] += 1
        degree[e.f2] += 1

    seen: set[int] = set()
    roots: list[int] = []
    parent: dict[int, Optional[int]] = {}
    for v in nerve.vertices:
        if v in seen:
            continue
        # collect the component first so the root rule sees all of it
        comp = [v]
        seen.add(v)
        i = 0
        while i < len(comp):
            for nb in adj[comp[i]]:
                if nb not in seen:
                    seen.add(nb)
                    comp.append(nb)
            i += 1
        if root_rule == "max_degree":
            root = max(comp, key=lambda u: (degree[u], -u))
        elif root_rule == "first":
            root = min(comp)
        else:
            raise ValueError(f"unknown root rule '{root_rule}'")
        roots.append(root)
        # BFS rooting
        parent[root] = None
        frontier = [root]
        done = {root}
        while frontier:
            nxt = []
            for u in frontier:
                for nb in sorted(adj[u]):
                    if nb not in done:
                        done.add(nb)
                        parent[nb] = u
                        nxt.append(nb)
            frontier = nxt
    return Backbone(tuple(tree), tuple(chords), tuple(roots), parent)


def _tree_path(bb: Backbone, u: int, v: int) -> list[int]:
    """Unique backbone path from u to v via the lowest common ancestor."""
    anc_u = []
    x = u
    while x is not None:
        anc_u.append(x)
        x = bb.parent[x]
    pos = {node: i for i, node in enumerate(anc_u)}
    path_v = []
    x = v
    while x not in pos:
        path_v.append(x)
        x = bb.parent[x]
        if x is None:
            raise ValueError(f"factors {u} and {v} are in different "
                             "backbone components")
    lca = x
    return anc_u[:pos[lca] + 1] + list(reversed(path_v))


def fundamental_cycle(graph: FactorGraph, bb: Backbone,
                      chord: NerveEdge) -> FundamentalCycle:
    """Tree path between the chord endpoints plus the chord itself.

    The factor sequence runs from the chord's second endpoint to its
    first; interfaces are consecutive scope intersections, and the last
    interface is the chord's own.
    """
    path = _tree_path(bb, chord.f2, chord.f1)
    interfaces = []
    for a, b in zip(path, path[1:]):
        shared = set(graph.factors[a].scope) & set(graph.factors[b].scope)
        if not shared:
            raise ValueError(f"backbone path factors {a},{b} share no "
                             "variable")
        interfaces.append(tuple(sorted(shared)))
    interfaces.append(chord.interface)
    return FundamentalCycle(chord, tuple(path), tuple(interfaces))


def to_dot(nerve: FactorNerve, bb: Optional[Backbone] = None) -> str:
    """DOT rendering: backbone edges solid, chords dashed."""
    tree_keys = set(e.key for e in bb.tree_edges) if bb else None
    lines = ["graph nerve {"]
    for v in nerve.vertices:
        lines.append(f'  f{v} [label="f{v}"];')
    for e in nerve.edges:
        label = ",".join(f"v{x}" for x in e.interface)
        style = ""
        if tree_keys is not None and e.key not in tree_keys:
            style = ", style=dashed"
        lines.append(f'  f{e.f1} -- f{e.f2} [label="{label}"{style}];')
    lines.append("}")
    return "\n".join(lines) + "\n"
