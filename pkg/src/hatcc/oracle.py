"""Brute-force exact inference by full enumeration.

Desk-scale ground truth: partition function, per-variable marginals and
MAP assignment, via a mixed-radix odometer over all joint assignments.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .factor_graph import FactorGraph, validate_strict

DEFAULT_STATE_CAP = 2 ** 20


class StateSpaceCapExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class OracleMarginals:
    Z: float
    marginals: tuple[np.ndarray, ...]  # normalized, one per variable
    unsat: bool


@dataclass(frozen=True)
class OracleMap:
    assignment: tuple[int, ...]
    weight: float


def _total_states(graph: FactorGraph, cap: int) -> int:
    total = 1
    for v in graph.variables:
        total *= v.cardinality
        if total > cap:
            raise StateSpaceCapExceeded(
                f"joint state space exceeds cap {cap}")
    return total


def _weights_by_odometer(graph: FactorGraph):
    """Yield (assignment array, weight) over all joint states.

    The assignment odometer increments the last variable fastest, so
    enumeration order is lexicographic over the state vector.
    """
    sr = graph.ops
    n = len(graph.variables)
    cards = [v.cardinality for v in graph.variables]
    tables = [graph.factor_nd(f) for f in graph.factors]
    scopes = [f.scope for f in graph.factors]
    state = np.zeros(n, dtype=np.int64)
    while True:
        w = np.float64(sr.one)
        for tab, scope in zip(tables, scopes):
            w = sr.mul(w, tab[tuple(state[v] for v in scope)])
        yield state, float(w)
        # odometer step, last digit fastest
        pos = n - 1
        while pos >= 0:
            state[pos] += 1
            if state[pos] < cards[pos]:
                break
            state[pos] = 0
            pos -= 1
        if pos < 0:
            return


def exact_marginals(graph: FactorGraph,
                    cap: int = DEFAULT_STATE_CAP) -> OracleMarginals:
    """Enumerate all assignments; return Z and normalized marginals.

    Sum-product semantics: Z is the sum of joint weights and marginals
    are probability vectors.  Z = 0 is reported as UNSAT with uniform
    placeholder marginals.
    """
    validate_strict(graph)
    if graph.semiring != "sum_product":
        raise ValueError("exact_marginals requires the sum_product semiring")
    _total_states(graph, cap)
    tallies = [np.zeros(v.cardinality) for v in graph.variables]
    Z = 0.0
    for state, w in _weights_by_odometer(graph):
        Z += w
        if w != 0.0:
            for i, s in enumerate(state):
                tallies[i][s] += w
    if Z == 0.0:
        marg = tuple(np.full(v.cardinality, 1.0 / v.cardinality)
                     for v in graph.variables)
        return OracleMarginals(0.0, marg, True)
    return OracleMarginals(Z, tuple(t / Z for t in tallies), False)


def exact_map(graph: FactorGraph, cap: int = DEFAULT_STATE_CAP) -> OracleMap:
    """Best joint assignment with lexicographic tie-breaking.

    For sum/max-product the best weight is the maximum; for min-sum it
    is the minimum (energy).  Ties go to the lexicographically smallest
    assignment, which the enumeration order yields for free.
    """
    validate_strict(graph)
    _total_states(graph, cap)
    better = min if graph.semiring == "min_sum" else max
    best_w = None
    best_a = None
    for state, w in _weights_by_odometer(graph):
        if best_w is None or better(w, best_w) != best_w:
            best_w = w
            best_a = tuple(int(s) for s in state)
    return OracleMap(best_a, best_w)
