"""Shared brute-force oracles kept independent of the library's solvers."""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from stochfg.graphs import DirectedGraph


def brute_independence(graph: DirectedGraph, weights=None) -> tuple[float, frozenset]:
    """Exhaustive max-(weight) independent set over all 2^K subsets."""
    K = graph.K
    w = np.ones(K) if weights is None else np.asarray(weights, dtype=float)
    adj = graph.adjacency
    best_val, best_set = 0.0, frozenset()
    for mask in range(1 << K):
        members = [i for i in range(K) if mask >> i & 1]
        ok = all(
            not (adj[i, j] or adj[j, i])
            for i, j in itertools.combinations(members, 2)
        )
        if ok:
            val = float(sum(w[i] for i in members))
            if val > best_val:
                best_val, best_set = val, frozenset(members)
    return best_val, best_set


def brute_weak_domination(graph: DirectedGraph, weights=None) -> float:
    """Exhaustive min-(weight) weakly dominating set; inf when impossible."""
    K = graph.K
    w = np.ones(K) if weights is None else np.asarray(weights, dtype=float)
    adj = graph.adjacency
    weak = []
    for i in range(K):
        in_nb = set(np.flatnonzero(adj[:, i]))
        observable = bool(in_nb)
        strongly = (i in in_nb) or set(range(K)) - {i} <= in_nb
        if observable and not strongly:
            weak.append(i)
    best = math.inf
    for mask in range(1 << K):
        members = {i for i in range(K) if mask >> i & 1}
        if all(v in members or any(adj[j, v] for j in members) for v in weak):
            best = min(best, float(sum(w[i] for i in members)))
    return best


def brute_classify(graph: DirectedGraph) -> str:
    K = graph.K
    adj = graph.adjacency
    observable = strongly = True
    for i in range(K):
        in_nb = set(np.flatnonzero(adj[:, i]))
        if not in_nb:
            observable = False
        if not (i in in_nb or set(range(K)) - {i} <= in_nb):
            strongly = False
    if strongly:
        return "strongly_observable"
    if observable:
        return "weakly_observable"
    return "non_observable"


def random_graph(rng: np.random.Generator, K: int, p_edge: float = 0.3, loops="random") -> DirectedGraph:
    adj = rng.random((K, K)) < p_edge
    if loops == "all":
        np.fill_diagonal(adj, True)
    elif loops == "none":
        np.fill_diagonal(adj, False)
    return DirectedGraph.from_adjacency(adj)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
