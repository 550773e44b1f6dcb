"""Directed feedback graphs, observability classes, and combinatorial parameters.

Independence is always evaluated on the orientation-blind closure of the edge
set (an edge between distinct i and j exists if (i, j) or (j, i) is present)
and self-loops never exclude a vertex from an independent set.  Weak
domination asks for a smallest (or lightest) set of vertices whose
out-edges cover every weakly observable vertex outside the set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Iterable

import numpy as np

from .errors import ArgumentError, CapabilityError, DomainError

EXACT_INDEPENDENCE_LIMIT = 32
EXACT_DOMINATION_LIMIT = 20
EXACT_WEIGHTED_INDEPENDENCE_LIMIT = 24


@dataclass(frozen=True)
class DirectedGraph:
    """Directed graph over vertices 0..K-1; self-loops allowed."""

    K: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self):
        if self.K < 1:
            raise ArgumentError(f"vertex count must be >= 1, got {self.K}")
        if not isinstance(self.edges, frozenset):
            object.__setattr__(self, "edges", frozenset(self.edges))
        for i, j in self.edges:
            if not (0 <= i < self.K and 0 <= j < self.K):
                raise ArgumentError(f"edge ({i},{j}) out of range for K={self.K}")

    @classmethod
    def from_edges(cls, K: int, edges: Iterable[tuple[int, int]]) -> "DirectedGraph":
        return cls(K, frozenset((int(i), int(j)) for i, j in edges))

    @classmethod
    def from_adjacency(cls, adj: np.ndarray) -> "DirectedGraph":
        adj = np.asarray(adj)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ArgumentError("adjacency matrix must be square")
        ii, jj = np.nonzero(adj)
        return cls(adj.shape[0], frozenset(zip(ii.tolist(), jj.tolist())))

    @classmethod
    def complete(cls, K: int, self_loops: bool = True) -> "DirectedGraph":
        edges = {(i, j) for i in range(K) for j in range(K) if self_loops or i != j}
        return cls(K, frozenset(edges))

    @classmethod
    def bandit(cls, K: int) -> "DirectedGraph":
        """Self-loops only."""
        return cls(K, frozenset((i, i) for i in range(K)))

    @cached_property
    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.K, self.K), dtype=bool)
        for i, j in self.edges:
            adj[i, j] = True
        adj.setflags(write=False)
        return adj

    @cached_property
    def in_masks(self) -> list[int]:
        masks = [0] * self.K
        for i, j in self.edges:
            masks[j] |= 1 << i
        return masks

    @cached_property
    def out_masks(self) -> list[int]:
        masks = [0] * self.K
        for i, j in self.edges:
            masks[i] |= 1 << j
        return masks

    @cached_property
    def undirected_masks(self) -> list[int]:
        """Orientation-blind adjacency without self-loops."""
        masks = [0] * self.K
        for i, j in self.edges:
            if i != j:
                masks[i] |= 1 << j
                masks[j] |= 1 << i
        return masks

    def edge_mask(self) -> int:
        """All edges packed into one integer, bit i*K+j set iff (i,j) present."""
        m = 0
        for i, j in self.edges:
            m |= 1 << (i * self.K + j)
        return m

    def __repr__(self):
        return f"DirectedGraph(K={self.K}, |E|={len(self.edges)})"


class GraphClass(Enum):
    NON_OBSERVABLE = "non_observable"
    WEAKLY_OBSERVABLE = "weakly_observable"
    STRONGLY_OBSERVABLE = "strongly_observable"


@dataclass(frozen=True)
class ObservabilityClass:
    graph_class: GraphClass
    observable: np.ndarray  # per-vertex bool
    strongly_observable: np.ndarray  # per-vertex bool

    @property
    def weakly_observable_vertices(self) -> np.ndarray:
        return np.flatnonzero(self.observable & ~self.strongly_observable)

    @property
    def is_observable(self) -> bool:
        return self.graph_class is not GraphClass.NON_OBSERVABLE

    @property
    def is_strongly_observable(self) -> bool:
        return self.graph_class is GraphClass.STRONGLY_OBSERVABLE


@dataclass(frozen=True)
class VertexWeights:
    """Strictly positive, finite per-vertex weights."""

    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if w.ndim != 1:
            raise ArgumentError("weights must be a 1-d vector")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ArgumentError("weights must be finite and strictly positive")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @classmethod
    def ones(cls, K: int) -> "VertexWeights":
        return cls(np.ones(K))


def neighborhoods(graph: DirectedGraph, i: int) -> tuple[frozenset[int], frozenset[int]]:
    """(in-neighborhood, out-neighborhood) of vertex i; includes i on a self-loop."""
    if not 0 <= i < graph.K:
        raise ArgumentError(f"vertex {i} out of range for K={graph.K}")
    in_set = frozenset(j for j in range(graph.K) if graph.in_masks[i] >> j & 1)
    out_set = frozenset(j for j in range(graph.K) if graph.out_masks[i] >> j & 1)
    return in_set, out_set


def classify(graph: DirectedGraph) -> ObservabilityClass:
    """Per-vertex and graph-level observability.

    A vertex is observable when its in-neighborhood is nonempty, strongly
    observable when it has a self-loop or every other vertex points to it.
    """
    K = graph.K
    full = (1 << K) - 1
    observable = np.zeros(K, dtype=bool)
    strong = np.zeros(K, dtype=bool)
    for i in range(K):
        m = graph.in_masks[i]
        observable[i] = m != 0
        strong[i] = bool(m >> i & 1) or (m | (1 << i)) == full
    if strong.all():
        gc = GraphClass.STRONGLY_OBSERVABLE
    elif observable.all():
        gc = GraphClass.WEAKLY_OBSERVABLE
    else:
        gc = GraphClass.NON_OBSERVABLE
    observable.setflags(write=False)
    strong.setflags(write=False)
    return ObservabilityClass(gc, observable, strong)


# ---------------------------------------------------------------------------
# Maximum (weighted) independent set
# ---------------------------------------------------------------------------


def _greedy_independent_set(masks: list[int], weights: np.ndarray) -> int:
    order = sorted(range(len(masks)), key=lambda i: (-weights[i], i))
    chosen = 0
    blocked = 0
    for i in order:
        if not blocked >> i & 1:
            chosen |= 1 << i
            blocked |= masks[i] | (1 << i)
    return chosen


def _clique_cover_bound(cand: int, masks: list[int], weights: np.ndarray) -> float:
    """Upper bound on the best weight inside `cand`: one vertex per greedy clique."""
    bound = 0.0
    remaining = cand
    while remaining:
        v = (remaining & -remaining).bit_length() - 1
        clique = 1 << v
        clique_max = weights[v]
        common = masks[v] & remaining
        while common:
            u = (common & -common).bit_length() - 1
            clique |= 1 << u
            clique_max = max(clique_max, weights[u])
            common &= masks[u]
        bound += clique_max
        remaining &= ~clique
    return bound


def _max_weight_independent_set(masks: list[int], weights: np.ndarray) -> tuple[float, int]:
    """Branch-and-bound over bitmasks; returns (best weight, witness mask)."""
    K = len(masks)
    best_mask = _greedy_independent_set(masks, weights)
    best = float(sum(weights[i] for i in range(K) if best_mask >> i & 1))
    state = [best, best_mask]

    def dfs(cand: int, cur_w: float, cur_mask: int):
        if cand == 0:
            if cur_w > state[0]:
                state[0], state[1] = cur_w, cur_mask
            return
        if cur_w + _clique_cover_bound(cand, masks, weights) <= state[0]:
            return
        # branch on the heaviest candidate
        v, v_w = -1, -1.0
        m = cand
        while m:
            u = (m & -m).bit_length() - 1
            if weights[u] > v_w:
                v, v_w = u, weights[u]
            m &= m - 1
        dfs(cand & ~(masks[v] | (1 << v)), cur_w + v_w, cur_mask | (1 << v))
        dfs(cand & ~(1 << v), cur_w, cur_mask)

    dfs((1 << K) - 1, 0.0, 0)
    return state[0], state[1]


def _mask_to_set(mask: int) -> frozenset[int]:
    out = set()
    while mask:
        out.add((mask & -mask).bit_length() - 1)
        mask &= mask - 1
    return frozenset(out)


def independence_number(graph: DirectedGraph, mode: str = "exact") -> tuple[int, frozenset[int]]:
    """Largest orientation-blind independent set, self-loops ignored.

    `mode="greedy"` returns a lower bound for graphs beyond the exact cap.
    """
    masks = graph.undirected_masks
    if mode == "greedy":
        mask = _greedy_independent_set(masks, np.ones(graph.K))
        return bin(mask).count("1"), _mask_to_set(mask)
    if mode != "exact":
        raise ArgumentError(f"unknown mode {mode!r}")
    if graph.K > EXACT_INDEPENDENCE_LIMIT:
        raise CapabilityError(
            f"exact independence number capped at K={EXACT_INDEPENDENCE_LIMIT}; "
            "use mode='greedy' for a lower bound"
        )
    value, mask = _max_weight_independent_set(masks, np.ones(graph.K))
    return int(round(value)), _mask_to_set(mask)


def weighted_independence_number(
    graph: DirectedGraph, weights: VertexWeights, mode: str = "exact"
) -> tuple[float, frozenset[int]]:
    """Maximum total weight over orientation-blind independent sets."""
    w = np.asarray(weights.w if isinstance(weights, VertexWeights) else weights, dtype=float)
    if w.shape != (graph.K,):
        raise ArgumentError("weight vector length must equal K")
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise ArgumentError("weights must be finite and strictly positive")
    masks = graph.undirected_masks
    if mode == "greedy":
        mask = _greedy_independent_set(masks, w)
        return float(sum(w[i] for i in _mask_to_set(mask))), _mask_to_set(mask)
    if mode != "exact":
        raise ArgumentError(f"unknown mode {mode!r}")
    if graph.K > EXACT_WEIGHTED_INDEPENDENCE_LIMIT:
        raise CapabilityError(
            f"exact weighted independence capped at K={EXACT_WEIGHTED_INDEPENDENCE_LIMIT}; "
            "use mode='greedy' for a lower bound"
        )
    value, mask = _max_weight_independent_set(masks, w)
    return float(value), _mask_to_set(mask)


# ---------------------------------------------------------------------------
# (Weighted) weak domination via set cover
# ---------------------------------------------------------------------------


def _cover_masks(graph: DirectedGraph, weak: np.ndarray) -> tuple[int, list[int]]:
    """Universe mask of weakly observable vertices and per-vertex cover masks.

    Vertex j covers a weakly observable vertex w when j == w (w joins the
    dominating set) or (j, w) is an edge.
    """
    universe = 0
    for v in np.flatnonzero(weak):
        universe |= 1 << int(v)
    covers = []
    for j in range(graph.K):
        c = graph.out_masks[j] & universe
        if weak[j]:
            c |= 1 << j
        covers.append(c)
    return universe, covers


def _greedy_set_cover(universe: int, covers: list[int], weights: np.ndarray) -> int:
    chosen = 0
    uncovered = universe
    while uncovered:
        best_j, best_score = -1, math.inf
        for j, c in enumerate(covers):
            gain = bin(c & uncovered).count("1")
            if gain == 0:
                continue
            score = weights[j] / gain
            if score < best_score - 1e-15:  # ties broken by lowest index
                best_j, best_score = j, score
        if best_j < 0:
            raise DomainError("weak domination undefined for non-observable graph")
        chosen |= 1 << best_j
        uncovered &= ~covers[best_j]
    return chosen


def _exact_set_cover(universe: int, covers: list[int], weights: np.ndarray) -> int:
    """Branch-and-bound on the least-covered uncovered element."""
    greedy = _greedy_set_cover(universe, covers, weights)
    best_w = float(sum(weights[j] for j in _mask_to_set(greedy)))
    state = [best_w, greedy]
    coverers_of = {}
    u = universe
    while u:
        e = (u & -u).bit_length() - 1
        coverers_of[e] = [j for j, c in enumerate(covers) if c >> e & 1]
        u &= u - 1

    def lower_bound(uncovered: int) -> float:
        lb = 0.0
        while uncovered:
            e = (uncovered & -uncovered).bit_length() - 1
            lb = max(lb, min(weights[j] for j in coverers_of[e]))
            uncovered &= uncovered - 1
        return lb

    def dfs(uncovered: int, cur_w: float, cur_mask: int):
        if uncovered == 0:
            if cur_w < state[0]:
                state[0], state[1] = cur_w, cur_mask
            return
        if cur_w + lower_bound(uncovered) >= state[0]:
            return
        # branch on the element with fewest coverers
        pick, pick_n = -1, math.inf
        u = uncovered
        while u:
            e = (u & -u).bit_length() - 1
            n = sum(1 for j in coverers_of[e] if covers[j] & uncovered)
            if n < pick_n:
                pick, pick_n = e, n
            u &= u - 1
        for j in sorted(coverers_of[pick], key=lambda j: weights[j]):
            dfs(uncovered & ~covers[j], cur_w + weights[j], cur_mask | (1 << j))

    dfs(universe, 0.0, 0)
    return state[1]


def _weak_domination_impl(
    graph: DirectedGraph, weights: np.ndarray, mode: str
) -> tuple[float, frozenset[int]]:
    cls = classify(graph)
    if not cls.is_observable:
        raise DomainError("weak domination undefined for non-observable graph")
    weak = cls.observable & ~cls.strongly_observable
    if not weak.any():
        return 0.0, frozenset()
    universe, covers = _cover_masks(graph, weak)
    if mode == "greedy":
        mask = _greedy_set_cover(universe, covers, weights)
    elif mode == "exact":
        if graph.K > EXACT_DOMINATION_LIMIT:
            raise CapabilityError(
                f"exact weak domination capped at K={EXACT_DOMINATION_LIMIT}; use mode='greedy'"
            )
        mask = _exact_set_cover(universe, covers, weights)
    else:
        raise ArgumentError(f"unknown mode {mode!r}")
    witness = _mask_to_set(mask)
    return float(sum(weights[j] for j in witness)), witness


def weak_domination(graph: DirectedGraph, mode: str = "exact") -> tuple[int, frozenset[int]]:
    """Smallest set whose out-edges dominate every weakly observable vertex outside it."""
    value, witness = _weak_domination_impl(graph, np.ones(graph.K), mode)
    return int(round(value)), witness


def weighted_weak_domination(
    graph: DirectedGraph, weights: VertexWeights, mode: str = "exact"
) -> tuple[float, frozenset[int]]:
    """Minimum total weight over weakly dominating sets.

    Weights may contain +inf for vertices that must never be picked; a
    strictly positive finite weight is required elsewhere.
    """
    w = np.asarray(weights.w if isinstance(weights, VertexWeights) else weights, dtype=float)
    if w.shape != (graph.K,):
        raise ArgumentError("weight vector length must equal K")
    if np.any(np.nan_to_num(w, posinf=1.0) <= 0) or np.any(np.isnan(w)):
        raise ArgumentError("weights must be strictly positive (inf allowed)")
    return _weak_domination_impl(graph, w, mode)


# ---------------------------------------------------------------------------
# Weights derived from a stochastic feedback graph
# ---------------------------------------------------------------------------


def derive_weights(stoch_graph) -> tuple[np.ndarray, np.ndarray, float]:
    """Inverse worst-case incident edge probabilities and self-observability.

    Returns (w_minus, w_plus, sigma): w_minus[i] = 1 / min incoming support
    probability of i, w_plus[i] = 1 / min outgoing; entries are NaN where the
    corresponding neighborhood in the support is empty.  sigma sums 1/p(i,i)
    over vertices with a self-loop in the support.
    """
    p = np.asarray(stoch_graph.p, dtype=float)
    K = p.shape[0]
    w_minus = np.full(K, np.nan)
    w_plus = np.full(K, np.nan)
    for i in range(K):
        incoming = p[:, i][p[:, i] > 0]
        outgoing = p[i, :][p[i, :] > 0]
        if incoming.size:
            w_minus[i] = 1.0 / incoming.min()
        if outgoing.size:
            w_plus[i] = 1.0 / outgoing.min()
    diag = np.diag(p)
    sigma = float(np.sum(1.0 / diag[diag > 0]))
    return w_minus, w_plus, sigma
