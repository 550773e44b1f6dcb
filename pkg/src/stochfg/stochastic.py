"""Stochastic feedback graphs: thresholding, supports, and optimal thresholds.

A stochastic feedback graph is a K x K matrix of independent per-round edge
realization probabilities.  Thresholding at eps zeroes entries below eps; the
support of the thresholded matrix is a deterministic feedback graph whose
combinatorial parameters drive the achievable regret rates.  The optimizers
below scan the (at most K^2) candidate thresholds where the support changes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Union

import numpy as np

from .errors import ArgumentError
from .graphs import (
    DirectedGraph,
    GraphClass,
    classify,
    derive_weights,
    independence_number,
    weak_domination,
    weighted_weak_domination,
)


class _NotAchievable:
    """Singleton: no threshold yields the required observability regime."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "NotAchievable"

    def __bool__(self):
        return False


NOT_ACHIEVABLE = _NotAchievable()


@dataclass(frozen=True)
class StochasticFeedbackGraph:
    """K x K matrix of edge realization probabilities in [0, 1]."""

    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.ndim != 2 or p.shape[0] != p.shape[1] or p.shape[0] < 1:
            raise ArgumentError("probability matrix must be square and nonempty")
        if np.any(p < 0) or np.any(p > 1) or not np.all(np.isfinite(p)):
            raise ArgumentError("probabilities must lie in [0, 1]")
        p = p.copy()
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def K(self) -> int:
        return self.p.shape[0]

    @classmethod
    def erdos_renyi(cls, K: int, eps: float) -> "StochasticFeedbackGraph":
        """All K^2 ordered pairs (self-loops included) at probability eps."""
        return cls(np.full((K, K), float(eps)))

    @classmethod
    def faulty_bandits(cls, eps: np.ndarray | list) -> "StochasticFeedbackGraph":
        """Self-loop i realizes with probability eps[i]; no cross edges."""
        return cls(np.diag(np.asarray(eps, dtype=float)))

    @classmethod
    def revealing_action(cls, K: int, center_prob: float, center: int = 0) -> "StochasticFeedbackGraph":
        """One vertex whose out-edges (self-loop included) reveal every loss."""
        p = np.zeros((K, K))
        p[center, :] = center_prob
        return cls(p)

    def __repr__(self):
        return f"StochasticFeedbackGraph(K={self.K})"


def threshold(graph: StochasticFeedbackGraph, eps: float) -> StochasticFeedbackGraph:
    """Zero out entries below eps; entries >= eps are kept exactly."""
    if not eps > 0:
        raise ArgumentError(f"threshold must be positive, got {eps}")
    p = graph.p.copy()
    p[p < eps] = 0.0
    return StochasticFeedbackGraph(p)


def support(graph: StochasticFeedbackGraph) -> DirectedGraph:
    """Directed graph of strictly positive entries."""
    return DirectedGraph.from_adjacency(graph.p > 0)


def candidate_thresholds(graph: StochasticFeedbackGraph) -> np.ndarray:
    """Sorted distinct positive entries; the support only changes at these."""
    vals = np.unique(graph.p[graph.p > 0])
    return vals


class OptimalThreshold(NamedTuple):
    eps: float
    value: float


class DeltaSigmaThreshold(NamedTuple):
    eps: float
    delta_w: float
    sigma: float


ThresholdResult = Union[OptimalThreshold, _NotAchievable]


def _scan_descending(graph: StochasticFeedbackGraph):
    """Yield (eps, support) for candidate thresholds from largest to smallest."""
    for eps in candidate_thresholds(graph)[::-1]:
        yield float(eps), DirectedGraph.from_adjacency(graph.p >= eps)


def optimal_threshold_strong(graph: StochasticFeedbackGraph) -> ThresholdResult:
    """Minimize (independence number / eps) over strongly observable supports.

    Ties break toward the largest eps.  Returns NOT_ACHIEVABLE when no
    candidate threshold has a strongly observable support.
    """
    best = None
    best_ratio = math.inf
    for eps, supp in _scan_descending(graph):
        if classify(supp).graph_class is not GraphClass.STRONGLY_OBSERVABLE:
            continue
        alpha, _ = independence_number(supp)
        ratio = alpha / eps
        if ratio < best_ratio - 1e-12:
            best = OptimalThreshold(eps, float(alpha))
            best_ratio = ratio
    if best is None:
        return NOT_ACHIEVABLE
    return best


def optimal_threshold_weak(graph: StochasticFeedbackGraph) -> ThresholdResult:
    """Minimize (weak domination number / eps) over observable supports."""
    best = None
    best_ratio = math.inf
    for eps, supp in _scan_descending(graph):
        if not classify(supp).is_observable:
            continue
        delta, _ = weak_domination(supp)
        ratio = delta / eps
        if ratio < best_ratio - 1e-12:
            best = OptimalThreshold(eps, float(delta))
            best_ratio = ratio
    if best is None:
        return NOT_ACHIEVABLE
    return best


def optimal_threshold_delta_sigma(
    graph: StochasticFeedbackGraph, T: int
) -> Union[DeltaSigmaThreshold, _NotAchievable]:
    """Minimize the commit-phase objective over observable thresholded supports.

    Objective: (delta_w * ln(3 K^2 T^2))^(1/3) * T^(2/3)
               + sqrt(sigma * T * ln(3 K^2 T^2)).
    """
    if T < 2:
        raise ArgumentError("horizon must be at least 2")
    K = graph.K
    log_term = math.log(3 * K * K * T * T)
    best = None
    best_obj = math.inf
    for eps, supp in _scan_descending(graph):
        if not classify(supp).is_observable:
            continue
        thr = threshold(graph, eps)
        _, w_plus, sigma = derive_weights(thr)
        weights = np.where(np.isnan(w_plus), np.inf, w_plus)
        delta_w, _ = weighted_weak_domination(supp, weights)
        obj = (delta_w * log_term) ** (1.0 / 3.0) * T ** (2.0 / 3.0) + math.sqrt(
            sigma * T * log_term
        )
        if obj < best_obj - 1e-12:
            best = DeltaSigmaThreshold(eps, float(delta_w), float(sigma))
            best_obj = obj
    if best is None:
        return NOT_ACHIEVABLE
    return best


def is_eps_good_approx(
    estimate: StochasticFeedbackGraph, truth: StochasticFeedbackGraph, eps: float
) -> tuple[bool, dict[str, list[tuple[int, int]]]]:
    """Three-condition closeness check of an estimated stochastic graph.

    1. every true edge with p >= 2*eps is in the estimate's support;
    2. every estimate-support edge with true p >= eps/2 satisfies
       |p_hat - p| <= p/2;
    3. no edge with true p < eps/2 is in the estimate's support.
    """
    if estimate.K != truth.K:
        raise ArgumentError("estimate and truth must have the same vertex count")
    p_hat, p = estimate.p, truth.p
    est_supp = p_hat > 0
    missing = (p >= 2 * eps) & ~est_supp
    bad = est_supp & (p >= eps / 2) & (np.abs(p_hat - p) > p / 2)
    spurious = est_supp & (p < eps / 2)

    def edge_list(mask: np.ndarray) -> list[tuple[int, int]]:
        return [(int(i), int(j)) for i, j in zip(*np.nonzero(mask))]

    violations = {
        "missing_large": edge_list(missing),
        "badly_estimated": edge_list(bad),
        "spurious_small": edge_list(spurious),
    }
    ok = not (missing.any() or bad.any() or spurious.any())
    return ok, violations


@dataclass(frozen=True)
class GraphEstimate:
    """Empirical edge-frequency estimate after `rounds` observations per pair."""

    K: int
    counts: np.ndarray  # observation counts per ordered pair
    rounds: int
    eps_threshold: float

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.shape != (self.K, self.K):
            raise ArgumentError("counts must be a K x K matrix")
        if self.rounds < 1:
            raise ArgumentError("rounds must be positive")
        if counts.min() < 0 or counts.max() > self.rounds:
            raise ArgumentError("counts must lie in [0, rounds]")
        counts = counts.copy()
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @cached_property
    def p_hat(self) -> np.ndarray:
        p = self.counts / self.rounds
        p.setflags(write=False)
        return p

    @cached_property
    def thresholded(self) -> StochasticFeedbackGraph:
        """Estimated stochastic graph with sub-threshold entries zeroed."""
        p = np.where(self.p_hat >= self.eps_threshold, self.p_hat, 0.0)
        return StochasticFeedbackGraph(p)

    @property
    def support(self) -> DirectedGraph:
        return support(self.thresholded)
