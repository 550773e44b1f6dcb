"""Adversaries, per-round graph realization, feedback, and hard instances.

Loss tables are materialized up front (T x K) so the adversary is oblivious
by construction.  Randomness is organized around one master seed split into
independent substreams (graph realizations, loss sampling, learner) so the
learner's own draws never perturb the environment.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ArgumentError, DomainError, ProtocolError
from .graphs import DirectedGraph, classify, independence_number, weak_domination
from .stochastic import StochasticFeedbackGraph

logger = logging.getLogger(__name__)

LOSS_TABLE_MEMORY_CAP_BYTES = 1 << 29  # 512 MiB of float64 losses

LOCAL = "local"
FULL_GRAPH = "full_graph"


def split_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
    """(realization, loss, learner) generators from one master seed."""
    children = np.random.SeedSequence(seed).spawn(3)
    return tuple(np.random.default_rng(c) for c in children)


def validate_loss_table(losses: np.ndarray) -> np.ndarray:
    losses = np.asarray(losses, dtype=float)
    if losses.ndim != 2:
        raise ArgumentError("loss table must be T x K")
    if losses.size and (losses.min() < 0 or losses.max() > 1):
        raise ArgumentError("losses must lie in [0, 1]")
    if losses.nbytes > LOSS_TABLE_MEMORY_CAP_BYTES:
        raise ArgumentError(
            f"loss table of {losses.nbytes} bytes exceeds the materialization cap; "
            "reduce T*K or raise LOSS_TABLE_MEMORY_CAP_BYTES"
        )
    return losses


@dataclass(frozen=True)
class FeedbackEvent:
    """What the learner sees after one round."""

    t: int
    played: int
    observations: tuple[tuple[int, float], ...]
    realized_row: np.ndarray  # out-edges of the played action in G_t
    realized: Optional[np.ndarray] = None  # full K x K realization, full-graph mode only

    @property
    def realized_graph(self) -> Optional[DirectedGraph]:
        if self.realized is None:
            return None
        return DirectedGraph.from_adjacency(self.realized)

    @property
    def observed_actions(self) -> tuple[int, ...]:
        return tuple(i for i, _ in self.observations)


def sample_realization(graph: StochasticFeedbackGraph, rng: np.random.Generator) -> DirectedGraph:
    """One draw of the feedback graph: each pair independently with its probability."""
    return DirectedGraph.from_adjacency(rng.random(graph.p.shape) < graph.p)


def make_feedback(
    realized_graph: DirectedGraph, played: int, losses_row: np.ndarray, mode: str = LOCAL, t: int = 0
) -> FeedbackEvent:
    """Observations are exactly the realized out-neighborhood of the played action."""
    if not 0 <= played < realized_graph.K:
        raise ArgumentError(f"action {played} out of range")
    row = realized_graph.adjacency[played]
    obs = tuple((int(i), float(losses_row[i])) for i in np.flatnonzero(row))
    realized = realized_graph.adjacency if mode == FULL_GRAPH else None
    return FeedbackEvent(t=t, played=played, observations=obs, realized_row=row, realized=realized)


class Environment:
    """Sequential protocol: play an action, draw G_t, return the feedback.

    In "local" mode only the realized out-neighborhood of the played action is
    reported; in "full_graph" mode the whole realization is attached too.
    One mutable rng stream per environment; parallel replicas must use
    disjoint substreams.
    """

    def __init__(
        self,
        graph: StochasticFeedbackGraph,
        losses: np.ndarray,
        mode: str = LOCAL,
        rng: Optional[np.random.Generator] = None,
    ):
        if mode not in (LOCAL, FULL_GRAPH):
            raise ArgumentError(f"unknown feedback mode {mode!r}")
        self.graph = graph
        self.losses = validate_loss_table(losses)
        if self.losses.shape[1] != graph.K:
            raise ArgumentError("loss table width must equal the number of actions")
        self.mode = mode
        self.rng = rng if rng is not None else np.random.default_rng()
        self.t = 0

    @property
    def K(self) -> int:
        return self.graph.K

    @property
    def horizon(self) -> int:
        return self.losses.shape[0]

    def step(self, action: int) -> FeedbackEvent:
        if self.t >= self.horizon:
            raise ProtocolError("environment horizon exhausted")
        if not 0 <= action < self.K:
            raise ArgumentError(f"action {action} out of range")
        t = self.t
        if self.mode == FULL_GRAPH:
            realized = self.rng.random((self.K, self.K)) < self.graph.p
            row = realized[action]
        else:
            realized = None
            row = self.rng.random(self.K) < self.graph.p[action]
        obs = tuple((int(i), float(self.losses[t, i])) for i in np.flatnonzero(row))
        self.t += 1
        return FeedbackEvent(t=t, played=action, observations=obs, realized_row=row, realized=realized)

    def step_batch(self, actions: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Play a fixed action sequence in one rng draw (local mode only).

        Returns (realized out-rows, observed losses with unobserved entries
        zeroed, incurred losses).  The zeroed matrix carries exactly the
        information of the per-round observation sets; consumers must treat
        the rows as the observation indicators.
        """
        if self.mode != LOCAL:
            raise ProtocolError("step_batch is only available in local feedback mode")
        actions = np.asarray(actions, dtype=int)
        n = actions.shape[0]
        if self.t + n > self.horizon:
            raise ProtocolError("environment horizon exhausted")
        rows = self.rng.random((n, self.K)) < self.graph.p[actions]
        block = self.losses[self.t : self.t + n, :]
        observed = np.where(rows, block, 0.0)
        incurred = block[np.arange(n), actions]
        self.t += n
        return rows, observed, incurred


# ---------------------------------------------------------------------------
# Hard instances
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HardInstanceSpec:
    kind: str  # strong_c1 | strong_c2 | weak_c3 | weak_c4
    K: int
    eps: float
    T: int
    beta: float
    hidden_index: int  # Z: action index, or +1/-1 encoded as 0/1 for sign constructions
    hidden_sign: int  # +1/-1 for sign constructions, 0 otherwise
    target_set: tuple[int, ...]  # actions carrying non-constant losses
    achieved_m: int = 0  # weak_c3 only: realized independent-set size
    seed: Optional[int] = None


def _clamp_beta(beta: float, kind: str) -> float:
    clamped = min(max(beta, 0.0), 0.25)
    if clamped != beta:
        logger.warning("%s: gap %.3g clamped to %.3g", kind, beta, clamped)
    return clamped


def beta_strong_c1(alpha: int, eps: float, T: int) -> float:
    return (1.0 / 33.0) * math.sqrt(alpha / (2.0 * math.log(4.0 / 3.0) * eps * T))


def beta_strong_c2(eps: float, T: int) -> float:
    return 0.25 / math.sqrt(2.0 * eps * T)


def beta_weak_c3(m: int, eps: float, T: int, K: int) -> float:
    return m ** (1.0 / 3.0) * (32.0 * eps * T * math.log(K)) ** (-1.0 / 3.0)


def beta_weak_c4(eps: float, T: int) -> float:
    return (eps * T) ** (-1.0 / 3.0) / (2.0 * math.sqrt(2.0))


def _check_eps(eps: float):
    if not 0 < eps <= 1:
        raise ArgumentError(f"edge probability must lie in (0, 1], got {eps}")


def gen_hard_strong_c1(
    graph: DirectedGraph, eps: float, T: int, rng: np.random.Generator, seed: Optional[int] = None
) -> tuple[StochasticFeedbackGraph, np.ndarray, HardInstanceSpec]:
    """Strongly observable hard instance built on a given graph.

    Self-loops are added (this only helps the learner), every support edge
    realizes with probability eps, and one action of a maximum independent
    set carries a slightly smaller Bernoulli mean.
    """
    _check_eps(eps)
    alpha, witness = independence_number(graph)
    if alpha <= 1:
        raise ArgumentError("construction requires independence number > 1")
    if T < 0.0064 * alpha**3 / eps:
        logger.warning("horizon %d below the regime bound 0.0064*alpha^3/eps", T)
    indep = sorted(witness)
    beta = _clamp_beta(beta_strong_c1(alpha, eps, T), "strong_c1")
    z = int(rng.choice(indep))

    p = np.zeros((graph.K, graph.K))
    for i, j in graph.edges:
        p[i, j] = eps
    np.fill_diagonal(p, eps)

    losses = np.ones((T, graph.K))
    for j in indep:
        mean = 0.5 - beta if j == z else 0.5
        losses[:, j] = rng.random(T) < mean  # Bernoulli(mean) losses
    losses = validate_loss_table(losses)
    spec = HardInstanceSpec(
        kind="strong_c1", K=graph.K, eps=eps, T=T, beta=beta, hidden_index=z,
        hidden_sign=0, target_set=tuple(indep), seed=seed,
    )
    return StochasticFeedbackGraph(p), losses, spec


def gen_hard_strong_c2(
    eps: float, T: int, K: int, rng: np.random.Generator, seed: Optional[int] = None
) -> tuple[StochasticFeedbackGraph, np.ndarray, HardInstanceSpec]:
    """Complete graph at probability eps; action 0 is better or worse by a hidden sign."""
    _check_eps(eps)
    if K < 2:
        raise ArgumentError("need at least two actions")
    if T < 1.0 / (2.0 * eps):
        logger.warning("horizon %d below the regime bound 1/(2*eps)", T)
    beta = _clamp_beta(beta_strong_c2(eps, T), "strong_c2")
    sign = 1 if rng.random() < 0.5 else -1
    p = np.full((K, K), eps)
    losses = (rng.random((T, K)) < 0.5).astype(float)
    losses[:, 0] = rng.random(T) < (0.5 - beta * sign)
    losses = validate_loss_table(losses)
    spec = HardInstanceSpec(
        kind="strong_c2", K=K, eps=eps, T=T, beta=beta, hidden_index=0,
        hidden_sign=sign, target_set=(0,), seed=seed,
    )
    return StochasticFeedbackGraph(p), losses, spec


def _greedy_sparse_independent_set(graph: DirectedGraph, weak_vertices: np.ndarray) -> list[int]:
    """Independent subset of the weakly observable vertices, each dominator capped.

    Repeatedly take the lowest-index available vertex, drop its orientation-
    blind neighbors, and once any vertex dominates more than ln K picked
    vertices drop everything else it dominates.
    """
    K = graph.K
    cap = math.log(K)
    available = set(int(v) for v in weak_vertices)
    dominate_count = [0] * K
    picked: list[int] = []
    while available:
        u = min(available)
        picked.append(u)
        available.discard(u)
        for v in list(available):
            if graph.undirected_masks[u] >> v & 1:
                available.discard(v)
        for j in range(K):
            if graph.in_masks[u] >> j & 1:
                dominate_count[j] += 1
                if dominate_count[j] > cap:
                    for v in list(available):
                        if graph.out_masks[j] >> v & 1:
                            available.discard(v)
    return picked


def gen_hard_weak_c3(
    graph: DirectedGraph, eps: float, T: int, rng: np.random.Generator, seed: Optional[int] = None
) -> tuple[StochasticFeedbackGraph, np.ndarray, HardInstanceSpec]:
    """Weakly observable hard instance: the gap hides on a sparse independent set."""
    _check_eps(eps)
    cls = classify(graph)
    if cls.is_strongly_observable or not cls.is_observable:
        raise DomainError("construction requires a weakly observable graph")
    K = graph.K
    delta, _ = weak_domination(graph)
    if delta < 100 * math.log(K):
        logger.warning("weak domination number %d below the recommended 100*ln(K)", delta)
    if T < 2 * K / (eps * math.log(K)):
        logger.warning("horizon %d below the regime bound 2K/(eps*ln K)", T)
    target = _greedy_sparse_independent_set(graph, cls.weakly_observable_vertices)
    m = len(target)
    floor = delta / (50.0 * math.log(K)) if K > 1 else 0.0
    if m < floor:
        logger.warning("achieved independent set size %d below delta/(50 ln K)=%.2f", m, floor)
    beta = _clamp_beta(beta_weak_c3(m, eps, T, K), "weak_c3")
    z = int(rng.choice(target))

    p = np.zeros((K, K))
    for i, j in graph.edges:
        p[i, j] = eps

    losses = np.ones((T, K))
    for j in target:
        mean = 0.5 - beta if j == z else 0.5
        losses[:, j] = rng.random(T) < mean
    losses = validate_loss_table(losses)
    spec = HardInstanceSpec(
        kind="weak_c3", K=K, eps=eps, T=T, beta=beta, hidden_index=z,
        hidden_sign=0, target_set=tuple(target), achieved_m=m, seed=seed,
    )
    return StochasticFeedbackGraph(p), losses, spec


#: Smallest weakly observable graph: vertex 0 has no self-loop and is seen
#: only from vertex 2; vertices 1 and 2 observe themselves.
CANONICAL_WEAK_GRAPH = DirectedGraph.from_edges(3, [(1, 1), (2, 2), (2, 0)])


def gen_hard_weak_c4(
    eps: float, T: int, rng: np.random.Generator, seed: Optional[int] = None
) -> tuple[StochasticFeedbackGraph, np.ndarray, HardInstanceSpec]:
    """Three-action weakly observable instance with a hidden sign on action 0."""
    _check_eps(eps)
    if T < 2.0 * math.sqrt(2.0) / eps:
        logger.warning("horizon %d below the regime bound 2*sqrt(2)/eps", T)
    beta = _clamp_beta(beta_weak_c4(eps, T), "weak_c4")
    sign = 1 if rng.random() < 0.5 else -1
    graph = CANONICAL_WEAK_GRAPH
    p = np.zeros((3, 3))
    for i, j in graph.edges:
        p[i, j] = eps
    losses = np.ones((T, 3))
    losses[:, 0] = rng.random(T) < (0.5 - beta * sign)
    losses[:, 1] = rng.random(T) < 0.5
    losses = validate_loss_table(losses)
    spec = HardInstanceSpec(
        kind="weak_c4", K=3, eps=eps, T=T, beta=beta, hidden_index=0,
        hidden_sign=sign, target_set=(0, 1), seed=seed,
    )
    return StochasticFeedbackGraph(p), losses, spec


def loss_table_digest(losses: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(losses).tobytes()).hexdigest()


def dump_instance(
    graph: StochasticFeedbackGraph,
    losses: np.ndarray,
    spec: Optional[HardInstanceSpec] = None,
    include_losses: bool = False,
) -> dict:
    """JSON-serializable record sufficient to replay the instance exactly."""
    out = {
        "K": graph.K,
        "p": graph.p.tolist(),
        "T": int(losses.shape[0]),
        "loss_digest": loss_table_digest(losses),
    }
    if include_losses:
        out["losses"] = losses.tolist()
    if spec is not None:
        out["hard_instance"] = {
            "kind": spec.kind,
            "eps": spec.eps,
            "beta": spec.beta,
            "hidden_index": spec.hidden_index,
            "hidden_sign": spec.hidden_sign,
            "target_set": list(spec.target_set),
            "achieved_m": spec.achieved_m,
            "seed": spec.seed,
        }
    return out
