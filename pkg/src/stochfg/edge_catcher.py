"""Explore-then-commit learning from local stochastic-graph feedback.

Pipeline: a round-robin sweep estimates every edge probability while a
stopping function compares the best committed regret bound against the
exploration cost already paid; on stopping, the learner commits to the
thresholded estimate and runs an exponential-weights policy over blocks long
enough that every committed edge realizes at least once per block with high
probability.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .environment import Environment, FeedbackEvent, LOCAL
from .errors import ArgumentError, ConfigurationError, ProtocolError
from .exp_weights import Exp3GPolicy, ScheduleLike, STRONG, WEAK
from .graphs import (
    DirectedGraph,
    GraphClass,
    classify,
    independence_number,
    weak_domination,
)
from .stochastic import (
    GraphEstimate,
    NOT_ACHIEVABLE,
    OptimalThreshold,
    StochasticFeedbackGraph,
    candidate_thresholds,
    support,
)
from .traces import (
    PHASE_ARBITRARY,
    PHASE_COMMITTED,
    PHASE_ESTIMATION,
    PHASE_FALLBACK,
    PHASE_SINGLE,
    RegretTrace,
)

logger = logging.getLogger(__name__)

C_STRONG = 12.0 + 2.0 * math.sqrt(2.0)
C_WEAK = 8.0
EPS_TAU_COEFF = 60.0


class _Unobserved:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "Unobserved"


UNOBSERVED = _Unobserved()


# ---------------------------------------------------------------------------
# Stopping function
# ---------------------------------------------------------------------------

_PARAM_CACHE: dict[tuple[int, int], tuple[GraphClass, Optional[int], Optional[int]]] = {}
_PARAM_CACHE_MAX = 200_000


def _support_key(mask: np.ndarray) -> tuple[int, int]:
    K = mask.shape[0]
    return K, int.from_bytes(np.packbits(mask.ravel()).tobytes(), "big")


def _support_params(mask: np.ndarray) -> tuple[GraphClass, Optional[int], Optional[int]]:
    """(class, alpha, delta) of a boolean adjacency pattern, memoized.

    alpha is filled only for strongly observable supports, delta only for
    observable ones; greedy values stand in beyond the exact caps.
    """
    key = _support_key(mask)
    hit = _PARAM_CACHE.get(key)
    if hit is not None:
        return hit
    g = DirectedGraph.from_adjacency(mask)
    cls = classify(g).graph_class
    alpha = delta = None
    if cls is GraphClass.STRONGLY_OBSERVABLE:
        mode = "exact" if g.K <= 32 else "greedy"
        alpha = independence_number(g, mode=mode)[0]
    if cls is not GraphClass.NON_OBSERVABLE:
        mode = "exact" if g.K <= 20 else "greedy"
        delta = weak_domination(g, mode=mode)[0]
    if len(_PARAM_CACHE) < _PARAM_CACHE_MAX:
        _PARAM_CACHE[key] = (cls, alpha, delta)
    return cls, alpha, delta


@dataclass(frozen=True)
class PhiReport:
    value: float
    strong_value: float
    weak_value: float
    strong: object  # OptimalThreshold or NOT_ACHIEVABLE
    weak: object


def phi_components(est: StochasticFeedbackGraph, T: int) -> PhiReport:
    """Both branch values of the stopping function on an estimated graph."""
    K = est.K
    if T < 2 or K < 2:
        raise ConfigurationError("stopping function requires K >= 2 and T >= 2")
    log_kt = math.log(K * T)
    best_strong = None
    best_strong_ratio = math.inf
    best_weak = None
    best_weak_ratio = math.inf
    for eps in candidate_thresholds(est)[::-1]:
        eps = float(eps)
        mask = est.p >= eps
        cls, alpha, delta = _support_params(mask)
        if cls is GraphClass.STRONGLY_OBSERVABLE:
            ratio = alpha / eps
            if ratio < best_strong_ratio - 1e-12:
                best_strong = OptimalThreshold(eps, float(alpha))
                best_strong_ratio = ratio
        if cls is not GraphClass.NON_OBSERVABLE:
            ratio = delta / eps
            if ratio < best_weak_ratio - 1e-12:
                best_weak = OptimalThreshold(eps, float(delta))
                best_weak_ratio = ratio
    strong_value = (
        math.inf
        if best_strong is None
        else 4.0 * C_STRONG * math.sqrt(best_strong_ratio * T) * log_kt**1.5
    )
    weak_value = (
        math.inf
        if best_weak is None
        else 4.0 * C_WEAK * (best_weak_ratio * log_kt**2) ** (1.0 / 3.0) * T ** (2.0 / 3.0)
    )
    return PhiReport(
        value=min(strong_value, weak_value),
        strong_value=strong_value,
        weak_value=weak_value,
        strong=best_strong if best_strong is not None else NOT_ACHIEVABLE,
        weak=best_weak if best_weak is not None else NOT_ACHIEVABLE,
    )


def phi(est: StochasticFeedbackGraph, T: int, scale: float = 1.0) -> float:
    """Best committed regret bound achievable on `est`; +inf when unobservable."""
    return scale * phi_components(est, T).value


# ---------------------------------------------------------------------------
# Round-robin estimation
# ---------------------------------------------------------------------------


@dataclass
class RoundRobinOutput:
    estimate: GraphEstimate
    eps_hat: float
    tau_hat: int
    rounds_consumed: int
    stop_reason: str  # "phi_triggered" | "budget_exhausted"
    phi_value: float
    actions: np.ndarray
    losses: np.ndarray
    sweep_rows: Optional[np.ndarray] = None  # (tau_hat, K, K) realized counts per sweep


def eps_tau(tau: int, K: int, T: int) -> float:
    return EPS_TAU_COEFF * math.log(K * T) / tau


def round_robin(
    env: Environment,
    T: int,
    phi_fn: Optional[Callable[[StochasticFeedbackGraph, int], float]],
    K: Optional[int] = None,
    *,
    phi_check: str = "every",
    record_history: bool = False,
) -> RoundRobinOutput:
    """Sweep actions in fixed order, estimating edge probabilities online.

    After sweep tau the estimate is thresholded at eps_tau and the stopping
    function (if any) is compared against the rounds already spent.  With
    `phi_check="pow2"` the stopping condition is only evaluated when tau is a
    power of two.
    """
    K = env.K if K is None else K
    if K > T:
        raise ArgumentError(f"horizon {T} shorter than one sweep of {K} actions")
    if phi_check not in ("every", "pow2"):
        raise ArgumentError(f"unknown phi_check mode {phi_check!r}")
    tau_max = T // K
    counts = np.zeros((K, K), dtype=np.int64)
    sweep_actions = np.arange(K)
    all_losses = np.empty(tau_max * K)
    history = [] if record_history else None

    stop_reason = "budget_exhausted"
    phi_value = math.inf
    tau_hat = tau_max
    for tau in range(1, tau_max + 1):
        rows, _, incurred = env.step_batch(sweep_actions)
        counts += rows
        all_losses[(tau - 1) * K : tau * K] = incurred
        if history is not None:
            history.append(rows.astype(np.uint8))
        if phi_fn is None:
            continue
        if phi_check == "pow2" and tau & (tau - 1):
            continue
        est = GraphEstimate(K=K, counts=counts, rounds=tau, eps_threshold=eps_tau(tau, K, T))
        value = phi_fn(est.thresholded, T)
        if value <= tau * K:
            stop_reason = "phi_triggered"
            phi_value = value
            tau_hat = tau
            break

    estimate = GraphEstimate(K=K, counts=counts, rounds=tau_hat, eps_threshold=eps_tau(tau_hat, K, T))
    if stop_reason == "budget_exhausted" and phi_fn is not None:
        phi_value = phi_fn(estimate.thresholded, T)
    rounds = tau_hat * K
    return RoundRobinOutput(
        estimate=estimate,
        eps_hat=estimate.eps_threshold,
        tau_hat=tau_hat,
        rounds_consumed=rounds,
        stop_reason=stop_reason,
        phi_value=phi_value,
        actions=np.tile(sweep_actions, tau_hat),
        losses=all_losses[:rounds].copy(),
        sweep_rows=np.stack(history[:tau_hat]) if history else None,
    )


# ---------------------------------------------------------------------------
# Block reduction
# ---------------------------------------------------------------------------


def block_estimator(
    block_feedback: Sequence[FeedbackEvent], a: int, a_prime: int, delta: int
):
    """Average observed loss of `a_prime` over a block where `a` was played.

    Returns UNOBSERVED when the edge (a, a_prime) never realized in the block.
    """
    if len(block_feedback) != delta:
        raise ProtocolError(f"block has {len(block_feedback)} rounds, expected {delta}")
    total = 0.0
    count = 0
    for ev in block_feedback:
        if ev.played != a:
            raise ProtocolError("block must play a single action")
        if ev.realized_row[a_prime]:
            count += 1
            total += dict(ev.observations)[a_prime]
    if count == 0:
        return UNOBSERVED
    return total / count


@dataclass
class BlockPlan:
    delta: int
    n_blocks: int

    @classmethod
    def for_horizon(cls, T: int, eps: float, K: int) -> "BlockPlan":
        if not 0 < eps <= 1:
            raise ArgumentError(f"threshold must lie in (0, 1], got {eps}")
        delta = math.ceil((2.0 / eps) * math.log(K * T))
        return cls(delta=delta, n_blocks=T // delta)


@dataclass
class BlockRunResult:
    actions: np.ndarray
    losses: np.ndarray
    phases: np.ndarray
    plan: BlockPlan
    unobserved_feeds: int


def block_reduction(
    env: Environment,
    T: int,
    eps: float,
    est: StochasticFeedbackGraph,
    policy: Exp3GPolicy,
    rng: np.random.Generator,
) -> BlockRunResult:
    """Play the policy on the block meta-instance induced by the estimate.

    Each meta-round commits to one action for a whole block and feeds the
    policy the per-block average observed losses of the action's support
    out-neighbors (zero when an edge never realized, which is rare by the
    block-length choice).  Leftover rounds past the last full block replay
    the final committed action.
    """
    K = env.K
    plan = BlockPlan.for_horizon(T, eps, K)
    supp = support(est)
    if supp.K != policy.graph.K or supp.edges != policy.graph.edges:
        raise ConfigurationError("policy graph does not match the committed support")
    actions = np.empty(T, dtype=np.int64)
    losses = np.empty(T)
    phases = np.full(T, PHASE_COMMITTED, dtype=np.int8)
    out_adj = supp.adjacency
    unobserved = 0
    pos = 0
    last_action = 0
    for _ in range(plan.n_blocks):
        pi = policy.distribution()
        a = int(rng.choice(K, p=pi))
        last_action = a
        rows, loss_rows, incurred = env.step_batch(np.full(plan.delta, a))
        actions[pos : pos + plan.delta] = a
        losses[pos : pos + plan.delta] = incurred
        pos += plan.delta
        cnt = rows.sum(axis=0)
        feed = {}
        for a_prime in np.flatnonzero(out_adj[a]):
            a_prime = int(a_prime)
            if cnt[a_prime] == 0:
                unobserved += 1
                feed[a_prime] = 0.0
            else:
                feed[a_prime] = float(loss_rows[:, a_prime].sum() / cnt[a_prime])
        policy.update(a, feed)
    leftover = T - pos
    if leftover:
        fill = last_action if plan.n_blocks else 0
        _, _, incurred = env.step_batch(np.full(leftover, fill))
        actions[pos:] = fill
        losses[pos:] = incurred
        phases[pos:] = PHASE_ARBITRARY
    return BlockRunResult(actions=actions, losses=losses, phases=phases, plan=plan, unobserved_feeds=unobserved)


# ---------------------------------------------------------------------------
# EdgeCatcher
# ---------------------------------------------------------------------------


@dataclass
class EdgeCatcherOptions:
    phi_check: str = "every"  # "every" | "pow2"
    phi_scale: float = 1.0  # scales the stopping function for desk-scale experiments
    strong_gamma: ScheduleLike = None
    strong_eta: ScheduleLike = None
    weak_gamma: ScheduleLike = None
    weak_eta: ScheduleLike = None


def _choose_regime(report: PhiReport) -> Optional[str]:
    """Branch selection with the degenerate-zero-domination corner resolved.

    When the weak branch wins only because the minimizing support is strongly
    observable (domination value zero), the weak policy would run with no
    forced exploration, so the strong branch is preferred whenever available.
    """
    if math.isinf(report.strong_value) and math.isinf(report.weak_value):
        return None
    if report.weak_value < report.strong_value:
        if (
            report.weak is not NOT_ACHIEVABLE
            and report.weak.value == 0
            and not math.isinf(report.strong_value)
        ):
            logger.warning(
                "weak branch is zero on a strongly observable support; committing to the strong regime"
            )
            return STRONG
        return WEAK
    return STRONG


def edge_catcher(
    env: Environment,
    T: int,
    K: Optional[int] = None,
    *,
    rng: Optional[np.random.Generator] = None,
    options: Optional[EdgeCatcherOptions] = None,
) -> RegretTrace:
    """Full explore-then-commit run over exactly T rounds of local feedback."""
    if env.mode != LOCAL:
        raise ConfigurationError("edge_catcher requires local feedback mode")
    K = env.K if K is None else K
    if env.horizon < T:
        raise ArgumentError("environment horizon shorter than T")
    rng = rng if rng is not None else np.random.default_rng()
    options = options or EdgeCatcherOptions()
    loss_table = env.losses[:T].copy()

    if K == 1:
        _, _, incurred = env.step_batch(np.zeros(T, dtype=int))
        return RegretTrace(
            T=T, K=1, actions=np.zeros(T, dtype=np.int64), losses=incurred,
            loss_table=loss_table, phases=np.full(T, PHASE_SINGLE, dtype=np.int8),
            metadata={"algorithm": "edge_catcher", "degenerate_single_action": True},
        )

    phi_fn = lambda est, horizon: phi(est, horizon, scale=options.phi_scale)
    rr = round_robin(env, T, phi_fn, K, phi_check=options.phi_check)

    actions = np.empty(T, dtype=np.int64)
    losses = np.empty(T)
    phases = np.empty(T, dtype=np.int8)
    n_est = rr.rounds_consumed
    actions[:n_est] = rr.actions
    losses[:n_est] = rr.losses
    phases[:n_est] = PHASE_ESTIMATION

    meta = {
        "algorithm": "edge_catcher",
        "tau_hat": rr.tau_hat,
        "eps_hat": rr.eps_hat,
        "stop_reason": rr.stop_reason,
        "phi_at_stop": rr.phi_value,
        "phi_scale": options.phi_scale,
        "regime": None,
        "fallback": False,
    }

    remaining = T - n_est
    if remaining == 0:
        return RegretTrace(T=T, K=K, actions=actions, losses=losses,
                           loss_table=loss_table, phases=phases, metadata=meta)

    est_graph = rr.estimate.thresholded
    report = phi_components(est_graph, remaining) if remaining >= 2 else None
    regime = _choose_regime(report) if report is not None else None

    if regime is None:
        # no observable committed support: sublinear regret is out of reach,
        # play uniformly and flag the run
        meta["fallback"] = True
        fill_actions = rng.integers(0, K, size=remaining)
        _, _, incurred = env.step_batch(fill_actions)
        actions[n_est:] = fill_actions
        losses[n_est:] = incurred
        phases[n_est:] = PHASE_FALLBACK
        return RegretTrace(T=T, K=K, actions=actions, losses=losses,
                           loss_table=loss_table, phases=phases, metadata=meta)

    branch = report.strong if regime == STRONG else report.weak
    eps_star = branch.eps
    committed = StochasticFeedbackGraph(np.where(est_graph.p >= eps_star, est_graph.p, 0.0))
    plan = BlockPlan.for_horizon(remaining, eps_star / 2.0, K)
    supp = support(committed)
    if regime == STRONG:
        policy = Exp3GPolicy(supp, max(plan.n_blocks, 1), STRONG,
                             gamma=options.strong_gamma, eta=options.strong_eta)
    else:
        policy = Exp3GPolicy(supp, max(plan.n_blocks, 1), WEAK,
                             gamma=options.weak_gamma, eta=options.weak_eta)
    result = block_reduction(env, remaining, eps_star / 2.0, committed, policy, rng)
    actions[n_est:] = result.actions
    losses[n_est:] = result.losses
    phases[n_est:] = result.phases

    meta.update(
        regime=regime,
        eps_star=eps_star,
        branch_value=report.strong_value if regime == STRONG else report.weak_value,
        commit_horizon=remaining,  # the horizon the block plan was sized for
        block_length=result.plan.delta,
        n_blocks=result.plan.n_blocks,
        unobserved_feeds=result.unobserved_feeds,
    )
    return RegretTrace(T=T, K=K, actions=actions, losses=losses,
                       loss_table=loss_table, phases=phases, metadata=meta)
