"""Optimistic-then-commit learning from full-graph feedback.

The learner watches every realized edge, keeps empirical edge frequencies
with an upper-confidence bonus, and importance-weights observed losses by the
estimated observation probability.  It starts out assuming some thresholded
support is strongly observable; once the running upper bound on its own
regret crosses the bound a weakly-observable commit would give, it commits
(at most once) to a thresholded estimate and a dominating-set exploration
distribution weighted by inverse out-edge estimates.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .environment import Environment, FeedbackEvent, FULL_GRAPH
from .errors import ArgumentError, ConfigurationError, DomainError, StateError
from .graphs import DirectedGraph, classify, weighted_weak_domination
from .stochastic import (
    NOT_ACHIEVABLE,
    StochasticFeedbackGraph,
    optimal_threshold_delta_sigma,
    threshold as threshold_graph,
)
from .edge_catcher import _support_params  # shared memoized support parameters
from .graphs import GraphClass
from .traces import PHASE_COMMITTED, PHASE_OPTIMISTIC, RegretTrace

logger = logging.getLogger(__name__)


def big_log(K: int, T: int) -> float:
    return math.log(3.0 * K * K * T * T)


@dataclass(frozen=True)
class UcbEstimate:
    """Empirical edge frequencies and their upper confidence values at round t."""

    t: int
    p_tilde: np.ndarray
    p_hat: np.ndarray  # p_tilde + bonus, clamped to 1; strictly positive for t >= 2

    @property
    def K(self) -> int:
        return self.p_tilde.shape[0]


def ucb_update(counts: np.ndarray, t: int, T: int) -> UcbEstimate:
    """Frequencies over rounds 1..t-1 plus the confidence bonus, clamped at 1."""
    if t < 2:
        raise StateError("no edge estimate before round 2")
    counts = np.asarray(counts, dtype=float)
    K = counts.shape[0]
    log_term = big_log(K, T)
    p_tilde = counts / (t - 1)
    bonus = np.sqrt(2.0 * p_tilde * log_term / (t - 1)) + 3.0 * log_term / (t - 1)
    p_hat = np.minimum(p_tilde + bonus, 1.0)
    return UcbEstimate(t=t, p_tilde=p_tilde, p_hat=p_hat)


def kappa_violations(est: UcbEstimate, truth_p: np.ndarray, T: int) -> int:
    """Edges whose empirical frequency strays outside the confidence radius.

    Diagnostics only: computing this needs the true probabilities, which the
    learner never sees.
    """
    log_term = big_log(est.K, T)
    radius = np.sqrt(2.0 * est.p_tilde * log_term / (est.t - 1)) + 3.0 * log_term / (est.t - 1)
    return int((np.abs(est.p_tilde - np.asarray(truth_p)) > radius).sum())


def theta(thresholded: StochasticFeedbackGraph, pi: np.ndarray) -> float:
    """Variance proxy of a thresholded estimate under sampling distribution pi.

    Twice the inverse minimum surviving edge weight plus, over self-loop
    vertices, twice the mass-to-observation-probability ratio; +inf when some
    vertex has an empty in-neighborhood.
    """
    p = thresholded.p
    supp = p > 0
    if not supp.any(axis=0).all():  # some column empty: unobservable vertex
        return math.inf
    first = 2.0 / p[supp].min()
    p_obs = pi @ p  # P(i) = sum_j pi_j p(j, i); zero entries off support
    total = first
    diag = np.diag(supp)
    for i in np.flatnonzero(diag):
        if p_obs[i] <= 0:
            return math.inf
        total += 2.0 * pi[i] / p_obs[i]
    return float(total)


def select_eps_theta(
    ucb: UcbEstimate, pi_ref: np.ndarray
) -> tuple[float, StochasticFeedbackGraph, float]:
    """Threshold of the UCB matrix minimizing theta over strongly observable supports.

    The UCB support is complete, so the smallest entry always qualifies; ties
    break toward the largest threshold.
    """
    p_hat = ucb.p_hat
    K = ucb.K
    cands = np.unique(p_hat)[::-1]  # descending, all positive
    supports = p_hat[None, :, :] >= cands[:, None, None]  # (c, K, K)
    idx = np.arange(K)
    diag = supports[:, idx, idx]
    in_from_others = supports.sum(axis=1) - diag
    strong = (diag | (in_from_others == K - 1)).all(axis=1)
    weighted = np.where(supports, p_hat[None, :, :], np.nan)
    min_edge = np.nanmin(weighted.reshape(len(cands), -1), axis=1)
    p_obs = np.einsum("j,cji->ci", pi_ref, np.where(supports, p_hat[None, :, :], 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        second = 2.0 * np.where(diag, pi_ref[None, :] / p_obs, 0.0).sum(axis=1)
        theta_vals = 2.0 / min_edge + second
    theta_vals[~strong] = np.inf
    best = int(np.argmin(theta_vals))  # first occurrence = largest eps on ties
    eps = float(cands[best])
    thresholded = StochasticFeedbackGraph(np.where(supports[best], p_hat, 0.0))
    return eps, thresholded, float(theta_vals[best])


def iw_loss(feedback: FeedbackEvent, est_support: DirectedGraph, p_obs_hat: np.ndarray) -> np.ndarray:
    """Importance-weighted loss estimates from one round of full-graph feedback.

    Observed losses count only when the edge also lives in the estimated
    support; the weight is the estimated observation probability.
    """
    K = est_support.K
    est = np.zeros(K)
    est_row = est_support.adjacency[feedback.played]
    for i, loss in feedback.observations:
        if not est_row[i]:
            continue
        if p_obs_hat[i] <= 0:
            raise StateError(f"observation of action {i} with zero estimated probability")
        est[i] = loss / p_obs_hat[i]
    return est


def psi_upper(t: int, theta_max: float, K: int, T: int) -> float:
    """Running upper bound on the optimistic phase's regret after t rounds."""
    if not math.isfinite(theta_max):
        return float(t)
    log_term = big_log(K, T)
    bound = (
        2.0
        + 11.0 * log_term**2 * theta_max
        + (12.0 * math.log(K) + 4.0 * math.sqrt(2.0 * log_term)) * math.sqrt(t * theta_max)
    )
    return float(min(t, bound))


def _delta_sigma_objective(delta_w: float, sigma: float, T: int, log_term: float) -> float:
    return 41.0 * T ** (2.0 / 3.0) * (log_term * delta_w) ** (1.0 / 3.0) + 41.0 * math.sqrt(
        log_term * sigma * T
    )


def lambda_bound(p_tilde: np.ndarray, t: int, T: int) -> float:
    """Regret bound of committing now, minimized over observable thresholds.

    The frequency matrix is first thresholded at 60 ln(KT) / t; candidate
    thresholds are its surviving values.  +inf when no threshold yields an
    observable support.
    """
    if t < 2:
        raise StateError("no commit bound before round 2")
    K = p_tilde.shape[0]
    base = 60.0 * math.log(K * T) / t
    kept = np.where(p_tilde >= base, p_tilde, 0.0)
    log_term = big_log(K, T)
    best = math.inf
    for eps in np.unique(kept[kept > 0])[::-1]:
        mask = kept >= eps
        cls, _, _ = _support_params(mask)
        if cls is GraphClass.NON_OBSERVABLE:
            continue
        value = _commit_value_on(np.where(mask, kept, 0.0), T, log_term)
        best = min(best, value)
    return best


def _commit_value_on(p: np.ndarray, T: int, log_term: float) -> float:
    """delta_sigma objective of one thresholded frequency matrix."""
    supp_mask = p > 0
    cls, _, _ = _support_params(supp_mask)
    diag = np.diag(p)
    sigma = float(np.sum(1.0 / diag[diag > 0]))
    if cls is GraphClass.STRONGLY_OBSERVABLE:
        delta_w = 0.0
    else:
        g = DirectedGraph.from_adjacency(supp_mask)
        weights = _inverse_out_weights(g, p)
        delta_w = weighted_weak_domination(g, weights, mode="exact" if g.K <= 20 else "greedy")[0]
    return _delta_sigma_objective(delta_w, sigma, T, log_term)


def _inverse_out_weights(graph: DirectedGraph, p: np.ndarray) -> np.ndarray:
    """w(i) = 1 / (minimum positive out-edge value of i); +inf with no out-edges."""
    K = graph.K
    w = np.full(K, np.inf)
    adj = graph.adjacency
    for i in range(K):
        vals = p[i, adj[i]]
        vals = vals[vals > 0]
        if vals.size:
            w[i] = 1.0 / vals.min()
    return w


def commit_dominating_set(
    g_star: DirectedGraph, p_hat: np.ndarray
) -> tuple[frozenset[int], np.ndarray]:
    """Minimum inverse-out-probability weakly dominating set and its exploration law.

    The exploration distribution is proportional to the inverse worst
    out-edge estimate over the chosen set; empty set (strongly observable
    support) yields the zero vector.
    """
    cls = classify(g_star)
    if not cls.is_observable:
        raise DomainError("committed support must be observable")
    K = g_star.K
    if cls.is_strongly_observable:
        return frozenset(), np.zeros(K)
    weights = _inverse_out_weights(g_star, p_hat)
    mode = "exact" if K <= 20 else "greedy"
    _, witness = weighted_weak_domination(g_star, weights, mode=mode)
    psi = np.zeros(K)
    for i in witness:
        psi[i] = weights[i]
    psi /= psi.sum()
    return witness, psi


@dataclass
class OtcgOptions:
    commit_log_term: str = "3K2T2"  # "3K2T2" | "KT": log factor in the commit rates
    lambda_check: str = "every"  # "every" | "pow2"
    record_diagnostics: bool = False


@dataclass
class CommitParameters:
    t_star: int
    eps_t_star: float
    eps_delta_sigma: float
    delta_w: float
    sigma: float
    gamma: float
    eta: float
    support: DirectedGraph


class OtcgRunner:
    """Sequential state machine for the optimistic-then-commit learner."""

    def __init__(
        self,
        env: Environment,
        T: int,
        rng: Optional[np.random.Generator] = None,
        options: Optional[OtcgOptions] = None,
    ):
        if env.mode != FULL_GRAPH:
            raise ConfigurationError("this learner requires full-graph feedback")
        if env.horizon < T or T < 2:
            raise ArgumentError("need 2 <= T <= environment horizon")
        self.env = env
        self.T = T
        self.K = env.K
        self.rng = rng if rng is not None else np.random.default_rng()
        self.options = options or OtcgOptions()

        self.counts = np.zeros((self.K, self.K), dtype=np.int64)
        self.phase = "optimistic"
        self.t_star: Optional[int] = None
        self.commit: Optional[CommitParameters] = None
        self.cum_est_loss = np.zeros(self.K)  # reset at the phase switch
        self.theta_hist_sum = 0.0
        self.theta_hist_max = 0.0
        self.min_p_min = math.inf
        self.last_pi = np.full(self.K, 1.0 / self.K)
        self.last_psi: Optional[float] = None  # Psi_{t-1}
        self.last_lambda: Optional[float] = None  # Lambda_{t-1}
        self._cached_lambda = math.inf
        self.t = 1

        self.actions = np.empty(T, dtype=np.int64)
        self.incurred = np.empty(T)
        self.phases = np.empty(T, dtype=np.int8)
        # scalar per-round series always recorded (exported as CSV columns);
        # the matrix-valued diagnostics only under record_diagnostics
        self.series: dict[str, list] = {
            k: [] for k in ("gamma", "eta", "theta", "psi", "lambda", "eps_theta")
        }
        self.diag: dict[str, list] = {
            k: [] for k in ("pi", "ell_tilde", "realized", "supp_mask", "p_obs_hat")
        }
        self._graph_cache: dict[bytes, DirectedGraph] = {}

    # -- round 1 -------------------------------------------------------------

    def play_first_round(self) -> None:
        a = int(self.rng.integers(self.K))
        ev = self.env.step(a)
        self.counts += ev.realized
        self.actions[0] = a
        self.incurred[0] = self.env.losses[0, a]
        self.phases[0] = PHASE_OPTIMISTIC
        for k in self.series:
            self.series[k].append(math.nan)
        if self.options.record_diagnostics:
            for k in self.diag:
                self.diag[k].append(None)
        self.t = 2

    # -- switch test -----------------------------------------------------------

    def _should_switch(self) -> bool:
        if self.last_psi is None or self.last_lambda is None:
            return False
        return self.last_psi >= self.last_lambda

    def _compute_commit_parameters(self) -> CommitParameters:
        t_star = self.t - 1
        eps_t_star = 60.0 * math.log(self.K * self.T) / t_star
        p_tilde = self.counts / t_star
        kept = np.where(p_tilde >= eps_t_star, p_tilde, 0.0)
        est = StochasticFeedbackGraph(kept)
        opt = optimal_threshold_delta_sigma(est, self.T)
        if opt is NOT_ACHIEVABLE:
            raise StateError("switch fired without an observable commit threshold")
        committed = threshold_graph(est, opt.eps)
        supp = DirectedGraph.from_adjacency(committed.p > 0)
        if self.options.commit_log_term == "KT":
            log_term = math.log(self.K * self.T)
        else:
            log_term = big_log(self.K, self.T)
        gamma = min((opt.delta_w * log_term) ** (1.0 / 3.0) / self.T ** (1.0 / 3.0), 0.5)
        if opt.delta_w == 0:
            gamma = 0.0
            logger.warning("committed support is strongly observable: no forced exploration")
        denom = (opt.delta_w / gamma if opt.delta_w else 0.0) + opt.sigma
        if denom <= 0:
            logger.warning("degenerate commit variance proxy; using 1")
            denom = 1.0
        eta = math.sqrt(math.log(self.K) / (2.0 * self.T * denom)) if self.K > 1 else 1.0
        return CommitParameters(
            t_star=t_star,
            eps_t_star=eps_t_star,
            eps_delta_sigma=opt.eps,
            delta_w=opt.delta_w,
            sigma=opt.sigma,
            gamma=gamma,
            eta=eta,
            support=supp,
        )

    # -- one round -------------------------------------------------------------

    def play_round(self) -> None:
        t = self.t
        if t > self.T:
            raise StateError("horizon exhausted")
        K = self.K
        if self.phase == "optimistic" and self._should_switch():
            self.phase = "committed"
            self.commit = self._compute_commit_parameters()
            self.t_star = self.commit.t_star
            self.cum_est_loss = np.zeros(K)

        ucb = ucb_update(self.counts, t, self.T)
        record = self.options.record_diagnostics

        if self.phase == "optimistic":
            eps_theta, thresholded, _ = select_eps_theta(ucb, self.last_pi)
            supp_mask = thresholded.p > 0
            p_min = float(ucb.p_hat[supp_mask].min())
            self.min_p_min = min(self.min_p_min, p_min)
            gamma_t = min(1.0 / math.sqrt(t * self.min_p_min), 0.5)
            eta_t = 1.0 / math.sqrt(
                16.0 / self.min_p_min**2 + 4.0 * t / self.min_p_min + self.theta_hist_sum
            )
            q = _softmax(-eta_t * self.cum_est_loss)
            pi = (1.0 - gamma_t) * q + gamma_t / K
            theta_t = theta(thresholded, pi)
            self.theta_hist_sum += theta_t
            self.theta_hist_max = max(self.theta_hist_max, theta_t)
            lam = self._lambda_now(ucb.p_tilde, t)
            psi = psi_upper(t, self.theta_hist_max, K, self.T)
        else:
            supp_mask = np.ones((K, K), dtype=bool)  # commit phase weights the full UCB graph
            eps_theta = math.nan
            gamma_t = self.commit.gamma
            eta_t = self.commit.eta
            _, psi_dist = commit_dominating_set(self.commit.support, ucb.p_hat)
            q = _softmax(-eta_t * self.cum_est_loss)
            pi = (1.0 - gamma_t) * q + gamma_t * psi_dist
            theta_t = math.nan
            lam = math.nan
            psi = math.nan

        if not np.all(np.isfinite(pi)) or abs(pi.sum() - 1.0) > 1e-9 or pi.min() < 0:
            raise StateError(f"invalid sampling distribution at round {t}: {pi}")
        pi = pi / pi.sum()
        a = int(self.rng.choice(K, p=pi))
        ev = self.env.step(a)

        p_obs_hat = pi @ np.where(supp_mask, ucb.p_hat, 0.0)
        key = supp_mask.tobytes()
        est_support = self._graph_cache.get(key)
        if est_support is None:
            est_support = DirectedGraph.from_adjacency(supp_mask)
            if len(self._graph_cache) < 4096:
                self._graph_cache[key] = est_support
        ell_tilde = iw_loss(ev, est_support, p_obs_hat)
        self.cum_est_loss += ell_tilde
        self.counts += ev.realized

        if self.phase == "optimistic":
            self.last_psi = psi
            self.last_lambda = lam

        self.actions[t - 1] = a
        self.incurred[t - 1] = self.env.losses[t - 1, a]
        self.phases[t - 1] = PHASE_OPTIMISTIC if self.phase == "optimistic" else PHASE_COMMITTED
        self.last_pi = pi
        self.series["gamma"].append(gamma_t)
        self.series["eta"].append(eta_t)
        self.series["theta"].append(theta_t)
        self.series["psi"].append(psi)
        self.series["lambda"].append(lam)
        self.series["eps_theta"].append(eps_theta)
        if record:
            self.diag["pi"].append(pi.copy())
            self.diag["ell_tilde"].append(ell_tilde.copy())
            self.diag["realized"].append(ev.realized.copy())
            self.diag["supp_mask"].append(supp_mask.copy())
            self.diag["p_obs_hat"].append(p_obs_hat.copy())
        self.t += 1

    def _lambda_now(self, p_tilde: np.ndarray, t: int) -> float:
        if self.options.lambda_check == "pow2" and t & (t - 1):
            return self._cached_lambda
        lam = lambda_bound(p_tilde, t, self.T)
        self._cached_lambda = lam
        return lam

    def run(self) -> RegretTrace:
        self.play_first_round()
        while self.t <= self.T:
            self.play_round()
        meta = {
            "algorithm": "otcg",
            "phase_final": self.phase,
            "t_star": self.t_star,
        }
        if self.commit is not None:
            meta.update(
                eps_t_star=self.commit.eps_t_star,
                eps_delta_sigma=self.commit.eps_delta_sigma,
                delta_w=self.commit.delta_w,
                sigma=self.commit.sigma,
                commit_gamma=self.commit.gamma,
                commit_eta=self.commit.eta,
            )
        extras = {key: np.array(vals, dtype=float) for key, vals in self.series.items()}
        return RegretTrace(
            T=self.T,
            K=self.K,
            actions=self.actions,
            losses=self.incurred,
            loss_table=self.env.losses[: self.T].copy(),
            phases=self.phases,
            metadata=meta,
            extras=extras,
        )


def _softmax(logits: np.ndarray) -> np.ndarray:
    logits = logits - logits.max()
    q = np.exp(logits)
    return q / q.sum()


def run_otcg(
    env: Environment,
    T: int,
    rng: Optional[np.random.Generator] = None,
    options: Optional[OtcgOptions] = None,
) -> RegretTrace:
    """Run the optimistic-then-commit learner for exactly T rounds."""
    return OtcgRunner(env, T, rng=rng, options=options).run()
