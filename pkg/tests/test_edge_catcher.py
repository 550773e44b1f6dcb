import math

import numpy as np
import pytest

from stochfg.edge_catcher import (
    BlockPlan,
    C_STRONG,
    C_WEAK,
    EdgeCatcherOptions,
    UNOBSERVED,
    block_estimator,
    block_reduction,
    edge_catcher,
    eps_tau,
    phi,
    phi_components,
    round_robin,
)
from stochfg.environment import Environment, FeedbackEvent
from stochfg.errors import ArgumentError, ConfigurationError, ProtocolError
from stochfg.exp_weights import Exp3GPolicy
from stochfg.graphs import DirectedGraph
from stochfg.stochastic import (
    StochasticFeedbackGraph,
    is_eps_good_approx,
    support,
)
from stochfg.traces import PHASE_ARBITRARY, PHASE_COMMITTED, PHASE_ESTIMATION


def make_env(p, T, seed=0, losses=None, mode="local"):
    g = StochasticFeedbackGraph(np.asarray(p, dtype=float))
    if losses is None:
        losses = np.tile(np.linspace(0.2, 0.8, g.K), (T, 1))
    return Environment(g, losses, mode=mode, rng=np.random.default_rng(seed))


class TestPhi:
    def test_all_zero_is_infinite(self):
        est = StochasticFeedbackGraph(np.zeros((3, 3)))
        assert math.isinf(phi(est, 100))

    def test_all_ones_weak_branch_zero(self):
        est = StochasticFeedbackGraph(np.ones((2, 2)))
        report = phi_components(est, 10**4)
        expected_strong = 4 * C_STRONG * math.sqrt(1 * 10**4) * math.log(2 * 10**4) ** 1.5
        assert report.strong_value == pytest.approx(expected_strong, rel=1e-12)
        assert report.weak_value == 0.0  # delta of a strongly observable support is 0
        assert report.value == 0.0

    def test_faulty_bandits_min_of_branches(self):
        est = StochasticFeedbackGraph(np.diag([0.5, 0.5]))
        T = 10**4
        report = phi_components(est, T)
        # independent recomputation over the single candidate threshold 0.5
        log_kt = math.log(2 * T)
        strong = 4 * C_STRONG * math.sqrt((2 / 0.5) * T) * log_kt**1.5
        weak = 4 * C_WEAK * ((0 / 0.5) * log_kt**2) ** (1 / 3) * T ** (2 / 3)
        assert report.strong_value == pytest.approx(strong, rel=1e-12)
        assert report.weak_value == pytest.approx(weak, rel=1e-12)
        assert phi(est, T) == pytest.approx(min(strong, weak), rel=1e-12)

    def test_scale(self):
        est = StochasticFeedbackGraph(np.diag([0.5, 0.5]))
        assert phi(est, 100, scale=0.5) == pytest.approx(0.5 * phi(est, 100), rel=1e-12)

    def test_rejects_degenerate_sizes(self):
        with pytest.raises(ConfigurationError):
            phi_components(StochasticFeedbackGraph(np.ones((1, 1))), 100)
        with pytest.raises(ConfigurationError):
            phi_components(StochasticFeedbackGraph(np.ones((2, 2))), 1)


class TestRoundRobin:
    def test_deterministic_truth_estimates_exact(self):
        p = np.array([[1.0, 0.0], [1.0, 1.0]])
        env = make_env(p, 2000)
        out = round_robin(env, 2000, None)
        np.testing.assert_allclose(out.estimate.p_hat, p)
        assert out.stop_reason == "budget_exhausted"
        assert out.rounds_consumed == 2000

    def test_stops_when_phi_triggers(self):
        # all-ones graph: the weak branch is 0, so the stop fires on the first
        # sweep whose threshold drops below 1 and the support becomes visible
        T, K = 2000, 2
        env = make_env(np.ones((2, 2)), T)
        out = round_robin(env, T, lambda est, horizon: phi(est, horizon))
        first_visible = math.ceil(60 * math.log(K * T))
        assert out.stop_reason == "phi_triggered"
        assert out.tau_hat == first_visible
        assert out.phi_value == 0.0
        assert out.eps_hat == pytest.approx(eps_tau(out.tau_hat, K, T))

    def test_estimates_concentrate(self):
        p = np.array([[0.5, 0.0], [0.0, 1.0]])
        T = 20000  # 10^4 sweeps at K=2
        env = make_env(p, T, seed=3)
        out = round_robin(env, T, None)
        assert out.tau_hat == 10**4
        assert abs(out.estimate.p_hat[0, 0] - 0.5) < 3 * math.sqrt(0.25 / 10**4)

    def test_budget_exhausted_with_infinite_phi(self):
        env = make_env(np.ones((2, 2)), 100)
        out = round_robin(env, 100, lambda est, horizon: math.inf)
        assert out.stop_reason == "budget_exhausted" and out.tau_hat == 50

    def test_pow2_checks(self):
        T = 2000
        env = make_env(np.ones((2, 2)), T)
        out = round_robin(env, T, lambda est, horizon: phi(est, horizon), phi_check="pow2")
        assert out.stop_reason == "phi_triggered"
        assert out.tau_hat & (out.tau_hat - 1) == 0  # stopped on a power of two

    def test_k_larger_than_horizon(self):
        env = make_env(np.ones((3, 3)), 2)
        with pytest.raises(ArgumentError):
            round_robin(env, 2, None)

    def test_history_recording(self):
        env = make_env(np.ones((2, 2)), 40)
        out = round_robin(env, 40, None, record_history=True)
        assert out.sweep_rows.shape == (20, 2, 2)
        np.testing.assert_array_equal(out.sweep_rows.sum(axis=0), out.estimate.counts)


def _events_for_block(losses_col, realized_col, a, a_prime, K=2):
    events = []
    for t, (loss, hit) in enumerate(zip(losses_col, realized_col)):
        row = np.zeros(K, dtype=bool)
        obs = []
        if hit:
            row[a_prime] = True
            obs.append((a_prime, float(loss)))
        events.append(FeedbackEvent(t=t, played=a, observations=tuple(obs), realized_row=row))
    return events


class TestBlockEstimator:
    def test_always_realized_gives_block_mean(self, rng):
        losses = rng.random(50)
        events = _events_for_block(losses, np.ones(50, dtype=bool), 0, 1)
        val = block_estimator(events, 0, 1, 50)
        assert val == pytest.approx(losses.mean())

    def test_never_realized(self):
        events = _events_for_block(np.zeros(10), np.zeros(10, dtype=bool), 0, 1)
        assert block_estimator(events, 0, 1, 10) is UNOBSERVED

    def test_wrong_action_raises(self):
        events = _events_for_block(np.zeros(5), np.ones(5, dtype=bool), 0, 1)
        events[3] = FeedbackEvent(t=3, played=1, observations=(), realized_row=np.zeros(2, dtype=bool))
        with pytest.raises(ProtocolError):
            block_estimator(events, 0, 1, 5)

    def test_conditional_unbiasedness(self, rng):
        # fixed loss block; average the estimator over realization draws
        delta, p_edge, n_draws = 50, 0.2, 30_000
        losses = rng.random(delta)
        c_true = losses.mean()
        vals = []
        for _ in range(n_draws):
            hits = rng.random(delta) < p_edge
            if hits.any():
                vals.append(losses[hits].mean())
        vals = np.array(vals)
        se = vals.std() / math.sqrt(len(vals))
        assert abs(vals.mean() - c_true) < 3 * se + 1e-12


class TestBlockReduction:
    def test_degenerate_plan_plays_arbitrary(self):
        T = 30
        env = make_env(np.ones((2, 2)), T)
        est = env.graph
        policy = Exp3GPolicy(support(est), 1, "strong")
        res = block_reduction(env, T, 0.001, est, policy, np.random.default_rng(0))
        assert res.plan.n_blocks == 0
        assert (res.phases == PHASE_ARBITRARY).all()
        assert (res.actions == 0).all()

    def test_deterministic_graph_feeds_block_means(self):
        T, K = 400, 2
        losses = np.tile([[0.25, 0.75]], (T, 1))
        env = make_env(np.ones((2, 2)), T, losses=losses)
        est = env.graph
        plan = BlockPlan.for_horizon(T, 1.0, K)
        assert plan.delta == math.ceil(2 * math.log(K * T))
        policy = Exp3GPolicy(support(est), max(plan.n_blocks, 1), "strong", record_history=True)
        res = block_reduction(env, T, 1.0, est, policy, np.random.default_rng(1))
        assert res.unobserved_feeds == 0
        # with all edges present, every estimate round saw exact block means
        for est_vec, pi in zip(policy.history["loss_est"], policy.history["pi"]):
            np.testing.assert_allclose(est_vec, [0.25, 0.75])  # P(i)=1 in full info

    def test_policy_graph_mismatch(self):
        env = make_env(np.ones((2, 2)), 100)
        policy = Exp3GPolicy(DirectedGraph.bandit(2), 10, "strong")
        with pytest.raises(ConfigurationError):
            block_reduction(env, 100, 0.5, env.graph, policy, np.random.default_rng(0))


class TestEdgeCatcher:
    def test_single_action_zero_regret(self):
        env = make_env(np.ones((1, 1)), 50, losses=np.full((50, 1), 0.4))
        trace = edge_catcher(env, 50)
        assert trace.final_regret() == 0.0
        assert trace.T == 50

    def test_total_rounds_and_phases(self):
        T = 4000
        losses = np.tile([[0.2, 0.8]], (T, 1))
        env = make_env(np.ones((2, 2)), T, seed=5, losses=losses)
        trace = edge_catcher(env, T, rng=np.random.default_rng(5))
        assert len(trace.actions) == T
        assert trace.metadata["stop_reason"] == "phi_triggered"
        assert trace.metadata["regime"] == "strong"  # weak branch won via delta*=0
        n_est = (trace.phases == PHASE_ESTIMATION).sum()
        assert n_est == trace.metadata["tau_hat"] * 2
        assert (trace.phases[:n_est] == PHASE_ESTIMATION).all()
        assert (trace.phases[n_est:] != PHASE_ESTIMATION).all()

    def test_unobservable_truth_falls_back(self):
        # estimation swallows floor(T/K)*K rounds when the stop never fires,
        # so the uniform fallback covers the T mod K tail
        p = np.zeros((2, 2))
        p[0, 1] = 0.6  # only one cross edge: never observable
        T = 601
        env = make_env(p, T, seed=2)
        trace = edge_catcher(env, T, rng=np.random.default_rng(2))
        assert trace.metadata["stop_reason"] == "budget_exhausted"
        assert trace.metadata["fallback"] is True
        tail = trace.phases[trace.phases != PHASE_ESTIMATION]
        assert len(tail) == 1 and (tail == 3).all()

    def test_deterministic_replay(self):
        T = 3000
        losses = np.tile([[0.1, 0.9, 0.5]], (T, 1))

        def one(seed):
            env = make_env(np.full((3, 3), 0.4), T, seed=seed, losses=losses)
            return edge_catcher(env, T, rng=np.random.default_rng(seed + 1000))

        t1, t2 = one(7), one(7)
        np.testing.assert_array_equal(t1.actions, t2.actions)
        np.testing.assert_array_equal(t1.losses, t2.losses)

    def test_faulty_bandits_commit_strong(self):
        # uniformly flaky self-loops: once all loops surface the weak branch
        # is degenerate-zero and the commit must go to the strong regime
        T, K = 12000, 3
        losses = np.tile([[0.1, 0.9, 0.9]], (T, 1))
        env = make_env(np.diag([0.5, 0.5, 0.5]), T, seed=11, losses=losses)
        trace = edge_catcher(env, T, rng=np.random.default_rng(11))
        assert trace.metadata["stop_reason"] == "phi_triggered"
        assert trace.metadata["regime"] == "strong"
        assert trace.final_regret() < 0.8 * T * (2 / 3 * 0.8)  # below round-robin rate

    def test_weak_regime_on_revealing_graph(self):
        # center reveals everything at probability 0.6; support is weakly
        # observable, so the committed phase must use the weak policy
        T = 9000
        K = 3
        losses = np.tile([[0.9, 0.1, 0.6]], (T, 1))
        env = make_env(StochasticFeedbackGraph.revealing_action(K, 0.6).p, T, seed=9, losses=losses)
        trace = edge_catcher(
            env, T, rng=np.random.default_rng(9), options=EdgeCatcherOptions(phi_scale=0.02)
        )
        assert trace.metadata["regime"] == "weak"
        assert (trace.phases == PHASE_COMMITTED).sum() > 0

    def test_phi_monotonicity_on_good_runs(self):
        # conditional variant of the stopping-function growth property: on a
        # run where every sweep's estimate is eps_tau-good, the support never
        # shrinks and phi at later sweeps is at most twice phi at earlier ones
        T, K = 3000, 2
        p = np.array([[0.9, 0.4], [0.0, 1.0]])
        truth = StochasticFeedbackGraph(p)
        env = make_env(p, T, seed=13)
        out = round_robin(env, T, None, record_history=True)
        counts = np.cumsum(out.sweep_rows, axis=0)
        taus = np.arange(1, out.tau_hat + 1)
        good = []
        supports = []
        phis = []
        for tau in taus:
            e = eps_tau(int(tau), K, T)
            p_hat = counts[tau - 1] / tau
            thr = np.where(p_hat >= e, p_hat, 0.0)
            est = StochasticFeedbackGraph(thr)
            good.append(is_eps_good_approx(est, truth, e)[0])
            supports.append(frozenset(map(tuple, np.argwhere(thr > 0))))
            phis.append(phi(est, T))
        if all(good):
            for a in range(len(taus) - 1):
                assert supports[a] <= supports[a + 1]
                if math.isfinite(phis[a]):
                    assert phis[a + 1] <= 2 * phis[a] + 1e-9
