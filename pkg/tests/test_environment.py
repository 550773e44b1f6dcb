import json
import math

import numpy as np
import pytest

from stochfg.environment import (
    CANONICAL_WEAK_GRAPH,
    Environment,
    beta_strong_c1,
    beta_strong_c2,
    beta_weak_c3,
    beta_weak_c4,
    dump_instance,
    gen_hard_strong_c1,
    gen_hard_strong_c2,
    gen_hard_weak_c3,
    gen_hard_weak_c4,
    make_feedback,
    sample_realization,
    split_streams,
)
from stochfg.errors import ArgumentError, DomainError, ProtocolError
from stochfg.graphs import DirectedGraph, classify, GraphClass
from stochfg.stochastic import StochasticFeedbackGraph


class TestSampling:
    def test_all_ones(self, rng):
        g = StochasticFeedbackGraph(np.ones((3, 3)))
        assert len(sample_realization(g, rng).edges) == 9

    def test_all_zero(self, rng):
        g = StochasticFeedbackGraph(np.zeros((3, 3)))
        assert sample_realization(g, rng).edges == frozenset()

    def test_monte_carlo_frequency(self, rng):
        p = np.zeros((2, 2))
        p[0, 1] = 0.3
        g = StochasticFeedbackGraph(p)
        n = 100_000
        hits = sum((0, 1) in sample_realization(g, rng).edges for _ in range(n))
        band = 3 * math.sqrt(0.3 * 0.7 / n)
        assert abs(hits / n - 0.3) < band

    def test_reproducible(self):
        g = StochasticFeedbackGraph(np.full((4, 4), 0.5))
        a = sample_realization(g, np.random.default_rng(7))
        b = sample_realization(g, np.random.default_rng(7))
        assert a.edges == b.edges


class TestMakeFeedback:
    def test_empty_graph_sees_nothing(self):
        g = DirectedGraph(3, frozenset())
        ev = make_feedback(g, 1, np.array([0.1, 0.2, 0.3]))
        assert ev.observations == ()

    def test_self_loop_only(self):
        g = DirectedGraph.from_edges(3, [(1, 1)])
        ev = make_feedback(g, 1, np.array([0.1, 0.2, 0.3]))
        assert ev.observations == ((1, 0.2),)

    def test_out_neighbors(self):
        g = DirectedGraph.from_edges(3, [(0, 0), (0, 2)])
        ev = make_feedback(g, 0, np.array([0.5, 0.6, 0.7]))
        assert ev.observations == ((0, 0.5), (2, 0.7))

    def test_full_mode_attaches_graph(self):
        g = DirectedGraph.from_edges(2, [(0, 1)])
        ev = make_feedback(g, 0, np.array([0.0, 1.0]), mode="full_graph")
        assert ev.realized_graph.edges == {(0, 1)}


class TestEnvironment:
    def test_step_matches_observation_contract(self, rng):
        g = StochasticFeedbackGraph(np.ones((3, 3)))
        losses = rng.random((5, 3))
        env = Environment(g, losses, rng=np.random.default_rng(0))
        ev = env.step(1)
        assert ev.observed_actions == (0, 1, 2)
        assert dict(ev.observations)[2] == losses[0, 2]

    def test_horizon_exhaustion(self):
        env = Environment(StochasticFeedbackGraph(np.ones((2, 2))), np.zeros((1, 2)),
                          rng=np.random.default_rng(0))
        env.step(0)
        with pytest.raises(ProtocolError):
            env.step(0)

    def test_step_batch_masks_unobserved(self):
        p = np.zeros((2, 2))
        p[0, 0] = 1.0
        env = Environment(StochasticFeedbackGraph(p), np.full((4, 2), 0.7),
                          rng=np.random.default_rng(0))
        rows, observed, incurred = env.step_batch(np.array([0, 0, 1, 1]))
        assert rows[:2, 0].all() and not rows[2:].any()
        assert observed[0, 0] == 0.7 and observed[0, 1] == 0.0
        np.testing.assert_allclose(incurred, 0.7)


class TestBetaFormulas:
    def test_c1_value(self):
        val = beta_strong_c1(2, 0.1, 10**5)
        expected = (1 / 33) * math.sqrt(2 / (2 * math.log(4 / 3) * 0.1 * 10**5))
        assert val == pytest.approx(expected, rel=1e-12)
        assert val == pytest.approx(5.65e-4, rel=0.01)

    def test_c2_value(self):
        assert beta_strong_c2(0.1, 10**5) == pytest.approx(0.25 / math.sqrt(2e4), rel=1e-12)
        assert beta_strong_c2(0.1, 10**5) == pytest.approx(1.77e-3, rel=0.01)

    def test_c3_value(self):
        val = beta_weak_c3(4, 0.1, 10**5, 16)
        expected = 4 ** (1 / 3) * (32 * 0.1 * 10**5 * math.log(16)) ** (-1 / 3)
        assert val == pytest.approx(expected, rel=1e-12)

    def test_c4_value(self):
        assert beta_weak_c4(0.1, 10**5) == pytest.approx(0.0164, rel=0.01)


class TestHardInstances:
    def test_c1_structure(self):
        g = DirectedGraph.from_edges(4, [(0, 1), (1, 0)])
        rng = np.random.default_rng(3)
        graph, losses, spec = gen_hard_strong_c1(g, 0.2, 4000, rng)
        # all self-loops added at probability eps
        assert all(graph.p[i, i] == 0.2 for i in range(4))
        assert graph.p[0, 1] == 0.2
        assert 0 <= spec.beta <= 0.25
        assert losses.min() >= 0 and losses.max() <= 1
        # actions outside the independent set always incur loss 1
        bad = [i for i in range(4) if i not in spec.target_set]
        for b in bad:
            assert (losses[:, b] == 1.0).all()
        # non-hidden independent actions have mean 1/2 up to 4*sqrt(pq/T)
        for j in spec.target_set:
            if j == spec.hidden_index:
                continue
            band = 4 * math.sqrt(0.25 / 4000)
            assert abs(losses[:, j].mean() - 0.5) < band
        assert abs(losses[:, spec.hidden_index].mean() - (0.5 - spec.beta)) < 4 * math.sqrt(
            0.25 / 4000
        )

    def test_c1_requires_nontrivial_independence(self):
        with pytest.raises(ArgumentError):
            gen_hard_strong_c1(DirectedGraph.complete(3), 0.5, 100, np.random.default_rng(0))

    def test_c2_structure(self):
        rng = np.random.default_rng(5)
        graph, losses, spec = gen_hard_strong_c2(0.1, 20000, 4, rng)
        assert (graph.p == 0.1).all()
        assert spec.hidden_sign in (-1, 1)
        band = 4 * math.sqrt(0.25 / 20000)
        assert abs(losses[:, 0].mean() - (0.5 - spec.beta * spec.hidden_sign)) < band
        for j in range(1, 4):
            assert abs(losses[:, j].mean() - 0.5) < band

    def test_c3_structure(self):
        # two revealing stars: weakly observable with delta = 2
        edges = [(0, j) for j in range(8)] + [(1, j) for j in range(8)]
        g = DirectedGraph.from_edges(8, edges)
        rng = np.random.default_rng(11)
        graph, losses, spec = gen_hard_weak_c3(g, 0.3, 5000, rng)
        assert spec.achieved_m == len(spec.target_set) >= 1
        # the target set is independent and weakly observable
        adj = g.adjacency
        for i in spec.target_set:
            for j in spec.target_set:
                if i != j:
                    assert not adj[i, j] and not adj[j, i]
        off = [i for i in range(8) if i not in spec.target_set]
        for b in off:
            assert (losses[:, b] == 1.0).all()
        band = 4 * math.sqrt(0.25 / 5000)
        assert abs(losses[:, spec.hidden_index].mean() - (0.5 - spec.beta)) < band

    def test_c3_rejects_strongly_observable(self):
        with pytest.raises(DomainError):
            gen_hard_weak_c3(DirectedGraph.bandit(3), 0.1, 100, np.random.default_rng(0))

    def test_c4_structure(self):
        rng = np.random.default_rng(7)
        graph, losses, spec = gen_hard_weak_c4(0.1, 50000, rng)
        assert classify(CANONICAL_WEAK_GRAPH).graph_class is GraphClass.WEAKLY_OBSERVABLE
        assert (losses[:, 2] == 1.0).all()
        band = 4 * math.sqrt(0.25 / 50000)
        assert abs(losses[:, 1].mean() - 0.5) < band
        assert abs(losses[:, 0].mean() - (0.5 - spec.beta * spec.hidden_sign)) < band
        assert graph.p[2, 0] == 0.1 and graph.p[1, 0] == 0.0

    def test_beta_clamped(self):
        # tiny horizon pushes the raw gap above 1/4; it must clamp
        assert beta_strong_c2(0.4, 1) > 0.25
        _, _, spec = gen_hard_strong_c2(0.4, 1, 3, np.random.default_rng(0))
        assert spec.beta == 0.25

    def test_reproducible_tables(self):
        g1, l1, s1 = gen_hard_strong_c2(0.2, 1000, 3, np.random.default_rng(42))
        g2, l2, s2 = gen_hard_strong_c2(0.2, 1000, 3, np.random.default_rng(42))
        np.testing.assert_array_equal(l1, l2)
        assert s1.hidden_sign == s2.hidden_sign


class TestStreamsAndDump:
    def test_split_streams_independent(self):
        a1, b1, c1 = split_streams(99)
        a2, b2, c2 = split_streams(99)
        assert a1.random() == a2.random()
        assert b1.random() == b2.random()
        # different substreams differ
        a3, b3, _ = split_streams(99)
        assert a3.random() != b3.random()

    def test_dump_roundtrip_digest(self):
        rng = np.random.default_rng(1)
        graph, losses, spec = gen_hard_weak_c4(0.5, 100, rng, seed=1)
        d = dump_instance(graph, losses, spec, include_losses=True)
        blob = json.dumps(d)
        back = json.loads(blob)
        np.testing.assert_allclose(np.array(back["p"]), graph.p)
        np.testing.assert_allclose(np.array(back["losses"]), losses)
        assert back["hard_instance"]["beta"] == spec.beta
