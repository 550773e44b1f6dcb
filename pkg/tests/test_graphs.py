import math

import numpy as np
import pytest

from stochfg.errors import ArgumentError, CapabilityError, DomainError
from stochfg.graphs import (
    DirectedGraph,
    GraphClass,
    VertexWeights,
    classify,
    derive_weights,
    independence_number,
    neighborhoods,
    weak_domination,
    weighted_independence_number,
    weighted_weak_domination,
)
from stochfg.stochastic import StochasticFeedbackGraph

from conftest import brute_classify, brute_independence, brute_weak_domination, random_graph


def revealing_graph(K: int, center: int = 0) -> DirectedGraph:
    return DirectedGraph.from_edges(K, [(center, j) for j in range(K)])


def five_cycle() -> DirectedGraph:
    edges = []
    for i in range(5):
        edges += [(i, (i + 1) % 5), ((i + 1) % 5, i)]
    return DirectedGraph.from_edges(5, edges)


class TestNeighborhoods:
    def test_basic(self):
        g = DirectedGraph.from_edges(2, [(0, 0), (0, 1)])
        in_set, out_set = neighborhoods(g, 1)
        assert in_set == {0} and out_set == frozenset()

    def test_self_loop(self):
        g = DirectedGraph.from_edges(1, [(0, 0)])
        assert neighborhoods(g, 0) == ({0}, {0})

    def test_three_cycle(self):
        g = DirectedGraph.from_edges(3, [(0, 1), (1, 2), (2, 0)])
        assert neighborhoods(g, 1) == ({0}, {2})

    def test_out_of_range(self):
        g = DirectedGraph.bandit(3)
        with pytest.raises(ArgumentError):
            neighborhoods(g, 3)


class TestClassify:
    def test_bandit_strongly_observable(self):
        assert classify(DirectedGraph.bandit(5)).graph_class is GraphClass.STRONGLY_OBSERVABLE

    def test_revealing_weakly_observable(self):
        cls = classify(revealing_graph(5))
        assert cls.graph_class is GraphClass.WEAKLY_OBSERVABLE
        assert cls.strongly_observable[0]  # the center has a self-loop
        assert not cls.strongly_observable[1:].any()
        assert cls.observable.all()

    def test_empty_non_observable(self):
        assert classify(DirectedGraph(2, frozenset())).graph_class is GraphClass.NON_OBSERVABLE

    def test_agrees_with_definition(self, rng):
        for _ in range(300):
            K = int(rng.integers(1, 7))
            g = random_graph(rng, K, p_edge=float(rng.random()))
            assert classify(g).graph_class.value == brute_classify(g)


class TestIndependenceNumber:
    def test_complete(self):
        assert independence_number(DirectedGraph.complete(6))[0] == 1

    def test_loops_only(self):
        size, witness = independence_number(DirectedGraph.bandit(6))
        assert size == 6 and witness == frozenset(range(6))

    def test_five_cycle(self):
        expected, _ = brute_independence(five_cycle())
        size, witness = independence_number(five_cycle())
        assert size == expected == 2
        assert brute_independence(five_cycle())[0] == len(witness)

    def test_matches_bruteforce(self, rng):
        for _ in range(120):
            K = int(rng.integers(1, 11))
            g = random_graph(rng, K, p_edge=float(rng.uniform(0.05, 0.8)))
            size, witness = independence_number(g)
            assert size == brute_independence(g)[0]
            # witness really is independent
            adj = g.adjacency
            for i in witness:
                for j in witness:
                    if i != j:
                        assert not adj[i, j]

    def test_monotone_under_edge_addition(self, rng):
        for _ in range(40):
            K = int(rng.integers(2, 9))
            g = random_graph(rng, K, p_edge=0.2)
            i, j = rng.integers(0, K, size=2)
            g2 = DirectedGraph(K, g.edges | {(int(i), int(j))})
            assert independence_number(g2)[0] <= independence_number(g)[0]

    def test_cap(self):
        with pytest.raises(CapabilityError):
            independence_number(DirectedGraph.bandit(40))
        size, _ = independence_number(DirectedGraph.bandit(40), mode="greedy")
        assert size == 40


class TestWeakDomination:
    def test_strongly_observable_zero(self):
        assert weak_domination(DirectedGraph.bandit(4)) == (0, frozenset())

    def test_revealing(self):
        size, witness = weak_domination(revealing_graph(5))
        assert (size, witness) == (1, {0})
        assert brute_weak_domination(revealing_graph(5)) == 1

    def test_two_disjoint_stars(self):
        edges = [(0, j) for j in range(3)] + [(3, j) for j in range(3, 6)]
        g = DirectedGraph.from_edges(6, edges)
        size, witness = weak_domination(g)
        assert size == 2 == brute_weak_domination(g)
        assert witness == {0, 3}

    def test_non_observable_raises(self):
        with pytest.raises(DomainError):
            weak_domination(DirectedGraph(3, frozenset({(0, 1)})))

    def test_matches_bruteforce_and_greedy_ratio(self, rng):
        checked = 0
        while checked < 80:
            K = int(rng.integers(2, 11))
            g = random_graph(rng, K, p_edge=float(rng.uniform(0.15, 0.7)))
            if brute_classify(g) == "non_observable":
                continue
            checked += 1
            exact, _ = weak_domination(g, mode="exact")
            assert exact == brute_weak_domination(g)
            greedy, _ = weak_domination(g, mode="greedy")
            assert exact <= greedy <= (math.log(K) + 1) * max(exact, 1) + 1e-9


class TestWeightedVariants:
    def test_loops_only_sums_inverse_probs(self):
        eps = np.array([0.5, 0.25, 0.1, 1.0])
        g = DirectedGraph.bandit(4)
        value, witness = weighted_independence_number(g, VertexWeights(1.0 / eps))
        assert value == pytest.approx((1.0 / eps).sum())
        assert witness == frozenset(range(4))

    def test_complete_max_weight(self):
        w = VertexWeights(np.array([1.0, 7.0, 3.0]))
        value, witness = weighted_independence_number(DirectedGraph.complete(3), w)
        assert value == 7.0 and witness == {1}

    def test_five_cycle_weighted(self):
        w = np.array([5.0, 1.0, 1.0, 1.0, 1.0])
        value, witness = weighted_independence_number(five_cycle(), VertexWeights(w))
        assert value == 6.0 and witness == {0, 2}

    def test_matches_bruteforce(self, rng):
        for _ in range(60):
            K = int(rng.integers(1, 9))
            g = random_graph(rng, K, p_edge=0.4)
            w = rng.uniform(0.1, 5.0, size=K)
            value, _ = weighted_independence_number(g, VertexWeights(w))
            assert value == pytest.approx(brute_independence(g, w)[0])

    def test_unit_weights_match_unweighted(self, rng):
        for _ in range(40):
            K = int(rng.integers(1, 9))
            g = random_graph(rng, K, p_edge=0.35)
            assert weighted_independence_number(g, VertexWeights.ones(K))[0] == pytest.approx(
                independence_number(g)[0]
            )

    def test_nonpositive_weight_rejected(self):
        with pytest.raises(ArgumentError):
            VertexWeights(np.array([1.0, 0.0]))
        with pytest.raises(ArgumentError):
            weighted_independence_number(DirectedGraph.bandit(2), np.array([1.0, -2.0]))


class TestWeightedDomination:
    def test_strongly_observable_zero(self):
        value, witness = weighted_weak_domination(DirectedGraph.bandit(3), VertexWeights.ones(3))
        assert value == 0.0 and witness == frozenset()

    def test_revealing_center_weight(self):
        w = np.array([3.0, 1.0, 1.0, 1.0, 1.0])
        value, witness = weighted_weak_domination(revealing_graph(5), VertexWeights(w))
        assert value == 3.0 and witness == {0}

    def test_two_stars_weighted(self):
        edges = [(0, j) for j in range(3)] + [(3, j) for j in range(3, 6)]
        g = DirectedGraph.from_edges(6, edges)
        w = np.array([2.0, 10.0, 10.0, 7.0, 10.0, 10.0])
        value, witness = weighted_weak_domination(g, VertexWeights(w))
        assert value == 9.0 and witness == {0, 3}

    def test_matches_bruteforce(self, rng):
        checked = 0
        while checked < 60:
            K = int(rng.integers(2, 10))
            g = random_graph(rng, K, p_edge=0.4)
            if brute_classify(g) == "non_observable":
                continue
            checked += 1
            w = rng.uniform(0.1, 5.0, size=K)
            value, _ = weighted_weak_domination(g, VertexWeights(w))
            assert value == pytest.approx(brute_weak_domination(g, w))

    def test_unit_weights_match_unweighted(self, rng):
        checked = 0
        while checked < 30:
            K = int(rng.integers(2, 10))
            g = random_graph(rng, K, p_edge=0.5)
            if brute_classify(g) == "non_observable":
                continue
            checked += 1
            assert weighted_weak_domination(g, VertexWeights.ones(K))[0] == pytest.approx(
                weak_domination(g)[0]
            )


class TestDeriveWeights:
    def test_faulty_bandits(self):
        eps = np.array([0.5, 0.25, 0.2])
        gs = StochasticFeedbackGraph.faulty_bandits(eps)
        w_minus, w_plus, sigma = derive_weights(gs)
        np.testing.assert_allclose(w_minus, 1.0 / eps)
        np.testing.assert_allclose(w_plus, 1.0 / eps)
        assert sigma == pytest.approx((1.0 / eps).sum())
        # the weighted independence number doubles the inverse-probability sum
        g = DirectedGraph.bandit(3)
        alpha_w = (
            weighted_independence_number(g, VertexWeights(w_minus))[0]
            + weighted_independence_number(g, VertexWeights(w_plus))[0]
        )
        assert alpha_w == pytest.approx(2 * (1.0 / eps).sum())

    def test_all_ones_complete(self):
        gs = StochasticFeedbackGraph(np.ones((4, 4)))
        w_minus, w_plus, sigma = derive_weights(gs)
        np.testing.assert_allclose(w_minus, 1.0)
        np.testing.assert_allclose(w_plus, 1.0)
        assert sigma == 4.0

    def test_undefined_entries_are_nan(self):
        p = np.zeros((2, 2))
        p[0, 1], p[1, 0] = 0.5, 0.25
        w_minus, w_plus, sigma = derive_weights(StochasticFeedbackGraph(p))
        assert w_minus[1] == pytest.approx(2.0) and w_minus[0] == pytest.approx(4.0)
        assert w_plus[0] == pytest.approx(2.0) and w_plus[1] == pytest.approx(4.0)
        assert sigma == 0.0
        p2 = np.zeros((2, 2))
        p2[0, 1] = 0.3
        w_minus2, w_plus2, _ = derive_weights(StochasticFeedbackGraph(p2))
        assert math.isnan(w_minus2[0]) and math.isnan(w_plus2[1])
