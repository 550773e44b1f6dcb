"""Combinatorial parameters of feedback graphs.

Walks through the observability taxonomy and the independence / weak
domination numbers on a few canonical graphs, then shows the weighted
variants driven by edge probabilities.
"""

import numpy as np

from stochfg import (
    DirectedGraph,
    StochasticFeedbackGraph,
    VertexWeights,
    classify,
    derive_weights,
    independence_number,
    neighborhoods,
    weak_domination,
    weighted_independence_number,
    weighted_weak_domination,
)

# --- three canonical topologies -------------------------------------------

bandit = DirectedGraph.bandit(5)            # self-loops only
full_info = DirectedGraph.complete(5)       # everyone sees everyone
revealing = DirectedGraph.from_edges(5, [(0, j) for j in range(5)])  # one informative action

for name, g in (("bandit", bandit), ("full information", full_info), ("revealing action", revealing)):
    cls = classify(g)
    alpha, alpha_set = independence_number(g)
    line = f"{name:>18}: {cls.graph_class.value:<20} alpha={alpha} witness={sorted(alpha_set)}"
    if cls.is_observable:
        delta, delta_set = weak_domination(g)
        line += f" delta={delta} dominators={sorted(delta_set)}"
    print(line)

print()
print("out-neighborhood of the revealing action:", sorted(neighborhoods(revealing, 0)[1]))
print("in-neighborhood of a leaf:", sorted(neighborhoods(revealing, 3)[0]))

# --- weighted parameters from edge probabilities ---------------------------

# "faulty bandits": each arm's self-observation only fires with probability eps_i
eps = np.array([1.0, 1.0, 0.5, 0.25, 0.1])
gs = StochasticFeedbackGraph.faulty_bandits(eps)
w_minus, w_plus, sigma = derive_weights(gs)
print()
print("faulty bandits with self-loop probabilities", eps)
print("  inverse worst incoming probabilities:", w_minus)
print("  self-observability sigma = sum 1/eps_i =", sigma)

alpha_w = (
    weighted_independence_number(bandit, VertexWeights(w_minus))[0]
    + weighted_independence_number(bandit, VertexWeights(w_plus))[0]
)
print("  weighted independence number (both directions):", alpha_w, "= 2 * sigma")

# a weighted dominating set prefers the cheap (likely-to-fire) revealer
two_stars = DirectedGraph.from_edges(6, [(0, j) for j in range(3)] + [(3, j) for j in range(3, 6)])
weights = VertexWeights(np.array([2.0, 9.0, 9.0, 7.0, 9.0, 9.0]))
value, witness = weighted_weak_domination(two_stars, weights)
print()
print(f"two revealing stars, center weights 2 and 7: delta_w = {value} via {sorted(witness)}")
