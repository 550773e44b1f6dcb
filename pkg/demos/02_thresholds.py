"""Thresholding a stochastic feedback graph and picking the best threshold.

Raising the threshold sparsifies the support (smaller alpha/delta) but
divides the effective feedback rate; the optimizers scan the at-most-K^2
candidate thresholds where the support actually changes.
"""

import numpy as np

from stochfg import (
    NOT_ACHIEVABLE,
    StochasticFeedbackGraph,
    candidate_thresholds,
    classify,
    optimal_threshold_delta_sigma,
    optimal_threshold_strong,
    optimal_threshold_weak,
    support,
    threshold,
)
from stochfg.edge_catcher import phi, phi_components

rng = np.random.default_rng(0)

# a blend: reliable self-loops, a flaky one, and sparse cross edges
p = np.zeros((4, 4))
np.fill_diagonal(p, [1.0, 1.0, 1.0, 0.15])
p[0, 3] = 0.6
p[1, 2] = 0.05
gs = StochasticFeedbackGraph(p)

print("candidate thresholds:", candidate_thresholds(gs))
for eps in candidate_thresholds(gs):
    supp = support(threshold(gs, float(eps)))
    print(f"  eps={eps:<5} support edges={len(supp.edges):>2}  class={classify(supp).graph_class.value}")

strong = optimal_threshold_strong(gs)
weak = optimal_threshold_weak(gs)
print()
print("best strongly observable threshold:", strong)
print("best observable threshold:", weak)

T = 10_000
report = phi_components(gs, T)
print()
print(f"committed-regret bound at T={T}:")
print(f"  strong branch {report.strong_value:.1f}  weak branch {report.weak_value:.1f}")
print(f"  stopping value phi = {phi(gs, T):.1f}")

ds = optimal_threshold_delta_sigma(gs, T)
print("commit-phase threshold (weighted domination + self-observability):", ds)

# an unobservable matrix has no workable threshold at all
hopeless = np.zeros((3, 3))
hopeless[0, 1] = 0.5
print()
print("single cross edge only:", optimal_threshold_strong(StochasticFeedbackGraph(hopeless)),
      "/", optimal_threshold_weak(StochasticFeedbackGraph(hopeless)))
assert optimal_threshold_weak(StochasticFeedbackGraph(hopeless)) is NOT_ACHIEVABLE
