"""An end-to-end explore-then-commit run with local stochastic feedback.

The learner sees only the realized out-neighborhood of the action it plays.
On a revealing-action instance it must (1) discover the center's edges,
(2) commit to the weakly observable regime, and (3) learn through blocks
long enough that each committed edge realizes at least once per block.
"""

from pathlib import Path

import numpy as np

from stochfg import Environment, StochasticFeedbackGraph
from stochfg.edge_catcher import EdgeCatcherOptions, edge_catcher
from stochfg.traces import PHASE_NAMES

T, K = 30_000, 3
# the center (action 0) reveals every loss with probability 0.2 but is itself
# the best action here, so exploration is cheap; swap the losses to make it
# expensive and watch the regret grow
graph = StochasticFeedbackGraph.revealing_action(K, 0.2)
losses = np.tile([[0.1, 0.9, 0.9]], (T, 1))

env = Environment(graph, losses, rng=np.random.default_rng(0))
trace = edge_catcher(
    env, T,
    rng=np.random.default_rng(1),
    # verbatim stopping constants need horizons ~1e7 before committing on
    # weakly observable supports; scale the stopping function at desk scale
    options=EdgeCatcherOptions(phi_scale=0.05),
)

meta = trace.metadata
print(f"stopped estimation after {meta['tau_hat']} sweeps, regime={meta['regime']}, "
      f"eps*={meta.get('eps_star'):.3f}, blocks of {meta.get('block_length')} rounds")
for code in np.unique(trace.phases):
    n = int((trace.phases == code).sum())
    print(f"  phase {PHASE_NAMES[int(code)]:<12} {n:>6} rounds")

curve = trace.regret_curve()
for frac in (0.25, 0.5, 0.75, 1.0):
    t = int(T * frac) - 1
    print(f"  regret at t={t + 1:>6}: {curve[t]:8.1f}")

out = Path("edge_catcher_demo.csv")
trace.to_csv(out)
trace.to_sidecar_json(out.with_suffix(".json"))
print(f"wrote {out} and {out.with_suffix('.json')}")
