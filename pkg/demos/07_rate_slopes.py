"""Regret growth exponents across observability regimes.

Sweeps the explore-then-commit learner over three horizons on a strongly
observable and a weakly observable instance and fits log-regret against
log-horizon.  Expect roughly T^(1/2) growth in the strong regime and
T^(2/3) in the weak one (the windows are wide: desk-scale horizons mix the
estimation and committed phases).

Takes a couple of minutes with the default seed count.
"""

import numpy as np

from stochfg import Environment, StochasticFeedbackGraph
from stochfg.edge_catcher import EdgeCatcherOptions, edge_catcher
from stochfg.harness import slope

T_GRID = (4_000, 16_000, 64_000)
SEEDS = 10


def sweep(pmat, loss_row, phi_scale):
    traces = []
    for T in T_GRID:
        losses = np.tile([loss_row], (T, 1))
        for seed in range(SEEDS):
            env = Environment(StochasticFeedbackGraph(pmat), losses,
                              rng=np.random.default_rng(seed))
            traces.append(edge_catcher(env, T, rng=np.random.default_rng(500 + seed),
                                       options=EdgeCatcherOptions(phi_scale=phi_scale)))
    return slope(traces)


strong = sweep(np.full((2, 2), 0.2), [0.1, 0.9], phi_scale=1.0)
rev = np.zeros((3, 3))
rev[0, :] = 0.2
weak = sweep(rev, [0.1, 0.9, 0.9], phi_scale=0.05)

for name, fit in (("strongly observable", strong), ("weakly observable", weak)):
    means = "  ".join(f"T={t}: {m:8.0f}" for t, m in fit.mean_regrets.items())
    print(f"{name:>20}: slope {fit.slope:.3f}  (95% CI {fit.ci_low:.3f}..{fit.ci_high:.3f})")
    print(f"{'':>20}  {means}")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 4))
    for name, fit in (("strong", strong), ("weak", weak)):
        ts = sorted(fit.mean_regrets)
        ax.loglog(ts, [fit.mean_regrets[t] for t in ts], marker="o",
                  label=f"{name} (slope {fit.slope:.2f})")
    ax.set_xlabel("horizon T")
    ax.set_ylabel("mean regret")
    ax.legend()
    fig.tight_layout()
    fig.savefig("rate_slopes.png", dpi=150)
    print("wrote rate_slopes.png")
except ImportError:
    pass
