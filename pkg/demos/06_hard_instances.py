"""Lower-bound instance generators and their guaranteed regret floors.

Each construction hides a slightly-better action behind edges that realize
with probability eps, calibrating the hidden gap so that distinguishing the
best action takes the whole horizon.  Against a non-adaptive (uniform)
learner the expected regret floor is beta*T/2 by symmetry.
"""

import json

import numpy as np

from stochfg import (
    DirectedGraph,
    gen_hard_strong_c1,
    gen_hard_strong_c2,
    gen_hard_weak_c3,
    gen_hard_weak_c4,
)
from stochfg.environment import dump_instance
from stochfg.harness import ExperimentConfig, run

T, eps = 100_000, 0.1
rng = np.random.default_rng(0)

pentagon = DirectedGraph.from_edges(5, [(i, (i + 1) % 5) for i in range(5)]
                                    + [((i + 1) % 5, i) for i in range(5)])
two_stars = DirectedGraph.from_edges(8, [(0, j) for j in range(8)] + [(1, j) for j in range(8)])

instances = [
    ("strong/large-independence", lambda r: gen_hard_strong_c1(pentagon, eps, T, r)),
    ("strong/two-point", lambda r: gen_hard_strong_c2(eps, T, 5, r)),
    ("weak/hidden-on-independent-set", lambda r: gen_hard_weak_c3(two_stars, eps, T, r)),
    ("weak/three-action", lambda r: gen_hard_weak_c4(eps, T, r)),
]

for name, gen in instances:
    graph, losses, spec = gen(rng)
    print(f"{name:<32} K={spec.K} beta={spec.beta:.3e} hidden={spec.hidden_index} "
          f"targets={spec.target_set}")

# the uniform baseline cannot beat the constructed floor
beta = gen_hard_strong_c2(eps, T, 5, np.random.default_rng(0))[2].beta
regrets = []
for seed in range(20):
    cfg = ExperimentConfig(
        instance={"type": "hard", "kind": "c2", "eps": eps, "T": T, "K": 5},
        algorithm="uniform_baseline", T=T, seeds=(seed,),
    )
    regrets.append(run(cfg)[0].final_regret())
print()
print(f"uniform baseline on the two-point instance: mean regret {np.mean(regrets):.1f} "
      f"(floor beta*T/2 = {beta * T / 2:.1f})")

# instances serialize with enough detail to replay exactly
graph, losses, spec = gen_hard_weak_c4(eps, 1000, np.random.default_rng(3), seed=3)
blob = dump_instance(graph, losses, spec)
print()
print("replay record:", json.dumps({k: v for k, v in blob.items() if k != "p"}, indent=2)[:400])
