"""Regret traces: per-round records of a simulation plus derived regret.

Regret is always derived from the stored loss table, never stored itself;
the comparator is the best fixed action at the final horizon.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
import numpy as np

from .errors import ArgumentError

CSV_SCHEMA_VERSION = "stochfg-trace v1"

PHASE_ESTIMATION = 0
PHASE_COMMITTED = 1
PHASE_ARBITRARY = 2
PHASE_FALLBACK = 3
PHASE_OPTIMISTIC = 4
PHASE_SINGLE = 5

PHASE_NAMES = {
    PHASE_ESTIMATION: "estimation",
    PHASE_COMMITTED: "committed",
    PHASE_ARBITRARY: "arbitrary",
    PHASE_FALLBACK: "fallback",
    PHASE_OPTIMISTIC: "optimistic",
    PHASE_SINGLE: "single",
}


@dataclass
class RegretTrace:
    """One simulation run: actions, incurred losses, phases, and metadata."""

    T: int
    K: int
    actions: np.ndarray
    losses: np.ndarray  # loss incurred by the learner each round
    loss_table: np.ndarray  # full oblivious T x K table
    phases: np.ndarray  # int8 phase codes per round
    metadata: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)  # optional per-round diagnostic arrays

    def __post_init__(self):
        if not (len(self.actions) == len(self.losses) == len(self.phases) == self.T):
            raise ArgumentError("per-round arrays must have length T")
        if self.loss_table.shape != (self.T, self.K):
            raise ArgumentError("loss table must be T x K")

    def cum_learner(self) -> np.ndarray:
        return np.cumsum(self.losses)

    def cum_actions(self) -> np.ndarray:
        return np.cumsum(self.loss_table, axis=0)

    def best_action(self) -> int:
        return int(np.argmin(self.loss_table.sum(axis=0)))

    def regret_curve(self) -> np.ndarray:
        """Cumulative regret against the best fixed action at horizon T."""
        k = self.best_action()
        return self.cum_learner() - np.cumsum(self.loss_table[:, k])

    def final_regret(self) -> float:
        return float(self.regret_curve()[-1])

    def to_csv(self, path) -> None:
        cum = self.cum_learner()
        extra_keys = [k for k, v in self.extras.items() if np.ndim(v) == 1 and len(v) == self.T]
        with open(path, "w", newline="") as fh:
            fh.write(f"# {CSV_SCHEMA_VERSION}\n")
            writer = csv.writer(fh)
            writer.writerow(["t", "action", "loss", "cum_loss", "phase", *extra_keys])
            for t in range(self.T):
                row = [
                    t,
                    int(self.actions[t]),
                    f"{self.losses[t]:.10g}",
                    f"{cum[t]:.10g}",
                    PHASE_NAMES.get(int(self.phases[t]), str(self.phases[t])),
                ]
                row.extend(f"{self.extras[k][t]:.10g}" for k in extra_keys)
                writer.writerow(row)

    def sidecar(self) -> dict:
        out = {"T": self.T, "K": self.K, "final_regret": self.final_regret()}
        out.update(_jsonable(self.metadata))
        return out

    def to_sidecar_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.sidecar(), fh, indent=2, sort_keys=True)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj
