"""Experiment orchestration: instances, seed sweeps, regret curves, slopes.

Every run is a pure function of (config, seed): one master seed is split into
independent substreams for graph realizations, loss sampling, and the
learner, so traces replay byte-identically.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import environment as envmod
from .edge_catcher import EdgeCatcherOptions, edge_catcher
from .environment import Environment, FULL_GRAPH, LOCAL, split_streams
from .errors import ArgumentError, ConfigurationError
from .exp_weights import Exp3GPolicy, STRONG, WEAK
from .fileio import load_graph_file
from .graphs import DirectedGraph
from .otcg import OtcgOptions, run_otcg
from .stochastic import StochasticFeedbackGraph, support
from .traces import PHASE_SINGLE, RegretTrace

ALGORITHMS = ("edge_catcher", "otcg", "exp3g_strong", "exp3g_weak", "uniform_baseline")

#: feedback modes each algorithm can run under; first entry is the default
_ALGO_MODES = {
    "edge_catcher": (LOCAL,),
    "otcg": (FULL_GRAPH,),
    "exp3g_strong": (LOCAL, FULL_GRAPH),
    "exp3g_weak": (LOCAL, FULL_GRAPH),
    "uniform_baseline": (LOCAL, FULL_GRAPH),
}


@dataclass
class ExperimentConfig:
    instance: dict
    algorithm: str
    T: int
    seeds: Sequence[int] = tuple(range(20))  # seed averaging approximates the expectation
    mode: Optional[str] = None
    losses: Optional[dict] = None
    options: dict = field(default_factory=dict)
    threads: int = 1

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(f"unknown algorithm {self.algorithm!r}")
        allowed = _ALGO_MODES[self.algorithm]
        if self.mode is None:
            self.mode = allowed[0]
        if self.mode not in allowed:
            raise ConfigurationError(
                f"{self.algorithm} requires feedback mode in {allowed}, got {self.mode!r}"
            )
        if self.T < 1:
            raise ConfigurationError("horizon must be positive")
        if not self.seeds:
            raise ConfigurationError("at least one seed required")


def _build_graph(spec: dict, rng: np.random.Generator) -> tuple[StochasticFeedbackGraph, Optional[envmod.HardInstanceSpec], Optional[np.ndarray]]:
    """Returns (graph, hard-instance spec or None, losses or None)."""
    kind = spec.get("type")
    if kind == "file":
        g = load_graph_file(spec["path"])
        if isinstance(g, DirectedGraph):
            raise ConfigurationError("simulation instances need edge probabilities")
        return g, None, None
    if kind == "matrix":
        return StochasticFeedbackGraph(np.asarray(spec["p"], dtype=float)), None, None
    if kind == "erdos_renyi":
        return StochasticFeedbackGraph.erdos_renyi(spec["K"], spec["eps"]), None, None
    if kind == "faulty_bandits":
        return StochasticFeedbackGraph.faulty_bandits(spec["eps"]), None, None
    if kind == "revealing_action":
        return (
            StochasticFeedbackGraph.revealing_action(
                spec["K"], spec["p"], center=spec.get("center", 0)
            ),
            None,
            None,
        )
    if kind == "hard":
        return _build_hard(spec, rng)
    raise ConfigurationError(f"unknown instance type {kind!r}")


def _build_hard(spec: dict, rng: np.random.Generator):
    hkind = spec["kind"]
    eps, T = spec["eps"], spec["T"]
    if hkind == "c1":
        base = _hard_base_graph(spec)
        graph, losses, hs = envmod.gen_hard_strong_c1(base, eps, T, rng)
    elif hkind == "c2":
        graph, losses, hs = envmod.gen_hard_strong_c2(eps, T, spec.get("K", 2), rng)
    elif hkind == "c3":
        base = _hard_base_graph(spec)
        graph, losses, hs = envmod.gen_hard_weak_c3(base, eps, T, rng)
    elif hkind == "c4":
        graph, losses, hs = envmod.gen_hard_weak_c4(eps, T, rng)
    else:
        raise ConfigurationError(f"unknown hard-instance kind {hkind!r}")
    return graph, hs, losses


def _hard_base_graph(spec: dict) -> DirectedGraph:
    if "graph_path" in spec:
        g = load_graph_file(spec["graph_path"])
        if not isinstance(g, DirectedGraph):
            g = support(g)
        return g
    if "edges" in spec:
        return DirectedGraph.from_edges(spec["K"], [tuple(e) for e in spec["edges"]])
    raise ConfigurationError("hard instance needs graph_path or (K, edges)")


def build_losses(spec: Optional[dict], T: int, K: int, rng: np.random.Generator) -> np.ndarray:
    if spec is None:
        raise ConfigurationError("instance defines no losses; provide a losses spec")
    kind = spec.get("type")
    if kind == "constant":
        vals = np.asarray(spec["values"], dtype=float)
        if vals.shape != (K,):
            raise ConfigurationError("constant losses need one value per action")
        return envmod.validate_loss_table(np.tile(vals, (T, 1)))
    if kind == "bernoulli":
        means = np.asarray(spec["means"], dtype=float)
        if means.shape != (K,):
            raise ConfigurationError("bernoulli losses need one mean per action")
        return envmod.validate_loss_table((rng.random((T, K)) < means).astype(float))
    if kind == "table":
        return envmod.validate_loss_table(np.asarray(spec["values"], dtype=float)[:T])
    if kind == "alternating":
        t = np.arange(T)[:, None]
        k = np.arange(K)[None, :]
        return envmod.validate_loss_table(((t + k) % 2).astype(float))
    raise ConfigurationError(f"unknown losses type {kind!r}")


def _instance_digest(graph: StochasticFeedbackGraph, losses: np.ndarray) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(graph.p).tobytes())
    h.update(np.ascontiguousarray(losses).tobytes())
    return h.hexdigest()[:16]


def _run_uniform(env: Environment, T: int, rng: np.random.Generator) -> RegretTrace:
    actions = rng.integers(0, env.K, size=T)
    if env.mode == LOCAL:
        _, _, incurred = env.step_batch(actions)
    else:
        incurred = np.empty(T)
        for t in range(T):
            env.step(int(actions[t]))
            incurred[t] = env.losses[t, actions[t]]
    return RegretTrace(
        T=T, K=env.K, actions=actions.astype(np.int64), losses=incurred,
        loss_table=env.losses[:T].copy(),
        phases=np.full(T, PHASE_SINGLE, dtype=np.int8),
        metadata={"algorithm": "uniform_baseline"},
    )


def _run_exp3g(env: Environment, T: int, rng: np.random.Generator, regime: str, options: dict) -> RegretTrace:
    """Run a deterministic-graph policy directly on the support of the instance.

    Exact for instances whose positive probabilities are 1; with genuinely
    stochastic edges the importance weights keep the graph-based observation
    probabilities, so estimates are conservative.
    """
    supp = support(env.graph)
    policy = Exp3GPolicy(
        supp, T, regime,
        gamma=options.get("gamma"), eta=options.get("eta"),
        record_history=options.get("record_history", False),
    )
    actions = np.empty(T, dtype=np.int64)
    incurred = np.empty(T)
    out_adj = supp.adjacency
    for t in range(T):
        pi = policy.distribution()
        a = int(rng.choice(env.K, p=pi))
        ev = env.step(a)
        feed = {i: loss for i, loss in ev.observations if out_adj[a, i]}
        policy.update(a, feed)
        actions[t] = a
        incurred[t] = env.losses[t, a]
    return RegretTrace(
        T=T, K=env.K, actions=actions, losses=incurred,
        loss_table=env.losses[:T].copy(),
        phases=np.full(T, PHASE_SINGLE, dtype=np.int8),
        metadata={"algorithm": f"exp3g_{regime}", "policy_regime": regime},
    )


def run_one(config: ExperimentConfig, seed: int) -> RegretTrace:
    realize_rng, loss_rng, learner_rng = split_streams(seed)
    graph, hard_spec, losses = _build_graph(config.instance, loss_rng)
    if losses is None:
        losses = build_losses(config.losses, config.T, graph.K, loss_rng)
    if losses.shape[0] < config.T:
        raise ConfigurationError("loss table shorter than the horizon")
    env = Environment(graph, losses, mode=config.mode, rng=realize_rng)

    opts = dict(config.options)
    if config.algorithm == "edge_catcher":
        ec_opts = EdgeCatcherOptions(
            phi_check=opts.pop("phi_check", "every"),
            phi_scale=opts.pop("phi_scale", 1.0),
            strong_gamma=opts.pop("strong_gamma", None),
            strong_eta=opts.pop("strong_eta", None),
            weak_gamma=opts.pop("weak_gamma", None),
            weak_eta=opts.pop("weak_eta", None),
        )
        trace = edge_catcher(env, config.T, rng=learner_rng, options=ec_opts)
    elif config.algorithm == "otcg":
        oc_opts = OtcgOptions(
            commit_log_term=opts.pop("commit_log_term", "3K2T2"),
            lambda_check=opts.pop("lambda_check", "every"),
            record_diagnostics=opts.pop("record_diagnostics", False),
        )
        trace = run_otcg(env, config.T, rng=learner_rng, options=oc_opts)
    elif config.algorithm == "uniform_baseline":
        trace = _run_uniform(env, config.T, learner_rng)
    elif config.algorithm in ("exp3g_strong", "exp3g_weak"):
        regime = STRONG if config.algorithm.endswith("strong") else WEAK
        trace = _run_exp3g(env, config.T, learner_rng, regime, opts)
    else:  # pragma: no cover - guarded in __post_init__
        raise ConfigurationError(config.algorithm)

    trace.metadata.setdefault("seed", seed)
    trace.metadata.setdefault("mode", config.mode)
    trace.metadata.setdefault("instance_digest", _instance_digest(graph, losses))
    if hard_spec is not None:
        trace.metadata.setdefault("hard_instance", {
            "kind": hard_spec.kind, "beta": hard_spec.beta,
            "hidden_index": hard_spec.hidden_index, "hidden_sign": hard_spec.hidden_sign,
        })
    return trace


def run(config: ExperimentConfig) -> list[RegretTrace]:
    """One trace per seed, deterministic per seed, merged in seed order."""
    seeds = list(config.seeds)
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            return list(pool.map(lambda s: run_one(config, s), seeds))
    return [run_one(config, s) for s in seeds]


# ---------------------------------------------------------------------------
# Rate estimation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    ci_low: float
    ci_high: float
    degenerate: bool
    mean_regrets: dict


def slope(
    traces: Sequence[RegretTrace],
    T_grid: Optional[Sequence[int]] = None,
    *,
    n_boot: int = 1000,
    rng: Optional[np.random.Generator] = None,
) -> SlopeFit:
    """Least-squares slope of log mean-regret against log horizon.

    Needs at least three horizons; the bootstrap resamples seeds per horizon.
    A nonpositive mean regret at any horizon flags the fit as degenerate.
    """
    by_T: dict[int, list[float]] = {}
    for tr in traces:
        by_T.setdefault(tr.T, []).append(tr.final_regret())
    if T_grid is None:
        T_grid = sorted(by_T)
    T_grid = [int(t) for t in T_grid]
    if len(T_grid) < 3:
        raise ArgumentError("need at least three horizons for a slope fit")
    missing = [t for t in T_grid if t not in by_T]
    if missing:
        raise ArgumentError(f"no traces for horizons {missing}")
    samples = {t: np.asarray(by_T[t], dtype=float) for t in T_grid}
    means = {t: float(s.mean()) for t, s in samples.items()}
    if any(m <= 0 for m in means.values()):
        nan = float("nan")
        return SlopeFit(nan, nan, nan, True, means)

    def fit(ms: Sequence[float]) -> float:
        x = np.log(np.asarray(T_grid, dtype=float))
        y = np.log(np.asarray(ms, dtype=float))
        return float(np.polyfit(x, y, 1)[0])

    point = fit([means[t] for t in T_grid])
    rng = rng if rng is not None else np.random.default_rng(0)
    boots = []
    for _ in range(n_boot):
        ms = []
        ok = True
        for t in T_grid:
            s = samples[t]
            m = float(s[rng.integers(0, len(s), size=len(s))].mean())
            if m <= 0:
                ok = False
                break
            ms.append(m)
        if ok:
            boots.append(fit(ms))
    if boots:
        lo, hi = np.percentile(boots, [2.5, 97.5])
    else:
        lo = hi = point
    return SlopeFit(point, float(lo), float(hi), False, means)


def config_from_dict(data: dict) -> ExperimentConfig:
    known = {f for f in ExperimentConfig.__dataclass_fields__}
    unknown = set(data) - known
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    return ExperimentConfig(**data)


def save_summary(traces: Sequence[RegretTrace], path) -> None:
    rows = [
        {
            "seed": tr.metadata.get("seed"),
            "T": tr.T,
            "final_regret": tr.final_regret(),
            "algorithm": tr.metadata.get("algorithm"),
        }
        for tr in traces
    ]
    with open(path, "w") as fh:
        json.dump(rows, fh, indent=2)
