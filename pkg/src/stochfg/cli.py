"""Command-line interface: simulate, params, hard-instance."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import environment as envmod
from .errors import ArgumentError, ConfigurationError, StochfgError
from .fileio import load_graph_file
from .graphs import (
    DirectedGraph,
    classify,
    derive_weights,
    independence_number,
    weak_domination,
)
from .harness import ExperimentConfig, config_from_dict, run, save_summary
from .stochastic import (
    NOT_ACHIEVABLE,
    StochasticFeedbackGraph,
    optimal_threshold_strong,
    optimal_threshold_weak,
    support,
)

DEFAULT_OUT_ENV = "STOCHFG_OUT"


def _out_dir(arg: str | None) -> Path:
    out = Path(arg or os.environ.get(DEFAULT_OUT_ENV, "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_seeds(arg: str) -> list[int]:
    return [int(s) for s in arg.split(",") if s.strip() != ""]


def cmd_simulate(args: argparse.Namespace) -> int:
    if args.config:
        data = json.loads(Path(args.config).read_text())
        config = config_from_dict(data)
        if args.T:
            config.T = args.T
        if args.seeds:
            config.seeds = _parse_seeds(args.seeds)
        if args.threads:
            config.threads = args.threads
    else:
        if not args.graph or not args.algorithm or not args.T:
            raise ConfigurationError("simulate needs --config or (--graph, --algorithm, --T)")
        losses = json.loads(args.losses) if args.losses else None
        options = json.loads(args.options) if args.options else {}
        if args.phi_scale is not None:
            options["phi_scale"] = args.phi_scale
        if args.phi_check:
            options["phi_check"] = args.phi_check
        config = ExperimentConfig(
            instance={"type": "file", "path": args.graph},
            algorithm=args.algorithm,
            T=args.T,
            seeds=_parse_seeds(args.seeds) if args.seeds else [args.seed],
            mode=args.mode,
            losses=losses,
            options=options,
            threads=args.threads or 1,
        )
    traces = run(config)
    out = _out_dir(args.out)
    for tr in traces:
        seed = tr.metadata.get("seed")
        stem = f"{config.algorithm}_T{config.T}_seed{seed}"
        tr.to_csv(out / f"{stem}.csv")
        tr.to_sidecar_json(out / f"{stem}.json")
    save_summary(traces, out / f"{config.algorithm}_T{config.T}_summary.json")
    print(f"wrote {len(traces)} trace(s) to {out}")
    return 0


def cmd_params(args: argparse.Namespace) -> int:
    g = load_graph_file(args.graph)
    report: dict = {}
    if isinstance(g, StochasticFeedbackGraph):
        supp = support(g)
        report["stochastic"] = True
        strong = optimal_threshold_strong(g)
        weak = optimal_threshold_weak(g)
        report["eps_star_strong"] = (
            None if strong is NOT_ACHIEVABLE else {"eps": strong.eps, "alpha": strong.value}
        )
        report["eps_star_weak"] = (
            None if weak is NOT_ACHIEVABLE else {"eps": weak.eps, "delta": weak.value}
        )
        w_minus, w_plus, sigma = derive_weights(g)
        report["sigma"] = sigma
        report["w_minus"] = [None if math.isnan(x) else x for x in w_minus]
        report["w_plus"] = [None if math.isnan(x) else x for x in w_plus]
    else:
        supp = g
        report["stochastic"] = False
    cls = classify(supp)
    report["K"] = supp.K
    report["observability"] = cls.graph_class.value
    report["alpha"] = independence_number(supp)[0] if supp.K <= 32 else None
    report["delta"] = weak_domination(supp)[0] if cls.is_observable and supp.K <= 20 else None
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def cmd_hard_instance(args: argparse.Namespace) -> int:
    rng = np.random.default_rng(args.seed)
    if args.kind == "c1":
        base = _require_graph(args)
        graph, losses, spec = envmod.gen_hard_strong_c1(base, args.eps, args.T, rng, seed=args.seed)
    elif args.kind == "c2":
        graph, losses, spec = envmod.gen_hard_strong_c2(args.eps, args.T, args.K or 2, rng, seed=args.seed)
    elif args.kind == "c3":
        base = _require_graph(args)
        graph, losses, spec = envmod.gen_hard_weak_c3(base, args.eps, args.T, rng, seed=args.seed)
    elif args.kind == "c4":
        graph, losses, spec = envmod.gen_hard_weak_c4(args.eps, args.T, rng, seed=args.seed)
    else:
        raise ConfigurationError(f"unknown kind {args.kind!r}")
    dump = envmod.dump_instance(graph, losses, spec, include_losses=args.full_table)
    if args.out:
        Path(args.out).write_text(json.dumps(dump, indent=2))
        print(f"wrote {args.out}")
    else:
        print(json.dumps({k: v for k, v in dump.items() if k != "losses"}, indent=2))
    return 0


def _require_graph(args: argparse.Namespace) -> DirectedGraph:
    if not args.graph:
        raise ConfigurationError(f"kind {args.kind} needs --graph")
    g = load_graph_file(args.graph)
    if isinstance(g, StochasticFeedbackGraph):
        g = support(g)
    return g


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stochfg")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a learner on an instance and write traces")
    sim.add_argument("--config", help="JSON experiment config file")
    sim.add_argument("--graph", help="graph file (edge list or dense JSON)")
    sim.add_argument("--algorithm", choices=["edge_catcher", "otcg", "exp3g_strong", "exp3g_weak", "uniform_baseline"])
    sim.add_argument("--T", type=int)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--seeds", help="comma-separated seed list")
    sim.add_argument("--mode", choices=["local", "full_graph"])
    sim.add_argument("--losses", help="JSON losses spec")
    sim.add_argument("--options", help="JSON algorithm options")
    sim.add_argument("--phi-scale", type=float, dest="phi_scale")
    sim.add_argument("--phi-check", choices=["every", "pow2"], dest="phi_check")
    sim.add_argument("--threads", type=int)
    sim.add_argument("--out", help=f"output directory (default ${DEFAULT_OUT_ENV} or .)")
    sim.set_defaults(func=cmd_simulate)

    par = sub.add_parser("params", help="combinatorial parameter report for a graph file")
    par.add_argument("graph")
    par.set_defaults(func=cmd_params)

    hard = sub.add_parser("hard-instance", help="generate a lower-bound instance dump")
    hard.add_argument("--kind", required=True, choices=["c1", "c2", "c3", "c4"])
    hard.add_argument("--eps", type=float, required=True)
    hard.add_argument("--T", type=int, required=True)
    hard.add_argument("--K", type=int)
    hard.add_argument("--graph")
    hard.add_argument("--seed", type=int, default=0)
    hard.add_argument("--full-table", action="store_true", dest="full_table")
    hard.add_argument("--out")
    hard.set_defaults(func=cmd_hard_instance)
    return parser


def cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ConfigurationError, ArgumentError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except StochfgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli())


if __name__ == "__main__":
    main()
