"""Graph and instance file formats.

Edge-list text format: first line `K`, then one `i j` or `i j p` line per
edge.  A probability column on every line makes the file a stochastic graph;
no probability column anywhere makes it deterministic; mixing is an error.
Stochastic graphs are also accepted as dense JSON: {"K": n, "p": [[...]]}.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Union

import numpy as np

from .errors import ArgumentError
from .graphs import DirectedGraph
from .stochastic import StochasticFeedbackGraph

GraphLike = Union[DirectedGraph, StochasticFeedbackGraph]


def parse_graph_text(text: str) -> GraphLike:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise ArgumentError("empty graph file")
    try:
        K = int(lines[0])
    except ValueError as exc:
        raise ArgumentError(f"first line must be the vertex count, got {lines[0]!r}") from exc
    edges = []
    probs = []
    arities = set()
    for ln in lines[1:]:
        parts = ln.split()
        arities.add(len(parts))
        if len(parts) == 2:
            edges.append((int(parts[0]), int(parts[1])))
        elif len(parts) == 3:
            edges.append((int(parts[0]), int(parts[1])))
            probs.append(float(parts[2]))
        else:
            raise ArgumentError(f"bad edge line {ln!r}")
    if arities == {2} or not edges:
        return DirectedGraph.from_edges(K, edges)
    if arities == {3}:
        p = np.zeros((K, K))
        for (i, j), q in zip(edges, probs):
            p[i, j] = q
        return StochasticFeedbackGraph(p)
    raise ArgumentError("edge lines mix bare and probability-weighted entries")


def load_graph_file(path) -> GraphLike:
    path = Path(path)
    if path.suffix == ".json":
        data = json.loads(path.read_text())
        p = np.asarray(data["p"], dtype=float)
        if p.shape != (data["K"], data["K"]):
            raise ArgumentError("JSON graph: p must be K x K")
        return StochasticFeedbackGraph(p)
    return parse_graph_text(path.read_text())


def write_graph_text(graph: GraphLike, path) -> None:
    lines = []
    if isinstance(graph, DirectedGraph):
        lines.append(str(graph.K))
        for i, j in sorted(graph.edges):
            lines.append(f"{i} {j}")
    else:
        lines.append(str(graph.K))
        for i, j in zip(*np.nonzero(graph.p)):
            lines.append(f"{i} {j} {graph.p[i, j]:.12g}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_graph_json(graph: StochasticFeedbackGraph, path) -> None:
    Path(path).write_text(json.dumps({"K": graph.K, "p": graph.p.tolist()}))
