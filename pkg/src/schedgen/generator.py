"""Random task graph generation for benchmarking.

Three steps: sample node wcets uniformly, sample the requested number of
forward edges (src id < dst id, so the result is acyclic by construction),
then funnel multiple sinks into a single virtual one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Edge, Node, TaskGraph, augment_single_sink

RNG_NAME = "numpy-pcg64"


@dataclass(frozen=True)
class GenSpec:
    """Parameters for one random graph.

    density is relative to the complete undirected graph on n nodes; the
    realized edge count is round(density * n * (n - 1) / 2), at least 1.
    """

    n: int
    density: float
    seed: int
    wcet_range: tuple[float, float] = (1.0, 10.0)
    comm_range: tuple[float, float] = (1.0, 10.0)

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError("need at least 2 nodes")
        if not (0.0 < self.density <= 1.0):
            raise ValueError("density must be in (0, 1]")
        for lo, hi in (self.wcet_range, self.comm_range):
            if lo < 0 or hi < lo:
                raise ValueError("ranges must satisfy 0 <= lo <= hi")


def edge_count(spec: GenSpec) -> int:
    pairs = spec.n * (spec.n - 1) // 2
    return max(1, round(spec.density * pairs))


def _unrank_pair(index: int, n: int) -> tuple[int, int]:
    # Pairs (i, j) with i < j in lexicographic order; row i holds n-1-i pairs.
    i = 0
    remaining = index
    row = n - 1
    while remaining >= row:
        remaining -= row
        i += 1
        row -= 1
    return i, i + 1 + remaining


def generate(spec: GenSpec) -> TaskGraph:
    """Deterministic in spec.seed; returns a single-sink graph."""
    rng = np.random.default_rng(spec.seed)
    n = spec.n
    wcets = rng.uniform(spec.wcet_range[0], spec.wcet_range[1], size=n)
    total_pairs = n * (n - 1) // 2
    k = edge_count(spec)
    chosen = np.sort(rng.choice(total_pairs, size=k, replace=False))
    costs = rng.uniform(spec.comm_range[0], spec.comm_range[1], size=k)
    nodes = [Node(i, f"n{i}", float(wcets[i])) for i in range(n)]
    edges = []
    for idx, cost in zip(chosen, costs):
        i, j = _unrank_pair(int(idx), n)
        edges.append(Edge(i, j, float(cost)))
    meta = {
        "generator": {
            "n": n,
            "density": spec.density,
            "seed": spec.seed,
            "wcet_range": list(spec.wcet_range),
            "comm_range": list(spec.comm_range),
            "rng_name": RNG_NAME,
        }
    }
    return augment_single_sink(TaskGraph(nodes, edges, meta))
