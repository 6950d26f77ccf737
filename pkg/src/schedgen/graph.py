"""Task graph model: weighted layer DAGs with per-edge communication costs.

A task graph is a quadruplet (V, E, t, w): nodes carry a worst-case
execution time t(v), directed edges carry a communication cost w(e) that
is paid only when producer and consumer run on different cores.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

SINK_LABEL = "sink"

#: Absolute tolerance for all floating point time comparisons.
TOL = 1e-9


class InvalidGraphError(ValueError):
    """Raised when an operation requires a valid graph and gets a broken one."""


@dataclass(frozen=True)
class Node:
    id: int
    label: str
    wcet: float


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    cost: float
    elements: int | None = None  # payload size in floats, None = generator default


@dataclass
class TaskGraph:
    """Directed task graph with dense node ids 0..n-1.

    Adjacency is materialized once at construction; instances are treated
    as immutable after that.
    """

    nodes: list[Node]
    edges: list[Edge]
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        n = len(self.nodes)
        self._parents: list[list[int]] = [[] for _ in range(n)]
        self._children: list[list[int]] = [[] for _ in range(n)]
        self._edge_map: dict[tuple[int, int], Edge] = {}
        for e in self.edges:
            if 0 <= e.src < n and 0 <= e.dst < n:
                self._parents[e.dst].append(e.src)
                self._children[e.src].append(e.dst)
                self._edge_map[(e.src, e.dst)] = e
        for lst in self._parents:
            lst.sort()
        for lst in self._children:
            lst.sort()

    def __len__(self) -> int:
        return len(self.nodes)

    def parents(self, v: int) -> list[int]:
        return self._parents[v]

    def children(self, v: int) -> list[int]:
        return self._children[v]

    def edge(self, src: int, dst: int) -> Edge:
        return self._edge_map[(src, dst)]

    def wcet(self, v: int) -> float:
        return self.nodes[v].wcet

    def comm_cost(self, src: int, dst: int) -> float:
        return self._edge_map[(src, dst)].cost

    def sinks(self) -> list[int]:
        return [v.id for v in self.nodes if not self._children[v.id]]

    def sources(self) -> list[int]:
        return [v.id for v in self.nodes if not self._parents[v.id]]


def validate(graph: TaskGraph) -> list[str]:
    """Return a list of structural problems; empty means the graph is usable.

    Checks: dense non-negative ids, edge endpoints exist, no self edges or
    duplicate edges, non-negative weights, acyclicity, exactly one sink.
    """
    report: list[str] = []
    n = len(graph.nodes)
    ids = [node.id for node in graph.nodes]
    if ids != list(range(n)):
        report.append(f"node ids must be dense 0..{n - 1}, got {ids}")
        return report
    for node in graph.nodes:
        if node.wcet < 0:
            report.append(f"node {node.id} has negative wcet {node.wcet}")
    seen: set[tuple[int, int]] = set()
    for e in graph.edges:
        if not (0 <= e.src < n) or not (0 <= e.dst < n):
            report.append(f"edge ({e.src}, {e.dst}) references unknown node")
            continue
        if e.src == e.dst:
            report.append(f"self edge on node {e.src}")
        if (e.src, e.dst) in seen:
            report.append(f"duplicate edge ({e.src}, {e.dst})")
        seen.add((e.src, e.dst))
        if e.cost < 0:
            report.append(f"edge ({e.src}, {e.dst}) has negative cost {e.cost}")
        if e.elements is not None and e.elements <= 0:
            report.append(f"edge ({e.src}, {e.dst}) has non-positive elements")
    if report:
        return report
    order = topological_order(graph, strict=False)
    if order is None:
        report.append("cycle detected")
        return report
    sinks = graph.sinks()
    if n > 0 and len(sinks) != 1:
        report.append(f"multiple sinks: {sinks}" if len(sinks) > 1 else "no sink")
    return report


def require_valid(graph: TaskGraph) -> None:
    report = validate(graph)
    if report:
        raise InvalidGraphError("; ".join(report))


def topological_order(graph: TaskGraph, strict: bool = True) -> list[int] | None:
    """Kahn's algorithm, ties broken by ascending node id.

    Returns None on a cyclic graph when strict is False, raises otherwise.
    """
    import heapq

    n = len(graph.nodes)
    indeg = [len(graph.parents(v)) for v in range(n)]
    heap = [v for v in range(n) if indeg[v] == 0]
    heapq.heapify(heap)
    order: list[int] = []
    while heap:
        v = heapq.heappop(heap)
        order.append(v)
        for c in graph.children(v):
            indeg[c] -= 1
            if indeg[c] == 0:
                heapq.heappush(heap, c)
    if len(order) != n:
        if strict:
            raise InvalidGraphError("cycle detected")
        return None
    return order


def augment_single_sink(graph: TaskGraph) -> TaskGraph:
    """Funnel all sinks into one virtual node with zero wcet and zero-cost edges.

    A graph that already has exactly one sink is returned unchanged.
    """
    if topological_order(graph, strict=False) is None:
        raise InvalidGraphError("cannot augment a cyclic graph")
    sinks = graph.sinks()
    if len(sinks) == 1:
        return graph
    sink_id = len(graph.nodes)
    nodes = list(graph.nodes) + [Node(sink_id, SINK_LABEL, 0.0)]
    edges = list(graph.edges) + [Edge(s, sink_id, 0.0) for s in sorted(sinks)]
    return TaskGraph(nodes, edges, dict(graph.meta))


def compute_levels(graph: TaskGraph) -> dict[int, float]:
    """Static level of each node: its wcet plus the maximum child level.

    Communication costs are deliberately excluded; levels are used as a
    priority, not as a bound that accounts for placement.
    """
    order = topological_order(graph)
    levels: dict[int, float] = {}
    for v in reversed(order):
        children = graph.children(v)
        best = max((levels[c] for c in children), default=0.0)
        levels[v] = graph.wcet(v) + best
    return levels


def density(graph: TaskGraph) -> float:
    """|E| divided by the edge count of a complete undirected graph on |V|."""
    n = len(graph.nodes)
    if n < 2:
        raise ValueError("density needs at least 2 nodes")
    return len(graph.edges) / (n * (n - 1) / 2)


def sequential_makespan(graph: TaskGraph) -> float:
    """Sum of all wcet values: one core, no communication."""
    return math.fsum(node.wcet for node in graph.nodes)


def critical_path_lower_bound(graph: TaskGraph) -> float:
    """Largest wcet sum along any path; no schedule can beat this."""
    levels = compute_levels(graph)
    return max(levels.values(), default=0.0)


def load_graph(source) -> TaskGraph:
    """Load a graph from a JSON file path, file object, or parsed dict."""
    if isinstance(source, dict):
        data = source
    elif hasattr(source, "read"):
        data = json.load(source)
    else:
        with open(source, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    nodes = [Node(int(n["id"]), str(n["label"]), float(n["wcet"])) for n in data["nodes"]]
    edges = [
        Edge(
            int(e["src"]),
            int(e["dst"]),
            float(e["cost"]),
            int(e["elements"]) if "elements" in e and e["elements"] is not None else None,
        )
        for e in data.get("edges", [])
    ]
    return TaskGraph(nodes, edges, dict(data.get("meta", {})))


def graph_to_dict(graph: TaskGraph) -> dict:
    edges = []
    for e in graph.edges:
        entry: dict = {"src": e.src, "dst": e.dst, "cost": e.cost}
        if e.elements is not None:
            entry["elements"] = e.elements
        edges.append(entry)
    data: dict = {
        "nodes": [{"id": n.id, "label": n.label, "wcet": n.wcet} for n in graph.nodes],
        "edges": edges,
    }
    if graph.meta:
        data["meta"] = graph.meta
    return data


def save_graph(graph: TaskGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(graph_to_dict(graph), fh, indent=2)
        fh.write("\n")


def to_dot(graph: TaskGraph) -> str:
    """Graphviz text with wcet on nodes and cost on edges."""
    lines = ["digraph taskgraph {"]
    for n in graph.nodes:
        lines.append(f'  n{n.id} [label="{n.label}\\nt={n.wcet:g}"];')
    for e in graph.edges:
        lines.append(f'  n{e.src} -> n{e.dst} [label="w={e.cost:g}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
