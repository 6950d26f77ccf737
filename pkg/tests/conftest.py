"""Shared builders for the test suite.

Most tests construct small graphs inline; these helpers keep that terse.
"""

import pytest

from schedgen.graph import Edge, Node, TaskGraph
from schedgen.schedule import Placement, Schedule


def mkgraph(wcets, edges, labels=None):
    """Build a TaskGraph from a list of wcets and (src, dst, cost[, elements]) tuples."""
    nodes = [
        Node(id=i, label=(labels[i] if labels else f"n{i}"), wcet=float(w))
        for i, w in enumerate(wcets)
    ]
    es = []
    for e in edges:
        if len(e) == 4:
            src, dst, cost, elements = e
            es.append(Edge(src=src, dst=dst, cost=float(cost), elements=elements))
        else:
            src, dst, cost = e
            es.append(Edge(src=src, dst=dst, cost=float(cost)))
    return TaskGraph(nodes=nodes, edges=es)


def chain_graph(wcets, costs=None):
    costs = costs if costs is not None else [0.0] * (len(wcets) - 1)
    edges = [(i, i + 1, costs[i]) for i in range(len(wcets) - 1)]
    return mkgraph(wcets, edges)


def mksched(graph, m, rows):
    """Build a Schedule from {core: [(node, start), ...]}; finish = start + wcet."""
    cores = []
    for c in range(m):
        placements = [
            Placement(node=v, core=c, start=float(s), finish=float(s) + graph.wcet(v))
            for v, s in rows.get(c, [])
        ]
        cores.append(placements)
    return Schedule(m=m, cores=cores)


@pytest.fixture
def fork2():
    """Root with two children, expensive comm; the classic duplication win."""
    return mkgraph(
        [1.0, 1.0, 1.0, 0.0],
        [(0, 1, 5.0), (0, 2, 5.0), (1, 3, 0.0), (2, 3, 0.0)],
    )
