"""Reference networks used by tests and benchmarks.

Node wcets are cycle counts measured on the single-core code of the
corresponding layers; edge costs are the measured costs of the data
handling part of a cross-core transfer, which are several orders of
magnitude below the layer wcets.
"""

from __future__ import annotations

from .graph import Edge, Node, TaskGraph
from .schedule import Placement, Schedule

_DEFAULT_COMM = 1.19e5

_GOOGLENET_LAYERS = [
    ("Input", 5.27e6),
    ("conv_1", 8.16e9),
    ("maxpool_1", 1.22e8),
    ("conv_2", 1.59e10),
    ("maxpool_2", 2.71e7),
    ("inception_1/conv_a", 4.57e8),
    ("inception_1/conv_b1", 2.86e8),
    ("inception_1/conv_b2", 7.92e8),
    ("inception_1/conv_c1", 5.72e7),
    ("inception_1/conv_c2", 1.63e8),
    ("inception_1/maxpool", 2.49e7),
    ("inception_1/conv_d", 2.29e8),
    ("inception_1/concat", 6.06e6),
    ("inception_2/conv_a", 6.86e8),
    ("inception_2/conv_b1", 3.43e8),
    ("inception_2/conv_b2", 1.14e9),
    ("inception_2/conv_c1", 8.58e7),
    ("inception_2/conv_c2", 2.53e8),
    ("inception_2/maxpool", 2.49e7),
    ("inception_2/conv_d", 2.29e8),
    ("inception_2/concat", 7.49e6),
    ("avgpool", 2.51e6),
    ("reshape", 0.0),
    ("gemm", 2.67e7),
    ("Output", 3.51e4),
]

_GOOGLENET_EDGES = [
    (0, 1),
    (1, 2),
    (2, 3),
    (3, 4),
    # first inception block: four parallel branches into a concat
    (4, 5),
    (4, 6),
    (6, 7),
    (4, 8),
    (8, 9),
    (4, 10),
    (10, 11),
    (5, 12),
    (7, 12),
    (9, 12),
    (11, 12),
    # second inception block
    (12, 13),
    (12, 14),
    (14, 15),
    (12, 16),
    (16, 17),
    (12, 18),
    (18, 19),
    (13, 20),
    (15, 20),
    (17, 20),
    (19, 20),
    # tail
    (20, 21),
    (21, 22),
    (22, 23),
    (23, 24),
]

# Measured transfer costs for the edges that actually cross cores in the
# four-core duplication schedule; everything else uses the common cost.
_GOOGLENET_COMM = {
    (4, 6): 2.98e5,
    (4, 8): 1.49e5,
    (4, 10): 1.49e5,
    (9, 12): 3.58e5,
    (5, 12): 2.38e5,
}


def googlenet() -> TaskGraph:
    """25-layer image classifier with two inception blocks."""
    nodes = [Node(i, label, wcet) for i, (label, wcet) in enumerate(_GOOGLENET_LAYERS)]
    edges = [
        Edge(src, dst, _GOOGLENET_COMM.get((src, dst), _DEFAULT_COMM))
        for src, dst in _GOOGLENET_EDGES
    ]
    return TaskGraph(nodes, edges, {"name": "googlenet"})


def googlenet_segment() -> TaskGraph:
    """The parallelizable middle of googlenet: maxpool_2 up to the second concat.

    Node ids are re-densified starting at maxpool_2 = 0.
    """
    full = googlenet()
    keep = list(range(4, 21))  # maxpool_2 .. inception_2/concat
    remap = {old: new for new, old in enumerate(keep)}
    nodes = [Node(remap[v], full.nodes[v].label, full.nodes[v].wcet) for v in keep]
    edges = [
        Edge(remap[e.src], remap[e.dst], e.cost, e.elements)
        for e in full.edges
        if e.src in remap and e.dst in remap
    ]
    return TaskGraph(nodes, edges, {"name": "googlenet-segment"})


def lenet5_split() -> TaskGraph:
    """Small two-branch classifier: the convolution stack is split in two."""
    nodes = [
        Node(0, "Input", 1.0),
        Node(1, "split", 1.0),
        Node(2, "conv_top", 60.0),
        Node(3, "pool_top", 14.0),
        Node(4, "conv_bot", 60.0),
        Node(5, "pool_bot", 14.0),
        Node(6, "concat", 2.0),
        Node(7, "dense", 40.0),
        Node(8, "Output", 1.0),
    ]
    edges = [
        Edge(0, 1, 2.0),
        Edge(1, 2, 2.0, elements=8),
        Edge(1, 4, 2.0, elements=8),
        Edge(2, 3, 2.0),
        Edge(4, 5, 2.0),
        Edge(3, 6, 2.0, elements=8),
        Edge(5, 6, 2.0, elements=8),
        Edge(6, 7, 2.0),
        Edge(7, 8, 2.0),
    ]
    return TaskGraph(nodes, edges, {"name": "lenet5-split"})


def lenet5_split_schedule() -> Schedule:
    """Two-core split: the bottom branch runs on core 1, the rest on core 0."""
    core0 = [
        Placement(0, 0, 0.0, 1.0),
        Placement(1, 0, 1.0, 2.0),
        Placement(2, 0, 2.0, 62.0),
        Placement(3, 0, 62.0, 76.0),
        Placement(6, 0, 80.0, 82.0),
        Placement(7, 0, 82.0, 122.0),
        Placement(8, 0, 122.0, 123.0),
    ]
    core1 = [
        Placement(4, 1, 4.0, 64.0),
        Placement(5, 1, 64.0, 78.0),
    ]
    return Schedule(2, [core0, core1])
