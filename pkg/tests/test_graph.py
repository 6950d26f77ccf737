import pytest

from schedgen.generator import GenSpec, generate
from schedgen.graph import (
    Edge,
    InvalidGraphError,
    Node,
    TaskGraph,
    augment_single_sink,
    compute_levels,
    critical_path_lower_bound,
    density,
    graph_to_dict,
    load_graph,
    require_valid,
    save_graph,
    sequential_makespan,
    to_dot,
    topological_order,
    validate,
)

from conftest import chain_graph, mkgraph


def test_validate_clean_chain():
    g = chain_graph([3.0, 2.0, 1.0])
    assert validate(g) == []


def test_validate_reports_cycle():
    g = mkgraph([1.0, 1.0], [(0, 1, 0.0), (1, 0, 0.0)])
    problems = validate(g)
    assert any("cycle detected" in p for p in problems)


def test_validate_reports_multiple_sinks():
    g = mkgraph([1.0, 1.0, 1.0], [(0, 1, 0.0), (0, 2, 0.0)])
    problems = validate(g)
    assert any("multiple sinks" in p for p in problems)


def test_validate_reports_bad_edges_and_weights():
    g = TaskGraph(
        nodes=[Node(0, "a", -1.0), Node(1, "b", 2.0)],
        edges=[
            Edge(0, 1, -3.0),
            Edge(0, 0, 1.0),
            Edge(0, 5, 1.0),
            Edge(0, 1, 2.0),
        ],
    )
    problems = validate(g)
    text = "\n".join(problems)
    assert "negative wcet" in text
    assert "negative cost" in text
    assert "self edge" in text
    assert "unknown node" in text
    assert "duplicate edge" in text


def test_validate_requires_dense_ids():
    g = TaskGraph(nodes=[Node(0, "a", 1.0), Node(2, "b", 1.0)], edges=[])
    assert any("dense" in p for p in validate(g))


def test_require_valid_raises():
    g = mkgraph([1.0, 1.0], [(0, 1, 0.0), (1, 0, 0.0)])
    with pytest.raises(InvalidGraphError):
        require_valid(g)


def test_topological_order_diamond():
    g = mkgraph(
        [1.0, 1.0, 1.0, 1.0],
        [(0, 1, 0.0), (0, 2, 0.0), (1, 3, 0.0), (2, 3, 0.0)],
    )
    assert topological_order(g) == [0, 1, 2, 3]


def test_topological_order_respects_edges_on_random_graph():
    g = generate(GenSpec(n=30, density=0.2, seed=7))
    order = topological_order(g)
    pos = {v: i for i, v in enumerate(order)}
    assert sorted(order) == [v.id for v in g.nodes]
    for e in g.edges:
        assert pos[e.src] < pos[e.dst]


def test_topological_order_strict_on_cycle():
    g = mkgraph([1.0, 1.0], [(0, 1, 0.0), (1, 0, 0.0)])
    with pytest.raises(InvalidGraphError):
        topological_order(g)


def test_augment_adds_virtual_sink():
    g = mkgraph([2.0, 3.0], [])
    aug = augment_single_sink(g)
    assert len(aug.nodes) == 3
    sink = aug.nodes[2]
    assert sink.wcet == 0.0
    assert {(e.src, e.dst, e.cost) for e in aug.edges} == {(0, 2, 0.0), (1, 2, 0.0)}
    assert aug.sinks() == [2]


def test_augment_noop_when_single_sink():
    g = chain_graph([1.0, 2.0])
    assert augment_single_sink(g) is g


def test_levels_chain():
    g = chain_graph([3.0, 2.0, 1.0])
    assert compute_levels(g) == {0: 6.0, 1: 3.0, 2: 1.0}


def test_levels_fork_takes_max_branch():
    g = mkgraph([1.0, 5.0, 2.0], [(0, 1, 0.0), (0, 2, 0.0)])
    levels = compute_levels(g)
    assert levels[0] == 6.0
    assert levels[1] == 5.0
    assert levels[2] == 2.0


def test_levels_ignore_communication_costs():
    edges_cheap = [(0, 1, 0.0), (0, 2, 0.0)]
    edges_costly = [(0, 1, 100.0), (0, 2, 7.0)]
    a = mkgraph([1.0, 5.0, 2.0], edges_cheap)
    b = mkgraph([1.0, 5.0, 2.0], edges_costly)
    assert compute_levels(a) == compute_levels(b)


def _all_path_sums(g, v):
    """Oracle: level of v is the max wcet-sum over paths starting at v."""
    best = g.wcet(v)
    for c in g.children(v):
        best = max(best, g.wcet(v) + _all_path_sums(g, c))
    return best


def test_levels_match_path_enumeration_oracle():
    for seed in range(5):
        g = generate(GenSpec(n=9, density=0.4, seed=seed))
        levels = compute_levels(g)
        for v in g.nodes:
            assert levels[v.id] == pytest.approx(_all_path_sums(g, v.id), abs=1e-9)


def test_density_complete_dag_is_one():
    edges = [(i, j, 0.0) for i in range(4) for j in range(i + 1, 4)]
    g = mkgraph([1.0] * 4, edges)
    assert density(g) == pytest.approx(1.0)


def test_density_chain():
    g = chain_graph([1.0] * 20)
    assert density(g) == pytest.approx(19 / 190)


def test_density_rejects_single_node():
    g = mkgraph([1.0], [])
    with pytest.raises(ValueError):
        density(g)


def test_sequential_makespan_sums_wcets():
    g = chain_graph([3.0, 2.0, 1.0])
    assert sequential_makespan(g) == 6.0


def test_critical_path_lower_bound():
    g = mkgraph([1.0, 5.0, 2.0, 0.0], [(0, 1, 0.0), (0, 2, 0.0), (1, 3, 0.0), (2, 3, 0.0)])
    assert critical_path_lower_bound(g) == 6.0
    assert critical_path_lower_bound(chain_graph([3.0, 2.0, 1.0])) == 6.0


def test_json_round_trip_preserves_everything(tmp_path):
    g = mkgraph(
        [1.5, 2.0, 0.0],
        [(0, 1, 3.25, 8), (0, 2, 0.0), (1, 2, 1.0)],
        labels=["in", "conv", "out"],
    )
    g.meta["generator"] = {"seed": 3}
    path = tmp_path / "g.json"
    save_graph(g, path)
    back = load_graph(path)
    assert graph_to_dict(back) == graph_to_dict(g)
    assert back.edge(0, 1).elements == 8
    assert back.meta["generator"]["seed"] == 3
    # load accepts a dict as well as a path
    assert graph_to_dict(load_graph(graph_to_dict(g))) == graph_to_dict(g)


def test_to_dot_mentions_nodes_and_costs():
    g = mkgraph([1.0, 2.0], [(0, 1, 7.0)], labels=["alpha", "beta"])
    dot = to_dot(g)
    assert "alpha" in dot and "beta" in dot
    assert "7" in dot
    assert dot.startswith("digraph")


def test_wcet_and_comm_lookup():
    g = mkgraph([1.0, 2.0], [(0, 1, 7.0)])
    assert g.wcet(1) == 2.0
    assert g.comm_cost(0, 1) == 7.0
    assert g.parents(1) == [0]
    assert g.children(0) == [1]
    with pytest.raises(KeyError):
        g.edge(1, 0)
