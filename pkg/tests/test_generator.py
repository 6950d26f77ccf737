import statistics

import pytest

from schedgen.generator import GenSpec, generate
from schedgen.graph import density, graph_to_dict, validate


def test_requested_edge_count_before_augmentation():
    g = generate(GenSpec(n=20, density=0.1, seed=42))
    # edges among the original 20 nodes; augmentation edges point at node 20+
    original = [e for e in g.edges if e.dst < 20]
    assert len(original) == round(0.1 * 20 * 19 / 2)


def test_generated_graph_is_valid_single_sink():
    for seed in range(20):
        for d in (0.1, 0.3, 0.8):
            g = generate(GenSpec(n=12, density=d, seed=seed))
            assert validate(g) == []
            assert len(g.sinks()) == 1


def test_edges_point_forward():
    g = generate(GenSpec(n=25, density=0.3, seed=3))
    assert all(e.src < e.dst for e in g.edges)


def test_determinism():
    a = generate(GenSpec(n=15, density=0.4, seed=11))
    b = generate(GenSpec(n=15, density=0.4, seed=11))
    assert graph_to_dict(a) == graph_to_dict(b)


def test_different_seeds_differ():
    a = generate(GenSpec(n=15, density=0.4, seed=1))
    b = generate(GenSpec(n=15, density=0.4, seed=2))
    assert graph_to_dict(a) != graph_to_dict(b)


def test_two_nodes_full_density():
    g = generate(GenSpec(n=2, density=1.0, seed=0))
    assert (g.edge(0, 1).src, g.edge(0, 1).dst) == (0, 1)


def test_minimum_one_edge():
    g = generate(GenSpec(n=10, density=0.001, seed=5))
    original = [e for e in g.edges if e.dst < 10]
    assert len(original) == 1


def test_weight_ranges_respected():
    g = generate(GenSpec(n=40, density=0.3, seed=9, wcet_range=(2.0, 3.0), comm_range=(5.0, 6.0)))
    for v in g.nodes:
        if v.label != "sink":
            assert 2.0 <= v.wcet <= 3.0
    for e in g.edges:
        if g.nodes[e.dst].label != "sink":
            assert 5.0 <= e.cost <= 6.0


def test_wcet_distribution_mean_near_midpoint():
    g = generate(GenSpec(n=10000, density=4e-5, seed=0))
    wcets = [v.wcet for v in g.nodes if v.label != "sink"]
    mid = 5.5
    assert abs(statistics.fmean(wcets) - mid) / mid < 0.05


def test_density_close_to_requested_for_large_n():
    g = generate(GenSpec(n=60, density=0.25, seed=4))
    # density measured on the pre-augmentation node count
    original = [e for e in g.edges if e.dst < 60]
    measured = len(original) / (60 * 59 / 2)
    assert measured == pytest.approx(0.25, rel=0.05)


def test_meta_records_provenance():
    spec = GenSpec(n=8, density=0.5, seed=123)
    g = generate(spec)
    meta = g.meta["generator"]
    assert meta["n"] == 8
    assert meta["density"] == 0.5
    assert meta["seed"] == 123
    assert meta["rng_name"] == "numpy-pcg64"


def test_spec_validation():
    with pytest.raises(ValueError):
        GenSpec(n=1, density=0.5, seed=0)
    with pytest.raises(ValueError):
        GenSpec(n=5, density=1.5, seed=0)
    with pytest.raises(ValueError):
        GenSpec(n=5, density=0.0, seed=0)
    with pytest.raises(ValueError):
        GenSpec(n=5, density=0.5, seed=0, wcet_range=(3.0, 2.0))
