import pytest

from schedgen.exact import (
    ORACLE_MAX_NODES,
    brute_force_oracle,
    evaluate_model,
    export_model,
    instantiate_solution,
    schedule_exact,
)
from schedgen.generator import GenSpec, generate
from schedgen.graph import critical_path_lower_bound, sequential_makespan
from schedgen.heuristics import schedule_dsh, schedule_ish
from schedgen.schedule import Placement, Schedule, check_validity, makespan, schedule_to_dict

from conftest import chain_graph, mkgraph


def test_single_node():
    g = mkgraph([4.0], [])
    best, sched = brute_force_oracle(g, 2)
    assert best == 4.0
    res = schedule_exact(g, 2)
    assert res.makespan == 4.0 and res.proven_optimal


def test_chain_cannot_be_parallelized():
    g = chain_graph([3.0, 2.0, 1.0], costs=[1.0, 1.0])
    best, _ = brute_force_oracle(g, 3)
    assert best == 6.0
    res = schedule_exact(g, 3)
    assert res.makespan == 6.0 and res.proven_optimal


def test_two_independent_tasks():
    g = mkgraph([3.0, 4.0, 0.0], [(0, 2, 0.0), (1, 2, 0.0)])
    best, _ = brute_force_oracle(g, 2)
    assert best == 4.0
    assert schedule_exact(g, 2).makespan == 4.0


def test_duplication_is_optimal_for_expensive_fork(fork2):
    best, sched = brute_force_oracle(fork2, 2)
    assert best == 2.0
    assert len(sched.instances(0)) == 2
    res = schedule_exact(fork2, 2)
    assert res.makespan == 2.0 and res.proven_optimal
    assert check_validity(fork2, res.schedule) == []
    assert len(res.schedule.instances(0)) == 2


def test_oracle_rejects_large_graphs():
    g = generate(GenSpec(n=ORACLE_MAX_NODES + 3, density=0.3, seed=0))
    with pytest.raises(ValueError):
        brute_force_oracle(g, 2)


def test_exact_matches_oracle_small_sweep():
    for seed in range(8):
        g = generate(GenSpec(n=5, density=0.5, seed=seed))
        for m in (2, 3):
            best, osched = brute_force_oracle(g, m)
            assert check_validity(g, osched) == []
            res = schedule_exact(g, m)
            assert res.proven_optimal
            assert res.makespan == pytest.approx(best, abs=1e-9)
            assert check_validity(g, res.schedule) == []


def test_exact_bounded_by_heuristics_and_critical_path():
    for seed in range(5):
        g = generate(GenSpec(n=9, density=0.35, seed=seed))
        res = schedule_exact(g, 2)
        assert res.proven_optimal
        lb = critical_path_lower_bound(g)
        assert lb - 1e-9 <= res.makespan
        assert res.makespan <= makespan(schedule_ish(g, 2)) + 1e-9
        assert res.makespan <= makespan(schedule_dsh(g, 2)) + 1e-9


def test_budget_yields_feasible_incumbent():
    g = generate(GenSpec(n=24, density=0.25, seed=3))
    res = schedule_exact(g, 4, budget=0.5)
    assert check_validity(g, res.schedule) == []
    assert res.makespan <= makespan(schedule_dsh(g, 4)) + 1e-9
    assert isinstance(res.proven_optimal, bool)
    assert res.nodes_explored > 0


def test_exact_is_deterministic():
    g = generate(GenSpec(n=6, density=0.4, seed=21))
    a = schedule_exact(g, 2)
    b = schedule_exact(g, 2)
    assert a.makespan == b.makespan
    assert schedule_to_dict(a.schedule) == schedule_to_dict(b.schedule)


def test_export_model_structure():
    g = chain_graph([2.0, 1.0], costs=[3.0])
    for enc in ("tang", "improved"):
        text = export_model(g, 2, enc)
        lines = [l for l in text.splitlines() if l and not l.startswith("#")]
        assert lines[-1] == "MIN makespan"
        assert any(l.startswith("VAR makespan real") for l in lines)
        assert any(l.startswith("CON presence") for l in lines)
        assert any(l.startswith("CON sink_once") for l in lines)
    tang = export_model(g, 2, "tang")
    improved = export_model(g, 2, "improved")
    assert "VAR d_0_0_1_0 bin" in tang
    assert "d_" not in improved
    assert "VAR ef_0 real" in improved
    assert "min(" in improved


def test_export_model_transfer_variable_count():
    g = chain_graph([2.0, 1.0], costs=[3.0])
    m = 3
    text = export_model(g, m, "tang")
    d_vars = [l for l in text.splitlines() if l.startswith("VAR d_")]
    assert len(d_vars) == len(g.edges) * m * m


def test_export_model_is_deterministic():
    g = generate(GenSpec(n=6, density=0.4, seed=2))
    assert export_model(g, 2, "tang") == export_model(g, 2, "tang")
    assert export_model(g, 2, "improved") == export_model(g, 2, "improved")


def test_solutions_satisfy_exported_models():
    for seed in range(4):
        g = generate(GenSpec(n=5, density=0.5, seed=seed))
        res = schedule_exact(g, 2)
        for enc in ("tang", "improved"):
            text = export_model(g, 2, enc)
            values = instantiate_solution(g, res.schedule, enc)
            assert evaluate_model(text, values) == []


def test_corrupted_solution_violates_model(fork2):
    res = schedule_exact(fork2, 2)
    values = instantiate_solution(fork2, res.schedule, "improved")
    text = export_model(fork2, 2, "improved")
    assert evaluate_model(text, values) == []
    p = next(iter(res.schedule.placements()))
    values[f"s_{p.node}_{p.core}"] += 0.5
    assert evaluate_model(text, values) != []


def test_evaluate_model_reports_missing_variable():
    g = chain_graph([2.0, 1.0])
    text = export_model(g, 1, "improved")
    with pytest.raises(KeyError):
        evaluate_model(text, {"makespan": 3.0})


def test_evaluate_model_rejects_malformed_text():
    with pytest.raises(ValueError):
        evaluate_model("CON junk 1 +* 2 <= 3", {})


def test_heuristic_solutions_satisfy_models():
    g = generate(GenSpec(n=8, density=0.4, seed=13))
    sched = schedule_dsh(g, 2)
    for enc in ("tang", "improved"):
        text = export_model(g, 2, enc)
        values = instantiate_solution(g, sched, enc)
        assert evaluate_model(text, values) == []


def test_invalid_start_breaks_validity_and_model():
    g = chain_graph([2.0, 2.0], costs=[4.0])
    bad = Schedule(
        m=2,
        cores=[
            [Placement(0, 0, 0.0, 2.0)],
            [Placement(1, 1, 3.0, 5.0)],
        ],
    )
    assert check_validity(g, bad) != []
    for enc in ("tang", "improved"):
        text = export_model(g, 2, enc)
        values = instantiate_solution(g, bad, enc)
        assert evaluate_model(text, values) != []
