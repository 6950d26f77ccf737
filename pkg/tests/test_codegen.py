import json

import pytest

from schedgen.codegen import (
    ComputeOp,
    PlanError,
    ReadOp,
    WriteOp,
    channels_of,
    count_sync_variables,
    edge_elements,
    emit_kernels,
    emit_parallel,
    emit_sequential,
    emit_sequential_source,
    plan,
)
from schedgen.fixtures import lenet5_split, lenet5_split_schedule
from schedgen.generator import GenSpec, generate
from schedgen.graph import topological_order
from schedgen.heuristics import schedule_dsh
from schedgen.schedule import InvalidScheduleError

from conftest import chain_graph, mkgraph, mksched


def _ops(cp):
    return [
        (type(op).__name__, op.node if isinstance(op, ComputeOp) else op.message.name)
        for op in cp.ops
    ]


def test_sync_variable_count():
    assert count_sync_variables(2) == 4
    assert count_sync_variables(4) == 24
    assert count_sync_variables(20) == 760


def test_single_core_plan_has_no_messages():
    g = chain_graph([1.0, 2.0, 1.0])
    s = mksched(g, 1, {0: [(0, 0.0), (1, 1.0), (2, 3.0)]})
    plans = plan(g, s)
    assert len(plans) == 1
    assert _ops(plans[0]) == [("ComputeOp", 0), ("ComputeOp", 1), ("ComputeOp", 2)]


def test_lenet_plan_structure():
    g = lenet5_split()
    s = lenet5_split_schedule()
    p0, p1 = plan(g, s)
    assert _ops(p0) == [
        ("ComputeOp", 0),
        ("ComputeOp", 1),
        ("WriteOp", "0_1_a"),
        ("ComputeOp", 2),
        ("ComputeOp", 3),
        ("ReadOp", "1_0_a"),
        ("ComputeOp", 6),
        ("ComputeOp", 7),
        ("ComputeOp", 8),
    ]
    assert _ops(p1) == [
        ("ReadOp", "0_1_a"),
        ("ComputeOp", 4),
        ("ComputeOp", 5),
        ("WriteOp", "1_0_a"),
    ]
    channels = channels_of([p0, p1])
    assert [(c.flag_name, c.final_flag, c.buffer_elements) for c in channels] == [
        ("flag_0_1", 2, 8),
        ("flag_1_0", 2, 8),
    ]


def test_channel_message_sequence_letters():
    # two transfers over the same ordered core pair get consecutive letters
    g = mkgraph(
        [1.0, 1.0, 1.0, 1.0, 0.0],
        [(0, 2, 1.0), (1, 3, 1.0), (2, 4, 0.0), (3, 4, 0.0)],
    )
    s = mksched(
        g,
        2,
        {
            0: [(0, 0.0), (1, 1.0)],
            1: [(2, 2.0), (3, 3.0), (4, 4.0)],
        },
    )
    plans = plan(g, s)
    channels = channels_of(plans)
    assert len(channels) == 1
    ch = channels[0]
    assert [m.name for m in ch.messages] == ["0_1_a", "0_1_b"]
    assert ch.final_flag == 4
    # reader consumes in its own start order: node 2 before node 3
    assert [m.dst_node for m in ch.messages] == [2, 3]


def test_writer_emits_in_channel_order():
    g = mkgraph(
        [1.0, 1.0, 1.0, 1.0, 0.0],
        [(0, 2, 1.0), (1, 3, 1.0), (2, 4, 0.0), (3, 4, 0.0)],
    )
    s = mksched(
        g,
        2,
        {
            0: [(0, 0.0), (1, 1.0)],
            1: [(2, 2.0), (3, 3.0), (4, 4.0)],
        },
    )
    p0 = plan(g, s)[0]
    writes = [op.message.seq for op in p0.ops if isinstance(op, WriteOp)]
    assert writes == [0, 1]


def test_plan_rejects_unpruned_schedule():
    g = chain_graph([1.0, 1.0], costs=[5.0])
    s = mksched(g, 2, {0: [(0, 0.0), (1, 1.0)], 1: [(0, 0.0)]})
    with pytest.raises(PlanError):
        plan(g, s)


def test_plan_rejects_invalid_schedule():
    g = chain_graph([1.0, 1.0], costs=[5.0])
    s = mksched(g, 2, {0: [(0, 0.0)], 1: [(1, 1.0)]})
    with pytest.raises(InvalidScheduleError):
        plan(g, s)


def test_edge_elements_default_and_override():
    g = lenet5_split()
    assert edge_elements(g, 1, 4) == 8
    assert edge_elements(g, 0, 1) == 16


def test_kernel_header_declares_sizes_and_protos():
    g = lenet5_split()
    header, source = emit_kernels(g)
    assert "#define SCHED_INPUT_ELEMENTS 16" in header
    assert "#define SCHED_OUTPUT_ELEMENTS 16" in header
    for v in g.nodes:
        assert f"kernel_{v.id}_" in header
    assert "void inference_sequential(const float *input, float *output);" in header
    assert emit_kernels(g) == (header, source)  # deterministic


def test_sequential_source_calls_kernels_in_topo_order():
    g = lenet5_split()
    text = emit_sequential_source(g)
    order = topological_order(g)
    positions = [text.index(f"kernel_{v}_") for v in order]
    assert positions == sorted(positions)


def test_emit_parallel_layout(tmp_path):
    g = lenet5_split()
    s = lenet5_split_schedule()
    manifest = emit_parallel(g, s, tmp_path)
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == [
        "inference_core_0.c",
        "inference_core_1.c",
        "inference_seq.c",
        "kernels.c",
        "kernels.h",
        "manifest.json",
        "shared.c",
        "shared.h",
    ]
    on_disk = json.loads((tmp_path / "manifest.json").read_text())
    assert on_disk == manifest
    assert manifest["mode"] == "parallel"
    assert manifest["cores"] == 2
    assert manifest["sync_variables"] == 4
    assert manifest["entries"] == ["inference_core_0", "inference_core_1"]
    assert manifest["sequential_entry"] == "inference_sequential"
    flags = {c["flag"]: c for c in manifest["channels"]}
    assert set(flags) == {"flag_0_1", "flag_1_0"}
    assert flags["flag_0_1"]["final_flag"] == 2
    assert flags["flag_0_1"]["messages"][0]["name"] == "0_1_a"
    assert flags["flag_0_1"]["messages"][0]["elements"] == 8


def test_emitted_core_sources_spin_on_expected_flags(tmp_path):
    g = lenet5_split()
    s = lenet5_split_schedule()
    emit_parallel(g, s, tmp_path)
    core1 = (tmp_path / "inference_core_1.c").read_text()
    # the first statement after buffer declarations is the read spin: the
    # reader waits for flag value 2*seq+1 = 1 before copying
    read_spin = core1.index("while (atomic_load_explicit(&flag_0_1, memory_order_acquire) != 1u)")
    release = core1.index("atomic_store_explicit(&flag_0_1, 2u, memory_order_release);")
    assert read_spin < release
    kernel_call = core1.index("kernel_4_conv_bot")
    assert release < kernel_call

    core0 = (tmp_path / "inference_core_0.c").read_text()
    # the writer waits for flag value 2*seq = 0, stores, then publishes 1
    write_spin = core0.index("while (atomic_load_explicit(&flag_0_1, memory_order_acquire) != 0u)")
    publish = core0.index("atomic_store_explicit(&flag_0_1, 1u, memory_order_release);")
    assert write_spin < publish
    # core 0 hosts the sink: it must fill the caller's output buffer
    assert "output[" in core0


def test_shared_header_tables(tmp_path):
    g = lenet5_split()
    s = lenet5_split_schedule()
    emit_parallel(g, s, tmp_path)
    shared_h = (tmp_path / "shared.h").read_text()
    assert "#include <stdatomic.h>" in shared_h
    assert "extern _Atomic unsigned flag_0_1;" in shared_h
    assert "extern float comm_0_1[8];" in shared_h
    assert "#define SCHED_CORES 2" in shared_h
    assert "extern const sched_core_fn sched_cores[SCHED_CORES];" in shared_h
    assert "extern const sched_channel sched_channels[];" in shared_h
    assert "unsigned expected_final;" in shared_h
    shared_c = (tmp_path / "shared.c").read_text()
    assert "_Atomic unsigned flag_0_1 = 0u;" in shared_c
    assert '{ "flag_0_1", &flag_0_1, 2u, 1 },' in shared_c
    assert "const int sched_channel_count = 2;" in shared_c


def test_emit_sequential_layout(tmp_path):
    g = lenet5_split()
    manifest = emit_sequential(g, tmp_path)
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["inference_seq.c", "kernels.c", "kernels.h", "manifest.json"]
    assert manifest["mode"] == "sequential"
    assert manifest["sequential_entry"] == "inference_sequential"


def test_parallel_emission_is_deterministic(tmp_path):
    g = generate(GenSpec(n=10, density=0.3, seed=8))
    s = schedule_dsh(g, 3)
    a = tmp_path / "a"
    b = tmp_path / "b"
    a.mkdir()
    b.mkdir()
    emit_parallel(g, s, a)
    emit_parallel(g, s, b)
    for name in sorted(p.name for p in a.iterdir()):
        assert (a / name).read_text() == (b / name).read_text()


def test_kernel_inputs_use_edge_sizes(tmp_path):
    # the staging buffer and the kernel size argument follow the edge's
    # element count, not the producer's full output buffer
    g = lenet5_split()
    s = lenet5_split_schedule()
    emit_parallel(g, s, tmp_path)
    core1 = (tmp_path / "inference_core_1.c").read_text()
    assert "static float in_4_from_1[8];" in core1
    assert "const int sizes[1] = { 8 };" in core1
