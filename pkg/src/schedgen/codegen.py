"""Turn a schedule into per-core communication plans and C source text.

Cross-core data flows through one single-buffer channel per ordered core
pair: a payload array ``comm_<src>_<dst>`` guarded by one flag
``flag_<src>_<dst>``. Message k on a channel is written when the flag holds
2k and read when it holds 2k+1; each side blocks by spinning until its
expected value appears, so a write may only start after the previous
message was consumed. Flags are C11 atomics: spins load with acquire and
updates store with release, which orders the plain payload accesses.

Message order per channel is fixed by the reader: consumers in start order,
each consuming its parent data in arrival order. Writers emit in that same
sequence order, as early as their producing compute allows.
"""

from __future__ import annotations

import heapq
import json
import os
from dataclasses import dataclass

from .graph import TaskGraph, topological_order
from .schedule import (
    Schedule,
    prune_redundant,
    require_valid_schedule,
    resolve_communications,
)

DEFAULT_ELEMENTS = 16


class PlanError(ValueError):
    """Raised when a schedule cannot be turned into communication plans."""


def _seq_letter(seq: int) -> str:
    # a..z, then aa, ab, ... for pathologically chatty channels
    letters = ""
    seq += 1
    while seq:
        seq, rem = divmod(seq - 1, 26)
        letters = chr(ord("a") + rem) + letters
    return letters


@dataclass(frozen=True)
class Message:
    src_core: int
    dst_core: int
    seq: int
    src_node: int
    dst_node: int
    elements: int
    # producer finish time in the originating schedule; the simulator reports
    # any write completing later than this as a blocking event
    model_depart: float = 0.0

    @property
    def name(self) -> str:
        return f"{self.src_core}_{self.dst_core}_{_seq_letter(self.seq)}"

    @property
    def channel(self) -> tuple[int, int]:
        return (self.src_core, self.dst_core)


@dataclass(frozen=True)
class ComputeOp:
    node: int


@dataclass(frozen=True)
class ReadOp:
    message: Message


@dataclass(frozen=True)
class WriteOp:
    message: Message


@dataclass
class CorePlan:
    core: int
    ops: list


@dataclass(frozen=True)
class Channel:
    src_core: int
    dst_core: int
    messages: tuple[Message, ...]

    @property
    def flag_name(self) -> str:
        return f"flag_{self.src_core}_{self.dst_core}"

    @property
    def array_name(self) -> str:
        return f"comm_{self.src_core}_{self.dst_core}"

    @property
    def buffer_elements(self) -> int:
        return max(m.elements for m in self.messages)

    @property
    def final_flag(self) -> int:
        return 2 * len(self.messages)


def edge_elements(graph: TaskGraph, src: int, dst: int) -> int:
    e = graph.edge(src, dst)
    return e.elements if e.elements is not None else DEFAULT_ELEMENTS


def output_elements(graph: TaskGraph, v: int) -> int:
    sizes = [edge_elements(graph, v, c) for c in graph.children(v)]
    return max(sizes, default=DEFAULT_ELEMENTS)


def count_sync_variables(m: int) -> int:
    """Flags plus payload arrays if every ordered core pair had a channel."""
    return 2 * m * (m - 1)


def plan(graph: TaskGraph, sched: Schedule) -> list[CorePlan]:
    """Per-core op sequences (reads, computes, writes) realizing the schedule.

    The schedule must be valid and pruned: a redundant instance would write
    data nobody reads, which the single-buffer protocol cannot absorb.

    Each channel numbers its messages in producer-finish order, and every
    core's op sequence follows one global topological order of the op
    dependency graph. Producer-finish numbering makes each message's
    buffer-free precondition (the reader consumed the previous message)
    reachable no later than its data precondition, so the combined order
    always exists and two cores can never block on each other in a cycle.
    """
    require_valid_schedule(graph, sched)
    pruned = prune_redundant(graph, sched)
    if sorted((p.node, p.core) for p in pruned.placements()) != sorted(
        (p.node, p.core) for p in sched.placements()
    ):
        raise PlanError("schedule has redundant instances; prune it first")
    resolution = resolve_communications(graph, sched)

    # Cross-core transfers grouped by channel, numbered by producer finish.
    transfers: dict[tuple[int, int], list[tuple[float, int, float, int, Placement]]] = {}
    for c in range(sched.m):
        for p in sched.cores[c]:
            for u, rs in sorted(resolution[(p.node, c)].items()):
                if rs.producer.core == c:
                    continue
                ch = (rs.producer.core, c)
                transfers.setdefault(ch, []).append(
                    (rs.producer.finish, u, p.start, p.node, rs.producer)
                )

    messages: list[Message] = []
    reads_of: dict[tuple[int, int], list[Message]] = {}
    arrival_of: dict[tuple[tuple[int, int], int], float] = {}
    finish_of: dict[tuple[tuple[int, int], int], float] = {}
    for ch in sorted(transfers):
        entries = sorted(transfers[ch])
        for seq, (fin, u, _, v, producer) in enumerate(entries):
            msg = Message(
                ch[0], ch[1], seq, u, v, edge_elements(graph, u, v), model_depart=fin
            )
            messages.append(msg)
            reads_of.setdefault((v, ch[1]), []).append(msg)
            finish_of[(ch, seq)] = fin
            arrival_of[(ch, seq)] = fin + graph.comm_cost(u, v)

    # Op dependency graph. Keys: ("c", node, core), ("w", ch, seq), ("r", ch, seq).
    succ: dict[tuple, list[tuple]] = {}
    indeg: dict[tuple, int] = {}
    time_of: dict[tuple, tuple[float, int]] = {}

    def add_node(key: tuple, when: float, rank: int) -> None:
        succ.setdefault(key, [])
        indeg.setdefault(key, 0)
        time_of[key] = (when, rank)

    def add_edge(a: tuple, b: tuple) -> None:
        succ[a].append(b)
        indeg[b] += 1

    for c in range(sched.m):
        for p in sched.cores[c]:
            add_node(("c", p.node, c), p.start, 2)
    for msg in messages:
        ch = msg.channel
        add_node(("w", ch, msg.seq), finish_of[(ch, msg.seq)], 0)
        add_node(("r", ch, msg.seq), arrival_of[(ch, msg.seq)], 1)
    for c in range(sched.m):
        row = sched.cores[c]
        for a, b in zip(row, row[1:]):
            add_edge(("c", a.node, c), ("c", b.node, c))
    for msg in messages:
        ch = msg.channel
        add_edge(("c", msg.src_node, msg.src_core), ("w", ch, msg.seq))
        add_edge(("w", ch, msg.seq), ("r", ch, msg.seq))
        add_edge(("r", ch, msg.seq), ("c", msg.dst_node, msg.dst_core))
        if msg.seq > 0:
            add_edge(("r", ch, msg.seq - 1), ("w", ch, msg.seq))
            add_edge(("r", ch, msg.seq - 1), ("r", ch, msg.seq))

    ready = [
        (time_of[k], k) for k, d in indeg.items() if d == 0
    ]
    heapq.heapify(ready)
    order: list[tuple] = []
    while ready:
        _, key = heapq.heappop(ready)
        order.append(key)
        for nxt in succ[key]:
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                heapq.heappush(ready, (time_of[nxt], nxt))
    if len(order) != len(indeg):
        raise PlanError("op dependencies are cyclic; schedule cannot be realized")

    msg_by_key = {(m.channel, m.seq): m for m in messages}
    plans: list[CorePlan] = []
    for c in range(sched.m):
        ops: list = []
        for key in order:
            if key[0] == "c" and key[2] == c:
                ops.append(ComputeOp(key[1]))
            elif key[0] == "w" and key[1][0] == c:
                ops.append(WriteOp(msg_by_key[(key[1], key[2])]))
            elif key[0] == "r" and key[1][1] == c:
                ops.append(ReadOp(msg_by_key[(key[1], key[2])]))
        plans.append(CorePlan(c, ops))
    return plans


def channels_of(plans: list[CorePlan]) -> list[Channel]:
    by_pair: dict[tuple[int, int], dict[int, Message]] = {}
    for cp in plans:
        for op in cp.ops:
            if isinstance(op, WriteOp):
                by_pair.setdefault(op.message.channel, {})[op.message.seq] = op.message
    channels = []
    for (s, d) in sorted(by_pair):
        msgs = by_pair[(s, d)]
        assert sorted(msgs) == list(range(len(msgs)))
        channels.append(Channel(s, d, tuple(msgs[k] for k in range(len(msgs)))))
    return channels


# ---------------------------------------------------------------------------
# C emission


def _sanitize(label: str) -> str:
    out = []
    for ch in label:
        out.append(ch if ch.isalnum() else "_")
    text = "".join(out)
    if not text or text[0].isdigit():
        text = "l" + text
    return text


def _kernel_name(graph: TaskGraph, v: int) -> str:
    return f"kernel_{v}_{_sanitize(graph.nodes[v].label)}"


def _kernel_coeff(label: str) -> float:
    # platform-independent stable hash of the label
    return ((sum(label.encode("utf-8")) % 17) + 1) * 0.0625


def emit_kernels(graph: TaskGraph) -> tuple[str, str]:
    """(kernels.h, kernels.c): deterministic stand-in layer implementations.

    Every kernel mixes its inputs element-wise with fixed coefficients, so
    outputs depend on every input and differ between layers; evaluation
    order is fixed, making results bit-reproducible on one platform.
    """
    sink = graph.sinks()[0]
    header = [
        "#ifndef SCHEDGEN_KERNELS_H",
        "#define SCHEDGEN_KERNELS_H",
        "",
        f"#define SCHED_INPUT_ELEMENTS {DEFAULT_ELEMENTS}",
        f"#define SCHED_OUTPUT_ELEMENTS {output_elements(graph, sink)}",
        "",
    ]
    body = ['#include "kernels.h"', ""]
    for v in range(len(graph.nodes)):
        name = _kernel_name(graph, v)
        proto = (
            f"void {name}(const float *const inputs[], const int sizes[], "
            f"int n_inputs, float *out, int out_n)"
        )
        header.append(f"{proto};")
        coeff = _kernel_coeff(graph.nodes[v].label)
        body.append(f"{proto} {{")
        body.append("    for (int i = 0; i < out_n; ++i) {")
        body.append(f"        float acc = {float(v + 1)}f;")
        body.append("        for (int k = 0; k < n_inputs; ++k) {")
        body.append("            acc += inputs[k][i % sizes[k]] * (0.5f + 0.25f * (float)k);")
        body.append("        }")
        body.append(f"        out[i] = acc * {coeff}f + 0.03125f * (float)i;")
        body.append("    }")
        body.append("}")
        body.append("")
    header.extend(
        [
            "",
            "void inference_sequential(const float *input, float *output);",
            "",
            "#endif",
        ]
    )
    return "\n".join(header) + "\n", "\n".join(body) + "\n"


def _compute_block(
    graph: TaskGraph,
    v: int,
    input_exprs: list[tuple[str, str]],
    out_buf: str,
    out_n: int,
) -> list[str]:
    name = _kernel_name(graph, v)
    lines = [f"    /* node {v} ({graph.nodes[v].label}) */"]
    k = len(input_exprs)
    if k == 0:
        lines.append("    {")
        lines.append("        const float *ins[1] = { input };")
        lines.append("        const int sizes[1] = { SCHED_INPUT_ELEMENTS };")
        lines.append(f"        {name}(ins, sizes, 1, {out_buf}, {out_n});")
        lines.append("    }")
        return lines
    ins = ", ".join(expr for expr, _ in input_exprs)
    sizes = ", ".join(size for _, size in input_exprs)
    lines.append("    {")
    lines.append(f"        const float *ins[{k}] = {{ {ins} }};")
    lines.append(f"        const int sizes[{k}] = {{ {sizes} }};")
    lines.append(f"        {name}(ins, sizes, {k}, {out_buf}, {out_n});")
    lines.append("    }")
    return lines


def emit_sequential_source(graph: TaskGraph) -> str:
    sink = graph.sinks()[0]
    lines = ['#include "kernels.h"', "", "void inference_sequential(const float *input, float *output)", "{"]
    for v in topological_order(graph):
        lines.append(f"    static float out_{v}[{output_elements(graph, v)}];")
    for v in topological_order(graph):
        exprs = [
            (f"out_{u}", str(edge_elements(graph, u, v))) for u in graph.parents(v)
        ]
        lines.extend(_compute_block(graph, v, exprs, f"out_{v}", output_elements(graph, v)))
    lines.append("    for (int i = 0; i < SCHED_OUTPUT_ELEMENTS; ++i) {")
    lines.append(f"        output[i] = out_{sink}[i];")
    lines.append("    }")
    lines.append("}")
    return "\n".join(lines) + "\n"


def emit_shared(m: int, channels: list[Channel]) -> tuple[str, str]:
    header = [
        "#ifndef SCHEDGEN_SHARED_H",
        "#define SCHEDGEN_SHARED_H",
        "",
        "#include <stdatomic.h>",
        '#include "kernels.h"',
        "",
        f"#define SCHED_CORES {m}",
        "",
    ]
    for ch in channels:
        header.append(f"extern _Atomic unsigned {ch.flag_name};")
        header.append(f"extern float {ch.array_name}[{ch.buffer_elements}];")
    header.append("")
    for c in range(m):
        header.append(f"void inference_core_{c}(const float *input, float *output);")
    header.extend(
        [
            "",
            "typedef void (*sched_core_fn)(const float *input, float *output);",
            "extern const sched_core_fn sched_cores[SCHED_CORES];",
            "",
            "typedef struct {",
            "    const char *name;",
            "    _Atomic unsigned *flag;",
            "    unsigned expected_final;",
            "    int messages;",
            "} sched_channel;",
            "extern const sched_channel sched_channels[];",
            "extern const int sched_channel_count;",
            "",
            "#endif",
        ]
    )
    src = ['#include "shared.h"', ""]
    for ch in channels:
        src.append(f"_Atomic unsigned {ch.flag_name} = 0u;")
        src.append(f"float {ch.array_name}[{ch.buffer_elements}];")
    src.append("")
    entries = ", ".join(f"inference_core_{c}" for c in range(m))
    src.append(f"const sched_core_fn sched_cores[SCHED_CORES] = {{ {entries} }};")
    src.append("")
    if channels:
        src.append("const sched_channel sched_channels[] = {")
        for ch in channels:
            src.append(
                f'    {{ "{ch.flag_name}", &{ch.flag_name}, {ch.final_flag}u, '
                f"{len(ch.messages)} }},"
            )
        src.append("};")
    else:
        src.append("const sched_channel sched_channels[1] = { { 0, 0, 0u, 0 } };")
    src.append(f"const int sched_channel_count = {len(channels)};")
    return "\n".join(header) + "\n", "\n".join(src) + "\n"


def emit_core_source(graph: TaskGraph, sched: Schedule, cp: CorePlan) -> str:
    sink = graph.sinks()[0]
    resolution = resolve_communications(graph, sched)
    lines = ['#include "shared.h"', "", f"void inference_core_{cp.core}(const float *input, float *output)", "{"]
    for op in cp.ops:
        if isinstance(op, ComputeOp):
            lines.append(
                f"    static float out_{op.node}[{output_elements(graph, op.node)}];"
            )
        elif isinstance(op, ReadOp):
            msg = op.message
            lines.append(
                f"    static float in_{msg.dst_node}_from_{msg.src_node}[{msg.elements}];"
            )
    for op in cp.ops:
        if isinstance(op, ComputeOp):
            v = op.node
            exprs: list[tuple[str, str]] = []
            for u in graph.parents(v):
                rs = resolution[(v, cp.core)][u]
                size = str(edge_elements(graph, u, v))
                if rs.producer.core == cp.core:
                    exprs.append((f"out_{u}", size))
                else:
                    exprs.append((f"in_{v}_from_{u}", size))
            lines.extend(
                _compute_block(graph, v, exprs, f"out_{v}", output_elements(graph, v))
            )
            if v == sink:
                lines.append("    for (int i = 0; i < SCHED_OUTPUT_ELEMENTS; ++i) {")
                lines.append(f"        output[i] = out_{sink}[i];")
                lines.append("    }")
        elif isinstance(op, WriteOp):
            msg = op.message
            flag = f"flag_{msg.src_core}_{msg.dst_core}"
            arr = f"comm_{msg.src_core}_{msg.dst_core}"
            lines.append(f"    /* write {msg.name}: node {msg.src_node} -> core {msg.dst_core} */")
            lines.append(
                f"    while (atomic_load_explicit(&{flag}, memory_order_acquire) != {2 * msg.seq}u) {{ }}"
            )
            lines.append(f"    for (int i = 0; i < {msg.elements}; ++i) {{")
            lines.append(f"        {arr}[i] = out_{msg.src_node}[i];")
            lines.append("    }")
            lines.append(
                f"    atomic_store_explicit(&{flag}, {2 * msg.seq + 1}u, memory_order_release);"
            )
        elif isinstance(op, ReadOp):
            msg = op.message
            flag = f"flag_{msg.src_core}_{msg.dst_core}"
            arr = f"comm_{msg.src_core}_{msg.dst_core}"
            lines.append(f"    /* read {msg.name}: node {msg.src_node} from core {msg.src_core} */")
            lines.append(
                f"    while (atomic_load_explicit(&{flag}, memory_order_acquire) != {2 * msg.seq + 1}u) {{ }}"
            )
            lines.append(f"    for (int i = 0; i < {msg.elements}; ++i) {{")
            lines.append(f"        in_{msg.dst_node}_from_{msg.src_node}[i] = {arr}[i];")
            lines.append("    }")
            lines.append(
                f"    atomic_store_explicit(&{flag}, {2 * msg.seq + 2}u, memory_order_release);"
            )
    if not any(isinstance(op, ComputeOp) and op.node == sink for op in cp.ops):
        lines.append("    (void)output;")
    if not any(isinstance(op, ComputeOp) and not graph.parents(op.node) for op in cp.ops):
        lines.append("    (void)input;")
    lines.append("}")
    return "\n".join(lines) + "\n"


def emit_sequential(graph: TaskGraph, out_dir) -> dict:
    """Write a single-core build: kernels plus one entry point."""
    os.makedirs(out_dir, exist_ok=True)
    kh, kc = emit_kernels(graph)
    seq = emit_sequential_source(graph)
    files = {"kernels.h": kh, "kernels.c": kc, "inference_seq.c": seq}
    for name, text in files.items():
        with open(os.path.join(out_dir, name), "w", encoding="utf-8") as fh:
            fh.write(text)
    sink = graph.sinks()[0]
    manifest = {
        "mode": "sequential",
        "cores": 1,
        "input_elements": DEFAULT_ELEMENTS,
        "output_elements": output_elements(graph, sink),
        "sequential_entry": "inference_sequential",
        "entries": [],
        "channels": [],
        "sync_variables": 0,
        "sources": ["kernels.c", "inference_seq.c"],
        "headers": ["kernels.h"],
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest


def emit_parallel(graph: TaskGraph, sched: Schedule, out_dir) -> dict:
    """Write the multicore build: one source per core, shared state, kernels.

    The sequential entry point is emitted alongside so a differential harness
    can build both variants from one directory.
    """
    plans = plan(graph, sched)
    channels = channels_of(plans)
    os.makedirs(out_dir, exist_ok=True)
    kh, kc = emit_kernels(graph)
    sh, sc = emit_shared(sched.m, channels)
    files = {
        "kernels.h": kh,
        "kernels.c": kc,
        "shared.h": sh,
        "shared.c": sc,
        "inference_seq.c": emit_sequential_source(graph),
    }
    for cp in plans:
        files[f"inference_core_{cp.core}.c"] = emit_core_source(graph, sched, cp)
    for name, text in files.items():
        with open(os.path.join(out_dir, name), "w", encoding="utf-8") as fh:
            fh.write(text)
    sink = graph.sinks()[0]
    manifest = {
        "mode": "parallel",
        "cores": sched.m,
        "input_elements": DEFAULT_ELEMENTS,
        "output_elements": output_elements(graph, sink),
        "entries": [f"inference_core_{c}" for c in range(sched.m)],
        "sequential_entry": "inference_sequential",
        "channels": [
            {
                "src": ch.src_core,
                "dst": ch.dst_core,
                "flag": ch.flag_name,
                "array": ch.array_name,
                "buffer_elements": ch.buffer_elements,
                "message_count": len(ch.messages),
                "final_flag": ch.final_flag,
                "messages": [
                    {
                        "name": msg.name,
                        "seq": msg.seq,
                        "src_node": msg.src_node,
                        "dst_node": msg.dst_node,
                        "elements": msg.elements,
                    }
                    for msg in ch.messages
                ],
            }
            for ch in channels
        ],
        "sync_variables": count_sync_variables(sched.m),
        "sources": sorted(n for n in files if n.endswith(".c")),
        "headers": sorted(n for n in files if n.endswith(".h")),
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest
