"""Schedules with task duplication: instances, validity, communication resolution.

A schedule assigns node instances to cores with start times. A node may run
on several cores (duplication) but at most once per core; the sink is never
duplicated. Precedence is existential: a consumer needs at least one
instance of each parent whose data arrives in time, where cross-core data
pays the edge cost and same-core data is free.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .graph import TOL, TaskGraph, sequential_makespan


class InvalidScheduleError(ValueError):
    """Raised by operations that require a valid schedule."""


@dataclass(frozen=True)
class Placement:
    node: int
    core: int
    start: float
    finish: float


@dataclass
class Schedule:
    m: int
    cores: list[list[Placement]]

    def __post_init__(self) -> None:
        self.cores = [sorted(core, key=lambda p: (p.start, p.node)) for core in self.cores]

    def placements(self):
        for core in self.cores:
            yield from core

    def instances(self, node: int) -> list[Placement]:
        return [p for p in self.placements() if p.node == node]

    def on_core(self, node: int, core: int) -> Placement | None:
        for p in self.cores[core]:
            if p.node == node:
                return p
        return None


def makespan(sched: Schedule) -> float:
    """Largest finish time; raises on structurally broken schedules."""
    problems = _structural_report(sched)
    if problems:
        raise InvalidScheduleError("; ".join(problems))
    return max((p.finish for p in sched.placements()), default=0.0)


def speedup(graph: TaskGraph, sched: Schedule) -> float:
    """Sequential makespan over parallel makespan."""
    report = check_validity(graph, sched)
    if report:
        raise InvalidScheduleError("; ".join(report))
    span = max((p.finish for p in sched.placements()), default=0.0)
    if span <= 0.0:
        raise ValueError("speedup undefined for zero makespan")
    return sequential_makespan(graph) / span


def _structural_report(sched: Schedule) -> list[str]:
    report: list[str] = []
    if len(sched.cores) != sched.m:
        report.append(f"expected {sched.m} core rows, got {len(sched.cores)}")
        return report
    for c, core in enumerate(sched.cores):
        seen: set[int] = set()
        for p in core:
            if p.core != c:
                report.append(f"placement of node {p.node} in row {c} claims core {p.core}")
            if p.node in seen:
                report.append(f"node {p.node} appears twice on core {c}")
            seen.add(p.node)
            if p.start < -TOL:
                report.append(f"node {p.node} on core {c} starts at {p.start} < 0")
        for a, b in zip(core, core[1:]):
            if a.finish > b.start + TOL:
                report.append(
                    f"core {c}: node {a.node} [{a.start}, {a.finish}) overlaps "
                    f"node {b.node} [{b.start}, {b.finish})"
                )
    return report


def check_validity(graph: TaskGraph, sched: Schedule) -> list[str]:
    """Return all validity violations; empty means the schedule is valid.

    Checks structure, wcet-consistent finish times, presence of every node,
    a unique sink instance, and existential precedence over instances.
    """
    report = _structural_report(sched)
    n = len(graph.nodes)
    present: set[int] = set()
    for p in sched.placements():
        if not (0 <= p.node < n):
            report.append(f"unknown node {p.node}")
            continue
        present.add(p.node)
        if abs(p.finish - (p.start + graph.wcet(p.node))) > TOL:
            report.append(
                f"node {p.node} on core {p.core}: finish {p.finish} != "
                f"start + wcet {p.start + graph.wcet(p.node)}"
            )
    for v in range(n):
        if v not in present:
            report.append(f"unscheduled node {v}")
    sinks = graph.sinks()
    if len(sinks) == 1:
        count = len(sched.instances(sinks[0]))
        if count > 1:
            report.append(f"sink node {sinks[0]} duplicated {count} times")
    if report:
        return report
    for pv in sched.placements():
        for u in graph.parents(pv.node):
            cost = graph.comm_cost(u, pv.node)
            ok = any(
                pu.finish + (0.0 if pu.core == pv.core else cost) <= pv.start + TOL
                for pu in sched.instances(u)
            )
            if not ok:
                report.append(
                    f"node {pv.node} on core {pv.core} starts at {pv.start} "
                    f"before data from parent {u} can arrive"
                )
    return report


def require_valid_schedule(graph: TaskGraph, sched: Schedule) -> None:
    report = check_validity(graph, sched)
    if report:
        raise InvalidScheduleError("; ".join(report))


@dataclass(frozen=True)
class ResolvedSource:
    producer: Placement
    arrival: float


def resolve_communications(
    graph: TaskGraph, sched: Schedule, strict: bool = True
) -> dict[tuple[int, int], dict[int, ResolvedSource]]:
    """Pick one producer instance per (consumer instance, parent edge).

    Deterministic: minimum arrival wins, ties prefer the consumer's own core,
    then the lowest core index. Keys are (node, core) of the consumer.

    With strict=False the schedule is not validated first; edges whose parent
    has no instance at all are left unresolved instead of raising.
    """
    if strict:
        require_valid_schedule(graph, sched)
    resolution: dict[tuple[int, int], dict[int, ResolvedSource]] = {}
    for pv in sched.placements():
        chosen: dict[int, ResolvedSource] = {}
        for u in graph.parents(pv.node):
            cost = graph.comm_cost(u, pv.node)
            best: tuple[float, int, int] | None = None
            best_p: Placement | None = None
            for pu in sched.instances(u):
                arrival = pu.finish + (0.0 if pu.core == pv.core else cost)
                key = (arrival, 0 if pu.core == pv.core else 1, pu.core)
                if best is None or key < best:
                    best, best_p = key, pu
            if best is None or best_p is None:
                continue
            chosen[u] = ResolvedSource(best_p, best[0])
        resolution[(pv.node, pv.core)] = chosen
    return resolution


def prune_redundant(graph: TaskGraph, sched: Schedule) -> Schedule:
    """Drop instances that feed no resolved consumer, to fixpoint.

    Placement times are untouched, so the makespan of a schedule produced by
    a list scheduler is preserved.
    """
    current = sched
    while True:
        resolution = resolve_communications(graph, current)
        used: set[tuple[int, int]] = set()
        for sources in resolution.values():
            for rs in sources.values():
                used.add((rs.producer.node, rs.producer.core))
        sinks = graph.sinks()
        keep_always = set(sinks)
        new_cores: list[list[Placement]] = []
        dropped = 0
        for core in current.cores:
            row = []
            for p in core:
                if (
                    p.node in keep_always
                    or (p.node, p.core) in used
                    or not graph.children(p.node)
                ):
                    row.append(p)
                else:
                    dropped += 1
            new_cores.append(row)
        if dropped == 0:
            return current
        current = Schedule(current.m, new_cores)


def duplicate_count(graph: TaskGraph, sched: Schedule) -> int:
    """Number of instances beyond one per node."""
    total = sum(1 for _ in sched.placements())
    return total - len(graph.nodes)


# Constraint semantics checkers.
#
# Two encodings of the same scheduling problem are supported:
#   "tang":      explicit per-transfer decision variables, absent instances
#                pinned to start = finish = 0;
#   "improved":  no transfer variables, absent instances pinned to
#                start = 0, finish = sum of all wcets.

ENCODINGS = ("tang", "improved")

_TANG_TAGS = (
    "presence",
    "finish_link",
    "idle_start",
    "contention",
    "transfer_precedence",
    "sink_once",
    "sender",
    "receiver",
)

_IMPROVED_TAGS = (
    "presence",
    "idle_start",
    "contention",
    "sink_once",
    "dup_bound",
    "local_precedence",
    "remote_precedence",
    "finish_wcet",
    "finish_default",
)


def check_constraint_semantics(graph: TaskGraph, sched: Schedule, encoding: str) -> list[str]:
    """Evaluate every constraint of the chosen encoding against a schedule.

    Returns one entry per violated constraint instance, prefixed with the
    constraint tag. The schedule only needs to be structurally sane; this is
    the ground-truth oracle the exported solver models are compared against.
    """
    if encoding not in ENCODINGS:
        raise ValueError(f"unknown encoding {encoding!r}")
    n = len(graph.nodes)
    m = sched.m
    seq = sequential_makespan(graph)
    x = [[0] * m for _ in range(n)]
    s = [[0.0] * m for _ in range(n)]
    if encoding == "tang":
        f = [[0.0] * m for _ in range(n)]
    else:
        f = [[seq] * m for _ in range(n)]
    for p in sched.placements():
        x[p.node][p.core] = 1
        s[p.node][p.core] = p.start
        f[p.node][p.core] = p.finish

    report: list[str] = []

    def violated(tag: str, msg: str) -> None:
        report.append(f"{tag}: {msg}")

    sinks = graph.sinks()
    sink = sinks[0] if len(sinks) == 1 else None

    for v in range(n):
        if sum(x[v]) < 1:
            violated("presence", f"node {v} has no instance")
    if sink is not None and sum(x[sink]) != 1:
        violated("sink_once", f"sink {sink} scheduled {sum(x[sink])} times")

    for c in range(m):
        row = [p for p in sched.cores[c]]
        for i in range(len(row)):
            for j in range(i + 1, len(row)):
                a, b = row[i], row[j]
                if not (a.finish <= b.start + TOL or b.finish <= a.start + TOL):
                    violated(
                        "contention",
                        f"nodes {a.node} and {b.node} overlap on core {c}",
                    )

    for v in range(n):
        for c in range(m):
            if x[v][c] == 0 and abs(s[v][c]) > TOL:
                violated("idle_start", f"absent instance ({v}, {c}) has start {s[v][c]}")

    if encoding == "tang":
        for v in range(n):
            t = graph.wcet(v)
            for c in range(m):
                if abs(f[v][c] - (s[v][c] + t * x[v][c])) > TOL:
                    violated(
                        "finish_link",
                        f"instance ({v}, {c}) finish {f[v][c]} != start + wcet * x",
                    )
        # Transfers are recovered from the schedule itself: each consumer
        # instance is fed by its minimum-arrival producer instance. The
        # non-strict resolution works on invalid schedules too, so late
        # transfers surface here instead of being masked by a validity error.
        resolution = resolve_communications(graph, sched, strict=False)
        transfers: set[tuple[int, int, int, int]] = set()
        for (v, c), sources in resolution.items():
            for u, rs in sources.items():
                transfers.add((u, rs.producer.core, v, c))
        for (u, i, v, j) in transfers:
            w = graph.comm_cost(u, v)
            lag = 0.0 if i == j else w
            if f[u][i] + lag > s[v][j] + TOL:
                violated(
                    "transfer_precedence",
                    f"transfer ({u}@{i}) -> ({v}@{j}) arrives after start",
                )
        for p in sched.placements():
            if graph.children(p.node) and not any(
                t[0] == p.node and t[1] == p.core for t in transfers
            ):
                violated(
                    "sender",
                    f"instance ({p.node}, {p.core}) feeds no consumer",
                )
        for p in sched.placements():
            for u in graph.parents(p.node):
                count = sum(
                    1 for t in transfers if t[0] == u and t[2] == p.node and t[3] == p.core
                )
                if count != 1:
                    violated(
                        "receiver",
                        f"instance ({p.node}, {p.core}) has {count} sources for parent {u}",
                    )
        return report

    # improved encoding
    for v in range(n):
        if v == sink:
            continue
        cap = len(graph.children(v))
        if sum(x[v]) > cap:
            violated("dup_bound", f"node {v} has {sum(x[v])} instances, child count {cap}")
    for v in range(n):
        t = graph.wcet(v)
        for c in range(m):
            if x[v][c] == 1 and abs(f[v][c] - (s[v][c] + t)) > TOL:
                violated("finish_wcet", f"instance ({v}, {c}) finish != start + wcet")
            if x[v][c] == 0 and abs(f[v][c] - seq) > TOL:
                violated("finish_default", f"absent instance ({v}, {c}) finish != wcet sum")
    for e in graph.edges:
        u, v, w = e.src, e.dst, e.cost
        earliest = min(f[u])
        for c in range(m):
            if x[v][c] != 1:
                continue
            if x[u][c] == 1:
                if f[u][c] > s[v][c] + TOL:
                    violated(
                        "local_precedence",
                        f"edge ({u}, {v}): local producer on core {c} finishes late",
                    )
            else:
                if earliest + w > s[v][c] + TOL:
                    violated(
                        "remote_precedence",
                        f"edge ({u}, {v}): data cannot reach core {c} by {s[v][c]}",
                    )
    return report


def schedule_to_dict(sched: Schedule) -> dict:
    return {
        "m": sched.m,
        "cores": [
            [{"node": p.node, "start": p.start} for p in core] for core in sched.cores
        ],
    }


def save_schedule(sched: Schedule, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(schedule_to_dict(sched), fh, indent=2)
        fh.write("\n")


def load_schedule(source, graph: TaskGraph) -> Schedule:
    """Finish times are recomputed from the graph's wcets."""
    if isinstance(source, dict):
        data = source
    elif hasattr(source, "read"):
        data = json.load(source)
    else:
        with open(source, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    m = int(data["m"])
    cores: list[list[Placement]] = []
    for c, row in enumerate(data["cores"]):
        placements = []
        for item in row:
            node = int(item["node"])
            start = float(item["start"])
            wcet = graph.wcet(node) if 0 <= node < len(graph.nodes) else 0.0
            placements.append(Placement(node, c, start, start + wcet))
        cores.append(placements)
    if len(cores) < m:
        cores.extend([] for _ in range(m - len(cores)))
    return Schedule(m, cores)


def render_gantt(graph: TaskGraph, sched: Schedule) -> str:
    """Plain text Gantt chart, one row per core, idle time marked."""
    lines = []
    for c, core in enumerate(sched.cores):
        parts = []
        cursor = 0.0
        for p in core:
            if p.start > cursor + TOL:
                parts.append(f"░idle {cursor:g}..{p.start:g}░")
            label = graph.nodes[p.node].label if 0 <= p.node < len(graph.nodes) else "?"
            parts.append(f"[{p.start:g}..{p.finish:g}) {label}")
            cursor = max(cursor, p.finish)
        body = " ".join(parts) if parts else "(idle)"
        lines.append(f"core {c} | {body}")
    return "\n".join(lines) + "\n"
