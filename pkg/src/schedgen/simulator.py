"""Discrete event simulation of the generated communication plans.

The simulator executes per-core op sequences under the single-buffer flag
protocol: a write at sequence k blocks until the channel flag reaches 2k,
a read blocks until 2k+1 and until the payload has been in flight for the
edge's communication cost. It reports the simulated makespan, a full event
trace, writes that were postponed by a busy buffer, and deadlocks with the
cycle of cores that wait on each other.
"""

from __future__ import annotations

from dataclasses import dataclass

from .graph import TOL, TaskGraph
from .schedule import Schedule, makespan as schedule_makespan
from .codegen import ComputeOp, CorePlan, ReadOp, WriteOp, plan


@dataclass(frozen=True)
class SimEvent:
    time: float
    core: int
    kind: str  # compute_start, compute_done, write_done, read_done
    node: int | None = None
    message: str | None = None
    waited: float = 0.0


@dataclass
class SimResult:
    makespan: float
    events: list[SimEvent]
    deadlock: dict | None
    blocked_writes: list[tuple[str, float]]

    @property
    def deadlocked(self) -> bool:
        return self.deadlock is not None


class _ChannelState:
    __slots__ = ("flag", "flag_time", "available")

    def __init__(self) -> None:
        self.flag = 0
        self.flag_time = 0.0
        self.available = 0.0


def simulate(graph: TaskGraph, plans: list[CorePlan], margin: float = 1.0) -> SimResult:
    """Run the plans to completion or to a deadlock.

    All wcets and communication costs are scaled by ``margin``. Op completion
    times are a least fixed point of the protocol constraints, so the result
    does not depend on the interleaving the loop below happens to pick.
    """
    if margin <= 0:
        raise ValueError("margin must be positive")
    channels: dict[tuple[int, int], _ChannelState] = {}
    for cp in plans:
        for op in cp.ops:
            if isinstance(op, (ReadOp, WriteOp)):
                channels.setdefault(op.message.channel, _ChannelState())
    core_time = {cp.core: 0.0 for cp in plans}
    op_index = {cp.core: 0 for cp in plans}
    arrived_at: dict[tuple[int, int], float] = {}
    events: list[SimEvent] = []
    blocked_writes: list[tuple[str, float]] = []

    def try_step(cp: CorePlan) -> bool:
        c = cp.core
        i = op_index[c]
        if i >= len(cp.ops):
            return False
        op = cp.ops[i]
        now = core_time[c]
        arrived_at.setdefault((c, i), now)
        if isinstance(op, ComputeOp):
            dur = graph.wcet(op.node) * margin
            events.append(SimEvent(now, c, "compute_start", node=op.node))
            events.append(SimEvent(now + dur, c, "compute_done", node=op.node))
            core_time[c] = now + dur
        elif isinstance(op, WriteOp):
            msg = op.message
            ch = channels[msg.channel]
            if ch.flag != 2 * msg.seq:
                return False
            done = max(now, ch.flag_time)
            # lateness against the schedule's transfer departure, not against
            # the moment this core got here: any downstream slowdown traces
            # back to some write finishing past its model time
            waited = done - msg.model_depart * margin
            if waited > TOL:
                blocked_writes.append((msg.name, waited))
            cost = graph.comm_cost(msg.src_node, msg.dst_node) * margin
            ch.flag = 2 * msg.seq + 1
            ch.flag_time = done
            ch.available = done + cost
            events.append(
                SimEvent(done, c, "write_done", message=msg.name, waited=max(0.0, waited))
            )
            core_time[c] = done
        elif isinstance(op, ReadOp):
            msg = op.message
            ch = channels[msg.channel]
            if ch.flag != 2 * msg.seq + 1:
                return False
            done = max(now, ch.available)
            waited = done - arrived_at[(c, i)]
            ch.flag = 2 * msg.seq + 2
            ch.flag_time = done
            events.append(
                SimEvent(done, c, "read_done", message=msg.name, waited=waited)
            )
            core_time[c] = done
        else:
            raise TypeError(f"unknown op {op!r}")
        op_index[c] += 1
        return True

    while True:
        progressed = False
        for cp in plans:
            while try_step(cp):
                progressed = True
        if all(op_index[cp.core] >= len(cp.ops) for cp in plans):
            deadlock = None
            break
        if not progressed:
            deadlock = _diagnose(plans, op_index, channels)
            break

    span = max((e.time for e in events), default=0.0)
    return SimResult(span, sorted(events, key=lambda e: (e.time, e.core)), deadlock, blocked_writes)


def _diagnose(plans, op_index, channels) -> dict:
    waiting: dict[int, tuple[str, int]] = {}
    details: list[str] = []
    for cp in plans:
        i = op_index[cp.core]
        if i >= len(cp.ops):
            continue
        op = cp.ops[i]
        msg = op.message
        ch = channels[msg.channel]
        if isinstance(op, WriteOp):
            # waiting for the reader core to consume the previous message
            waiting[cp.core] = ("write", msg.dst_core)
            details.append(
                f"core {cp.core} waits to write {msg.name} "
                f"(flag {ch.flag}, needs {2 * msg.seq})"
            )
        elif isinstance(op, ReadOp):
            waiting[cp.core] = ("read", msg.src_core)
            details.append(
                f"core {cp.core} waits to read {msg.name} "
                f"(flag {ch.flag}, needs {2 * msg.seq + 1})"
            )
    cycle: list[int] = []
    for start in sorted(waiting):
        seen: dict[int, int] = {}
        node = start
        path: list[int] = []
        while node in waiting and node not in seen:
            seen[node] = len(path)
            path.append(node)
            node = waiting[node][1]
        if node in seen:
            cycle = path[seen[node] :]
            break
    return {"waiting": details, "cycle": cycle}


@dataclass
class ComparisonReport:
    predicted: float
    simulated: float
    deadlock: dict | None
    blocked_writes: list[tuple[str, float]]

    @property
    def matches(self) -> bool:
        return self.deadlock is None and abs(self.predicted - self.simulated) <= TOL


def compare_predicted(graph: TaskGraph, sched: Schedule, margin: float = 1.0) -> ComparisonReport:
    """Simulate the schedule's plans and compare against its predicted makespan.

    The prediction scales linearly with the margin. A simulated makespan above
    the prediction always comes with the list of writes that were postponed
    past their producer's finish by a still-occupied buffer.
    """
    plans = plan(graph, sched)
    result = simulate(graph, plans, margin=margin)
    predicted = schedule_makespan(sched) * margin
    return ComparisonReport(predicted, result.makespan, result.deadlock, result.blocked_writes)


def simulated_gantt(graph: TaskGraph, plans: list[CorePlan], result: SimResult) -> str:
    """Text Gantt of simulated compute phases, one row per core."""
    rows: dict[int, list[tuple[float, float, int]]] = {cp.core: [] for cp in plans}
    pending: dict[tuple[int, int], float] = {}
    for e in result.events:
        if e.kind == "compute_start":
            pending[(e.core, e.node)] = e.time
        elif e.kind == "compute_done":
            start = pending.pop((e.core, e.node))
            rows[e.core].append((start, e.time, e.node))
    lines = []
    for core in sorted(rows):
        parts = []
        cursor = 0.0
        for start, end, node in sorted(rows[core]):
            if start > cursor + TOL:
                parts.append(f"░idle {cursor:g}..{start:g}░")
            parts.append(f"[{start:g}..{end:g}) {graph.nodes[node].label}")
            cursor = max(cursor, end)
        lines.append(f"core {core} | " + (" ".join(parts) if parts else "(idle)"))
    return "\n".join(lines) + "\n"
