"""List scheduling heuristics: insertion (ISH) and duplication (DSH).

Both walk the task list in descending static-level order (ties by ascending
node id) and greedily place each task on the core where it starts earliest,
then back-fill the idle gap a placement creates with ready tasks that fit
entirely inside it. DSH first tries to shrink the gap by duplicating the
parents responsible for the delaying arrivals onto the candidate core,
recursing when those parents are themselves delayed. A duplication list is
kept only if the task's start time strictly improves and the gain beats the
insertion work the copies would evict from the gap; whatever idle time the
duplicates leave behind is back-filled like in ISH.

On small graphs whose transfer costs dwarf the compute, greedy spreading can
end up slower than not parallelizing at all; both heuristics then return the
single-core schedule instead, so their makespan never exceeds the sequential
one.
"""

from __future__ import annotations

from .graph import (
    TOL,
    TaskGraph,
    compute_levels,
    require_valid,
    sequential_makespan,
    topological_order,
)
from .schedule import Placement, Schedule, makespan, prune_redundant


class PartialSchedule:
    """Mutable per-core rows built up by the list schedulers."""

    def __init__(self, m: int):
        if m < 1:
            raise ValueError("need at least one core")
        self.m = m
        self.rows: list[list[Placement]] = [[] for _ in range(m)]
        self.free: list[float] = [0.0] * m
        self.instances: dict[int, list[Placement]] = {}

    def clone(self) -> "PartialSchedule":
        other = PartialSchedule(self.m)
        other.rows = [list(row) for row in self.rows]
        other.free = list(self.free)
        other.instances = {v: list(ps) for v, ps in self.instances.items()}
        return other

    def scheduled(self) -> set[int]:
        return set(self.instances)

    def count(self, v: int) -> int:
        return len(self.instances.get(v, ()))

    def on_core(self, v: int, core: int) -> bool:
        return any(p.core == core for p in self.instances.get(v, ()))

    def child_on_core(self, graph: TaskGraph, v: int, core: int) -> bool:
        return any(self.on_core(c, core) for c in graph.children(v))

    def place(self, graph: TaskGraph, v: int, core: int, start: float) -> Placement:
        p = Placement(v, core, start, start + graph.wcet(v))
        row = self.rows[core]
        # keep rows chronological; gap insertions land before the tail
        idx = len(row)
        while idx > 0 and row[idx - 1].start > start:
            idx -= 1
        row.insert(idx, p)
        self.free[core] = max(self.free[core], p.finish)
        self.instances.setdefault(v, []).append(p)
        return p

    def to_schedule(self) -> Schedule:
        return Schedule(self.m, [list(row) for row in self.rows])


def arrival_bound(graph: TaskGraph, partial: PartialSchedule, v: int, core: int) -> float:
    """Earliest time all parent data of v can be on the given core."""
    bound = 0.0
    for u in graph.parents(v):
        cost = graph.comm_cost(u, v)
        instances = partial.instances.get(u)
        assert instances, f"parent {u} of {v} is not scheduled yet"
        arrival = min(
            p.finish + (0.0 if p.core == core else cost) for p in instances
        )
        bound = max(bound, arrival)
    return bound


def earliest_start(
    graph: TaskGraph, partial: PartialSchedule, v: int, core: int
) -> tuple[float, tuple[float, float] | None]:
    """Greedy start of v on the core, plus the idle gap it would leave.

    The gap is (core free time, start) when waiting on data forces the start
    past the core's free time, else None.
    """
    start = max(partial.free[core], arrival_bound(graph, partial, v, core))
    if start > partial.free[core] + TOL:
        return start, (partial.free[core], start)
    return start, None


def _priority_order(graph: TaskGraph) -> dict[int, tuple[float, int]]:
    levels = compute_levels(graph)
    return {v: (-levels[v], v) for v in range(len(graph.nodes))}


def _ready(graph: TaskGraph, partial: PartialSchedule) -> list[int]:
    done = partial.scheduled()
    return [
        v
        for v in range(len(graph.nodes))
        if v not in done and all(u in done for u in graph.parents(v))
    ]


def _pick_core(
    graph: TaskGraph, partial: PartialSchedule, v: int
) -> tuple[int, float, tuple[float, float] | None]:
    best = None
    for c in range(partial.m):
        start, gap = earliest_start(graph, partial, v, c)
        if best is None or (start, c) < (best[1], best[0]):
            best = (c, start, gap)
    assert best is not None
    return best


def _fill_gaps(
    graph: TaskGraph,
    partial: PartialSchedule,
    core: int,
    intervals: list[tuple[float, float]],
    priority: dict[int, tuple[float, int]],
) -> None:
    # Repeatedly insert the highest-priority fitting task until nothing
    # fits. Candidates are the tasks ready when the gap appeared; tasks that
    # only become ready through an insertion are left to the main loop.
    intervals = list(intervals)
    queue = sorted(_ready(graph, partial), key=lambda v: priority[v])
    while intervals and queue:
        placed = False
        for u in queue:
            bound = arrival_bound(graph, partial, u, core)
            wcet = graph.wcet(u)
            for i, (lo, hi) in enumerate(intervals):
                start = max(lo, bound)
                if start + wcet <= hi + TOL:
                    partial.place(graph, u, core, start)
                    queue.remove(u)
                    rest = []
                    if start - lo > TOL:
                        rest.append((lo, start))
                    if hi - (start + wcet) > TOL:
                        rest.append((start + wcet, hi))
                    intervals[i : i + 1] = rest
                    placed = True
                    break
            if placed:
                break
        if not placed:
            return


def _sequential_fallback(graph: TaskGraph, sched: Schedule) -> Schedule:
    """Spreading work across cores can lose to one core doing everything
    when transfer costs dwarf the compute; hand back the single-core
    schedule whenever the greedy result is slower than it."""
    if makespan(sched) <= sequential_makespan(graph) + TOL:
        return sched
    rows: list[list[Placement]] = [[] for _ in range(sched.m)]
    t = 0.0
    for v in topological_order(graph):
        rows[0].append(Placement(v, 0, t, t + graph.wcet(v)))
        t += graph.wcet(v)
    return Schedule(sched.m, rows)


def schedule_ish(graph: TaskGraph, m: int, fill_gaps: bool = True) -> Schedule:
    """Insertion scheduling heuristic. Never duplicates tasks."""
    require_valid(graph)
    priority = _priority_order(graph)
    partial = PartialSchedule(m)
    n = len(graph.nodes)
    while len(partial.scheduled()) < n:
        v = min(_ready(graph, partial), key=lambda u: priority[u])
        core, start, gap = _pick_core(graph, partial, v)
        partial.place(graph, v, core, start)
        if fill_gaps and gap is not None:
            _fill_gaps(graph, partial, core, [gap], priority)
    return _sequential_fallback(graph, partial.to_schedule())


def _dup_cap(graph: TaskGraph, v: int) -> int:
    return max(1, len(graph.children(v)))


def _eligible(graph: TaskGraph, partial: PartialSchedule, u: int, core: int) -> bool:
    # a copy must not exceed the per-node instance bound and must not land
    # after an already-placed child of u on the same core
    return (
        not partial.on_core(u, core)
        and partial.count(u) < _dup_cap(graph, u)
        and not partial.child_on_core(graph, u, core)
    )


def _instances_total(partial: PartialSchedule) -> int:
    return sum(len(ps) for ps in partial.instances.values())


def _wcet_sum(graph: TaskGraph, partial: PartialSchedule) -> float:
    return sum(graph.wcet(v) * len(ps) for v, ps in partial.instances.items())


def _fill_wcet(
    graph: TaskGraph,
    state: PartialSchedule,
    core: int,
    intervals: list[tuple[float, float]],
    priority: dict[int, tuple[float, int]],
) -> float:
    """Run the insertion pass on state and return the work it placed."""
    before = _wcet_sum(graph, state)
    if intervals:
        _fill_gaps(graph, state, core, intervals, priority)
    return _wcet_sum(graph, state) - before


def _delaying_parent(
    graph: TaskGraph, partial: PartialSchedule, v: int, core: int
) -> int | None:
    """Parent whose data arrives last on the core; ties go to the lowest id."""
    best: tuple[float, int] | None = None
    for u in graph.parents(v):
        cost = graph.comm_cost(u, v)
        arrival = min(
            p.finish + (0.0 if p.core == core else cost)
            for p in partial.instances[u]
        )
        if best is None or (arrival, -u) > (best[0], -best[1]):
            best = (arrival, u)
    if best is None or best[0] <= partial.free[core] + TOL:
        return None
    return best[1]


def _duplicate_ancestors(
    graph: TaskGraph, partial: PartialSchedule, v: int, core: int
) -> tuple[PartialSchedule, float]:
    """Duplicate ancestors of v onto the core while v's start there improves.

    Walks the delaying-parent ladder: repeatedly copy the parent whose data
    arrives last. A single copy may leave the start unchanged (two parents
    can tie as the latest arrival, and only copying both helps), so equal
    steps are walked through, but a worsening step ends the walk and only
    the best state seen is returned. v itself is not placed, partial is not
    mutated; the result may alias partial when no copy paid off.
    """

    def start_on(state: PartialSchedule) -> float:
        return max(state.free[core], arrival_bound(graph, state, v, core))

    best_state = partial
    best_start = start_on(partial)
    cur = partial
    while True:
        start = start_on(cur)
        if start <= cur.free[core] + TOL:
            break
        u = _delaying_parent(graph, cur, v, core)
        if u is None or not _eligible(graph, cur, u, core):
            break
        attempt = cur.clone()
        _duplicate_one(graph, attempt, u, core)
        new_start = start_on(attempt)
        if new_start > start + TOL:
            break
        cur = attempt
        if new_start < best_start - TOL:
            best_state, best_start = attempt, new_start
    return best_state, best_start


def _duplicate_one(graph: TaskGraph, partial: PartialSchedule, u: int, core: int) -> None:
    """Place a copy of u on the core, mutating partial.

    The copy's own delayed inputs are pulled up the same ladder first when
    that lets it start earlier. Eligibility is the caller's responsibility.
    """
    state, _ = _duplicate_ancestors(graph, partial, u, core)
    if state is not partial:
        partial.rows = state.rows
        partial.free = state.free
        partial.instances = state.instances
    partial.place(
        graph, u, core, max(partial.free[core], arrival_bound(graph, partial, u, core))
    )


def _idle_intervals(
    row: list[Placement], lo: float, hi: float
) -> list[tuple[float, float]]:
    """Free sub-intervals of [lo, hi) on a chronologically sorted core row."""
    out: list[tuple[float, float]] = []
    cursor = lo
    for p in row:
        if p.finish <= lo + TOL or p.start >= hi - TOL:
            continue
        if p.start - cursor > TOL:
            out.append((cursor, min(p.start, hi)))
        cursor = max(cursor, p.finish)
    if hi - cursor > TOL:
        out.append((cursor, hi))
    return out


def _duplication_pays(
    graph: TaskGraph,
    partial: PartialSchedule,
    overlay: PartialSchedule,
    v: int,
    core: int,
    start: float,
    priority: dict[int, tuple[float, int]],
) -> bool:
    """True when the copies' start-time gain beats the ready work they evict.

    Copies squat on gap time the insertion pass could otherwise spend on
    tasks that must run anyway, so the duplication list is charged with the
    fill work possible without it and credited with the fill work still
    possible around it. On starved cores both fills come up empty and any
    strict gain wins, which keeps duplication aggressive exactly where core
    time is not contended.
    """
    base_start = max(partial.free[core], arrival_bound(graph, partial, v, core))
    lo = partial.free[core]
    with_dups = overlay.clone()
    kept_intervals = _idle_intervals(with_dups.rows[core], lo, start)
    with_dups.place(graph, v, core, start)
    fill_kept = _fill_wcet(graph, with_dups, core, kept_intervals, priority)
    without = partial.clone()
    without.place(graph, v, core, base_start)
    lost_intervals = [(lo, base_start)] if base_start > lo + TOL else []
    fill_lost = _fill_wcet(graph, without, core, lost_intervals, priority)
    return base_start - start > fill_lost - fill_kept + TOL


def schedule_dsh(graph: TaskGraph, m: int) -> Schedule:
    """Duplication scheduling heuristic; output is pruned of unused copies."""
    require_valid(graph)
    priority = _priority_order(graph)
    partial = PartialSchedule(m)
    n = len(graph.nodes)
    while len(partial.scheduled()) < n:
        v = min(_ready(graph, partial), key=lambda u: priority[u])
        best: tuple[tuple[float, int, int], PartialSchedule] | None = None
        for c in range(partial.m):
            overlay, start = _duplicate_ancestors(graph, partial, v, c)
            if overlay is not partial and not _duplication_pays(
                graph, partial, overlay, v, c, start, priority
            ):
                overlay = partial
                start = max(partial.free[c], arrival_bound(graph, partial, v, c))
            dups = _instances_total(overlay) - _instances_total(partial)
            key = (start, dups, c)
            if best is None or key < best[0]:
                best = (key, overlay)
        assert best is not None
        (start, _, core), overlay = best
        # duplicates may not pack the gap tightly, so back-fill whatever idle
        # time remains between the old free point and v's start
        window_lo = partial.free[core]
        partial = overlay
        intervals = _idle_intervals(partial.rows[core], window_lo, start)
        partial.place(graph, v, core, start)
        if intervals:
            _fill_gaps(graph, partial, core, intervals, priority)
    return _sequential_fallback(graph, prune_redundant(graph, partial.to_schedule()))
