"""Exact makespan minimization over schedules with duplication.

Two independent routes to the optimum are provided on purpose:

* ``brute_force_oracle`` exhaustively enumerates core assignments (each node
  to a non-empty core subset, bounded by its child count) and all per-core
  topological interleavings, timing each candidate greedily. It is the
  reference answer for tiny graphs and is kept free of search tricks.
* ``schedule_exact`` is a depth-first branch-and-bound over the same
  schedule class with lower-bound pruning, symmetry reduction and an
  optional wall-clock budget. It must agree with the oracle.

The module also exports the scheduling problem as solver-neutral constraint
text in two encodings ("tang" with explicit transfer variables, "improved"
without them) and can evaluate such text against a variable assignment.
"""

from __future__ import annotations

import itertools
import math
import re
import time
from dataclasses import dataclass

from .graph import (
    TOL,
    TaskGraph,
    compute_levels,
    critical_path_lower_bound,
    require_valid,
    sequential_makespan,
    topological_order,
)
from .schedule import (
    Placement,
    Schedule,
    makespan as schedule_makespan,
    prune_redundant,
    resolve_communications,
)
from .heuristics import schedule_dsh

ORACLE_MAX_NODES = 7


def _ancestor_masks(graph: TaskGraph) -> list[int]:
    masks = [0] * len(graph.nodes)
    for v in topological_order(graph):
        acc = 0
        for u in graph.parents(v):
            acc |= masks[u] | (1 << u)
        masks[v] = acc
    return masks


def _linear_extensions(members: tuple[int, ...], anc: list[int]) -> list[tuple[int, ...]]:
    """All orderings of members consistent with ancestor-before-descendant."""
    member_mask = 0
    for v in members:
        member_mask |= 1 << v
    results: list[tuple[int, ...]] = []

    def walk(prefix: list[int], placed: int, remaining: list[int]) -> None:
        if not remaining:
            results.append(tuple(prefix))
            return
        for i, v in enumerate(remaining):
            need = anc[v] & member_mask
            if need & ~placed:
                continue
            prefix.append(v)
            walk(prefix, placed | (1 << v), remaining[:i] + remaining[i + 1 :])
            prefix.pop()

    walk([], 0, sorted(members))
    return results


def _fixed_point_timing(
    graph: TaskGraph, m: int, rows: list[tuple[int, ...]]
) -> Schedule | None:
    """Least start times consistent with the given per-core orderings.

    Starts are the least fixed point of: start >= previous finish on the
    core, and for each parent the best arrival over that parent's instances.
    Returns None when no finite fixed point exists (an ordering that puts a
    consumer before its only producer).
    """
    instances: list[tuple[int, int]] = []
    index: dict[tuple[int, int], int] = {}
    for c, row in enumerate(rows):
        for v in row:
            index[(v, c)] = len(instances)
            instances.append((v, c))
    k = len(instances)
    start = [0.0] * k
    by_node: dict[int, list[int]] = {}
    for i, (v, c) in enumerate(instances):
        by_node.setdefault(v, []).append(i)
    max_passes = k + 3
    for _ in range(max_passes):
        changed = False
        for c, row in enumerate(rows):
            prev_finish = 0.0
            for v in row:
                i = index[(v, c)]
                s = prev_finish
                for u in graph.parents(v):
                    cost = graph.comm_cost(u, v)
                    arrivals = [
                        start[j] + graph.wcet(u) + (0.0 if instances[j][1] == c else cost)
                        for j in by_node[u]
                    ]
                    s = max(s, min(arrivals))
                if s > start[i] + TOL:
                    start[i] = s
                    changed = True
                prev_finish = start[i] + graph.wcet(v)
        if not changed:
            cores: list[list[Placement]] = [[] for _ in range(m)]
            for i, (v, c) in enumerate(instances):
                cores[c].append(Placement(v, c, start[i], start[i] + graph.wcet(v)))
            return Schedule(m, cores)
    return None


def brute_force_oracle(graph: TaskGraph, m: int) -> tuple[float, Schedule]:
    """Optimal makespan by exhaustive enumeration; only for tiny graphs."""
    require_valid(graph)
    n = len(graph.nodes)
    if n > ORACLE_MAX_NODES:
        raise ValueError(f"oracle is limited to {ORACLE_MAX_NODES} nodes, got {n}")
    if m < 1:
        raise ValueError("need at least one core")
    sink = graph.sinks()[0]
    anc = _ancestor_masks(graph)
    cp = critical_path_lower_bound(graph)
    cores = list(range(m))
    options: list[list[tuple[int, ...]]] = []
    for v in range(n):
        cap = 1 if v == sink else min(m, max(1, len(graph.children(v))))
        subsets = [
            combo
            for size in range(1, cap + 1)
            for combo in itertools.combinations(cores, size)
        ]
        options.append(subsets)

    best_ms = math.inf
    best_sched: Schedule | None = None
    for assignment in itertools.product(*options):
        loads = [0.0] * m
        for v, subset in enumerate(assignment):
            for c in subset:
                loads[c] += graph.wcet(v)
        if max(max(loads), cp) >= best_ms - TOL:
            continue
        members: list[tuple[int, ...]] = [
            tuple(v for v in range(n) if c in assignment[v]) for c in cores
        ]
        per_core_orders = [_linear_extensions(ms, anc) for ms in members]
        for rows in itertools.product(*per_core_orders):
            sched = _fixed_point_timing(graph, m, list(rows))
            if sched is None:
                continue
            ms = max((p.finish for p in sched.placements()), default=0.0)
            if ms < best_ms - TOL:
                best_ms = ms
                best_sched = sched
    assert best_sched is not None
    return best_ms, best_sched


@dataclass
class ExactResult:
    makespan: float
    schedule: Schedule
    proven_optimal: bool
    nodes_explored: int


class _SearchState:
    __slots__ = ("rows", "free", "finish", "counts", "scheduled", "work")

    def __init__(self, m: int):
        self.rows: list[tuple[int, ...]] = [() for _ in range(m)]
        self.free: list[float] = [0.0] * m
        # finish[(v, c)] of every committed instance
        self.finish: dict[tuple[int, int], float] = {}
        self.counts: dict[int, int] = {}
        self.scheduled: set[int] = set()
        self.work = 0.0

    def child(self) -> "_SearchState":
        other = _SearchState.__new__(_SearchState)
        other.rows = list(self.rows)
        other.free = list(self.free)
        other.finish = dict(self.finish)
        other.counts = dict(self.counts)
        other.scheduled = set(self.scheduled)
        other.work = self.work
        return other

    def key(self) -> tuple:
        return tuple(sorted(self.rows))


def _arrival(graph: TaskGraph, state: _SearchState, u: int, v: int, core: int) -> float:
    cost = graph.comm_cost(u, v)
    return min(
        f + (0.0 if c == core else cost)
        for (node, c), f in state.finish.items()
        if node == u
    )


def _place(graph: TaskGraph, state: _SearchState, v: int, core: int) -> float:
    start = state.free[core]
    for u in graph.parents(v):
        start = max(start, _arrival(graph, state, u, v, core))
    state.rows[core] = state.rows[core] + (v,)
    state.free[core] = start + graph.wcet(v)
    state.finish[(v, core)] = start + graph.wcet(v)
    state.counts[v] = state.counts.get(v, 0) + 1
    state.scheduled.add(v)
    state.work += graph.wcet(v)
    return start


def _lower_bound(
    graph: TaskGraph,
    state: _SearchState,
    levels: dict[int, float],
    order: list[int],
    total_left: float,
) -> float:
    lb = max(state.free)
    lb = max(lb, (state.work + total_left) / len(state.free))
    # earliest conceivable finish of any (possibly future) instance per node
    best_finish: dict[int, float] = {}
    for v in order:
        fresh = 0.0
        for u in graph.parents(v):
            fresh = max(fresh, best_finish[u])
        fresh += graph.wcet(v)
        existing = min(
            (f for (node, _), f in state.finish.items() if node == v),
            default=math.inf,
        )
        best_finish[v] = min(fresh, existing)
        if v not in state.scheduled:
            start_lb = fresh - graph.wcet(v)
            lb = max(lb, start_lb + levels[v])
    return lb


def schedule_exact(
    graph: TaskGraph, m: int, budget: float | None = None
) -> ExactResult:
    """Branch-and-bound over assignments, orderings and duplications.

    With no budget the search runs to exhaustion and the result is proven
    optimal. With a wall-clock budget (seconds) the search returns the best
    incumbent found so far, flagged accordingly. The warm start is the
    duplication heuristic, so the result is never worse than it.
    """
    require_valid(graph)
    if m < 1:
        raise ValueError("need at least one core")
    n = len(graph.nodes)
    sink = graph.sinks()[0]
    levels = compute_levels(graph)
    order = topological_order(graph)
    total = sequential_makespan(graph)
    deadline = None if budget is None else time.monotonic() + budget

    incumbent = prune_redundant(graph, schedule_dsh(graph, m))
    best_ms = schedule_makespan(incumbent)
    best_sched = incumbent

    caps = {
        v: (1 if v == sink else min(m, max(1, len(graph.children(v)))))
        for v in range(n)
    }
    signature: dict[int, tuple] = {}
    for v in range(n):
        signature[v] = (
            frozenset(graph.parents(v)),
            frozenset(graph.children(v)),
            graph.wcet(v),
            tuple(sorted((u, graph.comm_cost(u, v)) for u in graph.parents(v))),
            tuple(sorted((c, graph.comm_cost(v, c)) for c in graph.children(v))),
        )

    seen: set[tuple] = set()
    explored = 0
    out_of_time = False
    use_table = n <= 12

    def moves(state: _SearchState) -> list[tuple[int, int]]:
        done = state.scheduled
        ready = [
            v
            for v in range(n)
            if v not in done and all(u in done for u in graph.parents(v))
        ]
        reps: list[int] = []
        taken: set[tuple] = set()
        for v in sorted(ready, key=lambda u: (-levels[u], u)):
            sig = signature[v]
            if sig in taken:
                continue
            taken.add(sig)
            reps.append(v)
        allowed: list[int] = []
        saw_empty = False
        for c in range(m):
            if state.rows[c]:
                allowed.append(c)
            elif not saw_empty:
                allowed.append(c)
                saw_empty = True
        out: list[tuple[int, int]] = []
        for v in reps:
            for c in allowed:
                out.append((v, c))
        if len(done) < n:
            for u in sorted(done):
                if state.counts[u] >= caps[u]:
                    continue
                if not any(ch not in done for ch in graph.children(u)):
                    continue
                for c in allowed:
                    if (u, c) in state.finish:
                        continue
                    if any((ch, c) in state.finish for ch in graph.children(u)):
                        continue
                    out.append((u, c))
        return out

    def dfs(state: _SearchState) -> None:
        nonlocal best_ms, best_sched, explored, out_of_time
        if out_of_time:
            return
        if deadline is not None and time.monotonic() > deadline:
            out_of_time = True
            return
        explored += 1
        if len(state.scheduled) == n:
            cores: list[list[Placement]] = [[] for _ in range(m)]
            for (v, c), f in state.finish.items():
                cores[c].append(Placement(v, c, f - graph.wcet(v), f))
            cand = prune_redundant(graph, Schedule(m, cores))
            ms = max((p.finish for p in cand.placements()), default=0.0)
            if ms < best_ms - TOL:
                best_ms = ms
                best_sched = cand
            return
        total_left = sum(graph.wcet(v) for v in range(n) if v not in state.scheduled)
        for (v, c) in moves(state):
            left = total_left if v in state.scheduled else total_left - graph.wcet(v)
            child = state.child()
            _place(graph, child, v, c)
            if use_table:
                key = child.key()
                if key in seen:
                    continue
                seen.add(key)
            if _lower_bound(graph, child, levels, order, left) >= best_ms - TOL:
                continue
            dfs(child)
            if out_of_time:
                return

    dfs(_SearchState(m))
    return ExactResult(best_ms, best_sched, not out_of_time, explored)


# ---------------------------------------------------------------------------
# Solver-neutral constraint text.
#
# Grammar (one statement per line, '#' starts a comment):
#   VAR <name> (real|bin) <domain>
#   CON <tag> [<cmp> (& <cmp>)* ->] <cmp> (| <cmp>)*
#   MIN <name>
#   cmp    := sum (<=|>=|=) sum
#   sum    := term ((+|-) term)*
#   term   := factor (* factor)*
#   factor := number | name | min(sum, sum, ...)


def _fmt(x: float) -> str:
    return repr(float(x))


def export_model(graph: TaskGraph, m: int, encoding: str) -> str:
    """Emit the scheduling problem as constraint text in the given encoding."""
    require_valid(graph)
    if encoding not in ("tang", "improved"):
        raise ValueError(f"unknown encoding {encoding!r}")
    n = len(graph.nodes)
    sink = graph.sinks()[0]
    total = sequential_makespan(graph)
    lines: list[str] = [
        f"# encoding={encoding} cores={m} nodes={n} edges={len(graph.edges)}",
        "VAR makespan real [0,inf)",
    ]
    for v in range(n):
        for c in range(m):
            lines.append(f"VAR s_{v}_{c} real [0,inf)")
    for v in range(n):
        for c in range(m):
            lines.append(f"VAR f_{v}_{c} real [0,inf)")
    for v in range(n):
        for c in range(m):
            lines.append(f"VAR x_{v}_{c} bin {{0,1}}")
    if encoding == "tang":
        for e in graph.edges:
            for i in range(m):
                for j in range(m):
                    lines.append(f"VAR d_{e.src}_{i}_{e.dst}_{j} bin {{0,1}}")
    else:
        for v in range(n):
            lines.append(f"VAR ef_{v} real [0,inf)")

    con: list[str] = []
    for v in range(n):
        terms = " + ".join(f"x_{v}_{c}" for c in range(m))
        con.append(f"CON presence {terms} >= 1")
    con.append(
        "CON sink_once " + " + ".join(f"x_{sink}_{c}" for c in range(m)) + " = 1"
    )
    for v in range(n):
        for c in range(m):
            con.append(f"CON idle_start x_{v}_{c} = 0 -> s_{v}_{c} = 0")
    for c in range(m):
        for a in range(n):
            for b in range(a + 1, n):
                con.append(
                    f"CON contention x_{a}_{c} = 1 & x_{b}_{c} = 1 -> "
                    f"f_{a}_{c} <= s_{b}_{c} | f_{b}_{c} <= s_{a}_{c}"
                )
    if encoding == "tang":
        for v in range(n):
            t = _fmt(graph.wcet(v))
            for c in range(m):
                con.append(f"CON finish_link f_{v}_{c} = s_{v}_{c} + {t} * x_{v}_{c}")
        for e in graph.edges:
            w = _fmt(e.cost)
            for i in range(m):
                for j in range(m):
                    lag = "" if i == j else f" + {w}"
                    con.append(
                        f"CON transfer_precedence d_{e.src}_{i}_{e.dst}_{j} = 1 -> "
                        f"f_{e.src}_{i}{lag} <= s_{e.dst}_{j}"
                    )
        for v in range(n):
            children = graph.children(v)
            if not children:
                continue
            for i in range(m):
                terms = " + ".join(
                    f"d_{v}_{i}_{b}_{j}" for b in children for j in range(m)
                )
                con.append(f"CON sender x_{v}_{i} = 1 -> {terms} >= 1")
        for e in graph.edges:
            for j in range(m):
                terms = " + ".join(f"d_{e.src}_{i}_{e.dst}_{j}" for i in range(m))
                con.append(f"CON receiver x_{e.dst}_{j} = 1 -> {terms} = 1")
        for v in range(n):
            for c in range(m):
                con.append(f"CON makespan_bound makespan >= f_{v}_{c}")
    else:
        for v in range(n):
            if v == sink:
                continue
            cap = len(graph.children(v))
            terms = " + ".join(f"x_{v}_{c}" for c in range(m))
            con.append(f"CON dup_bound {terms} <= {cap}")
        for v in range(n):
            t = _fmt(graph.wcet(v))
            for c in range(m):
                con.append(f"CON finish_wcet x_{v}_{c} = 1 -> f_{v}_{c} = s_{v}_{c} + {t}")
                con.append(f"CON finish_default x_{v}_{c} = 0 -> f_{v}_{c} = {_fmt(total)}")
        for v in range(n):
            args = ", ".join(f"f_{v}_{c}" for c in range(m))
            con.append(f"CON earliest_finish ef_{v} = min({args})")
        for e in graph.edges:
            w = _fmt(e.cost)
            for c in range(m):
                con.append(
                    f"CON local_precedence x_{e.src}_{c} = 1 & x_{e.dst}_{c} = 1 -> "
                    f"f_{e.src}_{c} <= s_{e.dst}_{c}"
                )
                con.append(
                    f"CON remote_precedence x_{e.src}_{c} = 0 & x_{e.dst}_{c} = 1 -> "
                    f"ef_{e.src} + {w} <= s_{e.dst}_{c}"
                )
        for v in range(n):
            for c in range(m):
                con.append(f"CON makespan_bound x_{v}_{c} = 1 -> makespan >= f_{v}_{c}")
    lines.extend(con)
    lines.append("MIN makespan")
    return "\n".join(lines) + "\n"


def instantiate_solution(graph: TaskGraph, sched: Schedule, encoding: str) -> dict[str, float]:
    """Variable assignment for the exported model matching a schedule.

    Absent instances get the encoding's pinned values: start 0 and finish 0
    under "tang", start 0 and finish equal to the wcet sum under "improved".
    """
    if encoding not in ("tang", "improved"):
        raise ValueError(f"unknown encoding {encoding!r}")
    n = len(graph.nodes)
    m = sched.m
    total = sequential_makespan(graph)
    values: dict[str, float] = {}
    default_f = 0.0 if encoding == "tang" else total
    for v in range(n):
        for c in range(m):
            values[f"x_{v}_{c}"] = 0.0
            values[f"s_{v}_{c}"] = 0.0
            values[f"f_{v}_{c}"] = default_f
    span = 0.0
    for p in sched.placements():
        values[f"x_{p.node}_{p.core}"] = 1.0
        values[f"s_{p.node}_{p.core}"] = p.start
        values[f"f_{p.node}_{p.core}"] = p.finish
        span = max(span, p.finish)
    values["makespan"] = span
    if encoding == "tang":
        for e in graph.edges:
            for i in range(m):
                for j in range(m):
                    values[f"d_{e.src}_{i}_{e.dst}_{j}"] = 0.0
        for (v, c), sources in resolve_communications(graph, sched, strict=False).items():
            for u, rs in sources.items():
                values[f"d_{u}_{rs.producer.core}_{v}_{c}"] = 1.0
    else:
        for v in range(n):
            values[f"ef_{v}"] = min(values[f"f_{v}_{c}"] for c in range(m))
    return values


_TOKEN = re.compile(
    r"\s*(->|<=|>=|[=+\-*|&(),]|[A-Za-z_][A-Za-z0-9_]*|\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)"
)


def _tokenize(text: str) -> list[str]:
    out: list[str] = []
    pos = 0
    while pos < len(text) and text[pos:].strip():
        match = _TOKEN.match(text, pos)
        if match is None:
            raise ValueError(f"bad token at {text[pos:]!r}")
        out.append(match.group(1))
        pos = match.end()
    return out


class _ExprParser:
    def __init__(self, tokens: list[str], values: dict[str, float]):
        self.tokens = tokens
        self.pos = 0
        self.values = values

    def peek(self) -> str | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self) -> str:
        if self.pos >= len(self.tokens):
            raise ValueError("unexpected end of expression")
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, wanted: str) -> None:
        tok = self.take()
        if tok != wanted:
            raise ValueError(f"expected {wanted!r}, got {tok!r}")

    def factor(self) -> float:
        tok = self.take()
        if tok == "min":
            self.expect("(")
            args = [self.sum_expr()]
            while self.peek() == ",":
                self.take()
                args.append(self.sum_expr())
            self.expect(")")
            return min(args)
        if tok == "(":
            value = self.sum_expr()
            self.expect(")")
            return value
        if re.fullmatch(r"\d+(?:\.\d+)?(?:[eE][+-]?\d+)?", tok):
            return float(tok)
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", tok):
            raise ValueError(f"unexpected token {tok!r}")
        if tok not in self.values:
            raise KeyError(f"unbound variable {tok!r}")
        return self.values[tok]

    def term(self) -> float:
        value = self.factor()
        while self.peek() == "*":
            self.take()
            value *= self.factor()
        return value

    def sum_expr(self) -> float:
        value = self.term()
        while self.peek() in ("+", "-"):
            op = self.take()
            rhs = self.term()
            value = value + rhs if op == "+" else value - rhs
        return value

    def comparison(self) -> bool:
        lhs = self.sum_expr()
        op = self.take()
        rhs = self.sum_expr()
        if op == "<=":
            return lhs <= rhs + TOL
        if op == ">=":
            return lhs >= rhs - TOL
        if op == "=":
            return abs(lhs - rhs) <= TOL
        raise ValueError(f"unknown comparison {op!r}")

    def clause(self) -> bool:
        first = self.comparison()
        if self.peek() == "&" or self.peek() == "->":
            antecedent = first
            while self.peek() == "&":
                self.take()
                antecedent = self.comparison() and antecedent
            self.expect("->")
            consequent = self.comparison()
            while self.peek() == "|":
                self.take()
                consequent = self.comparison() or consequent
            return (not antecedent) or consequent
        consequent = first
        while self.peek() == "|":
            self.take()
            consequent = self.comparison() or consequent
        return consequent


def evaluate_model(text: str, values: dict[str, float]) -> list[str]:
    """Return the CON lines of the model text violated by the assignment."""
    violated: list[str] = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        kind, _, rest = line.partition(" ")
        if kind == "VAR":
            name = rest.split()[0]
            if name not in values:
                raise KeyError(f"no value for declared variable {name!r}")
            continue
        if kind == "MIN":
            continue
        if kind != "CON":
            raise ValueError(f"unknown statement {line!r}")
        _, _, expr = rest.partition(" ")
        parser = _ExprParser(_tokenize(expr), values)
        ok = parser.clause()
        if parser.peek() is not None:
            raise ValueError(f"trailing tokens in {line!r}")
        if not ok:
            violated.append(line)
    return violated
