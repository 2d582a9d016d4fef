"""Symbolic trace graphs and the relations defined on them.

A graph holds a set of events and cross-thread happens-before edges,
each labelled with the path constraint under which the two events
conflict.  Program order between events of one thread is implicit.
Stored graphs are transitively reduced, so structural equality of two
graphs is meaningful.
"""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Sequence

from .constraints import TRUE, PathConstraint
from .explore import Explorer, ExploredClass
from .program import (
    DEFAULT_CEILING,
    Event,
    Execution,
    ExplosionError,
    InputState,
    Program,
    ProgramError,
    StepSignal,
    access_constraint,
    replay,
)

Edge = tuple[Event, PathConstraint, Event]


class TraceError(ValueError):
    pass


@dataclass(frozen=True)
class SymbolicTraceGraph:
    events: frozenset[Event]
    edges: frozenset[Edge] = frozenset()

    def __post_init__(self):
        for src, _, dst in self.edges:
            if src not in self.events or dst not in self.events:
                raise TraceError(f"edge {src} -> {dst} references an event outside the graph")

    @classmethod
    def of(cls, events: Iterable[Event], edges: Iterable[Edge] = ()) -> "SymbolicTraceGraph":
        return cls(frozenset(events), frozenset(edges))

    @property
    def constraints(self) -> frozenset[PathConstraint]:
        return frozenset(c for _, c, _ in self.edges)

    @cached_property
    def incoming(self) -> dict[Event, tuple[Edge, ...]]:
        out: dict[Event, list[Edge]] = defaultdict(list)
        for e in sorted(self.edges):
            out[e[2]].append(e)
        return {k: tuple(v) for k, v in out.items()}

    @cached_property
    def outgoing(self) -> dict[Event, tuple[Edge, ...]]:
        out: dict[Event, list[Edge]] = defaultdict(list)
        for e in sorted(self.edges):
            out[e[0]].append(e)
        return {k: tuple(v) for k, v in out.items()}

    @cached_property
    def thread_events(self) -> dict[int, list[Event]]:
        out: dict[int, list[Event]] = defaultdict(list)
        for e in sorted(self.events):
            out[e.thread].append(e)
        return dict(out)

    def successors(self, e: Event) -> list[Event]:
        """Direct successors: next event of the same thread plus edge targets."""
        out = [dst for _, _, dst in self.outgoing.get(e, ())]
        chain = self.thread_events.get(e.thread, [])
        i = chain.index(e)
        if i + 1 < len(chain):
            out.append(chain[i + 1])
        return out

    def up_closure(self, roots: Iterable[Event]) -> set[Event]:
        seen: set[Event] = set()
        todo = deque(r for r in roots if r in self.events)
        while todo:
            e = todo.popleft()
            if e in seen:
                continue
            seen.add(e)
            todo.extend(self.successors(e))
        return seen

    def restrict(self, keep: Iterable[Event]) -> "SymbolicTraceGraph":
        keep = frozenset(keep) & self.events
        return SymbolicTraceGraph(
            keep, frozenset(e for e in self.edges if e[0] in keep and e[2] in keep)
        )

    def is_acyclic(self) -> bool:
        indeg = {e: 0 for e in self.events}
        for e in self.events:
            for s in self.successors(e):
                indeg[s] += 1
        todo = deque(e for e, d in indeg.items() if d == 0)
        seen = 0
        while todo:
            e = todo.popleft()
            seen += 1
            for s in self.successors(e):
                indeg[s] -= 1
                if indeg[s] == 0:
                    todo.append(s)
        return seen == len(self.events)

    def active_incoming(self, bindings) -> dict[Event, tuple[Event, ...]]:
        """Sources of edges whose constraint holds, per target event."""
        out = {}
        for dst, edges in self.incoming.items():
            srcs = tuple(s for s, c, _ in edges if c.evaluate(bindings))
            if srcs:
                out[dst] = srcs
        return out

    def __len__(self) -> int:
        return len(self.events)


def transitive_reduction(graph: SymbolicTraceGraph) -> SymbolicTraceGraph:
    """Drop edges implied by a longer path whose labels are ``true`` or equal.

    A path only implies an edge labelled ``c`` if it is active whenever
    ``c`` holds, hence the label restriction.
    """
    kept = []
    for edge in graph.edges:
        src, label, dst = edge

        def allowed(e: Edge) -> bool:
            return e != edge and (e[1].is_true or e[1] == label)

        seen = {src}
        todo = deque([src])
        implied = False
        while todo and not implied:
            cur = todo.popleft()
            nexts = [d for e in graph.outgoing.get(cur, ()) if allowed(e) for d in [e[2]]]
            chain = graph.thread_events.get(cur.thread, [])
            i = chain.index(cur)
            if i + 1 < len(chain):
                nexts.append(chain[i + 1])
            for n in nexts:
                if n == dst:
                    implied = True
                    break
                if n not in seen and (n.thread != dst.thread or n.index < dst.index):
                    seen.add(n)
                    todo.append(n)
        if not implied:
            kept.append(edge)
    return SymbolicTraceGraph(graph.events, frozenset(kept))


def build_trace_graph(execution: Execution, program: Program, reduce: bool = True) -> SymbolicTraceGraph:
    """Happens-before graph of an execution with symbolic edge labels."""
    rp = replay(program, execution)
    evs = execution.events
    edges = []
    for j in range(len(evs)):
        for i in range(j):
            if evs[i].thread == evs[j].thread:
                continue
            c = access_constraint(program, rp.accesses[i], rp.accesses[j])
            if c is not None:
                edges.append((evs[i], c, evs[j]))
    g = SymbolicTraceGraph(frozenset(evs), frozenset(edges))
    return transitive_reduction(g) if reduce else g


def remove_event(graph: SymbolicTraceGraph, e: Event) -> SymbolicTraceGraph:
    if e not in graph.events:
        return graph
    return SymbolicTraceGraph(
        graph.events - {e},
        frozenset(x for x in graph.edges if x[0] != e and x[2] != e),
    )


def _bindings(inp) -> dict:
    return inp.bindings if isinstance(inp, InputState) else dict(inp)


def adheres(execution: Execution, graph: SymbolicTraceGraph) -> bool:
    """The adherence relation, computed incrementally.

    An event may occur when it belongs to the remaining graph and no
    remaining edge into it has a constraint that holds initially.
    """
    b = _bindings(execution.initial)
    active = graph.active_incoming(b)
    done: set[Event] = set()
    for e in execution.events:
        if e not in graph.events or e in done:
            return False
        for src in active.get(e, ()):
            if src not in done:
                return False
        done.add(e)
    return True


def matches(execution: Execution, graph: SymbolicTraceGraph) -> bool:
    return adheres(execution, graph) and set(execution.events) == graph.events


def is_prefix_of(g1: SymbolicTraceGraph, g2: SymbolicTraceGraph) -> bool:
    """Strict prefix order: ``g1`` is ``g2`` cut down to a downward-closed subset."""
    if not g1.events < g2.events:
        return False
    if g1.edges != frozenset(e for e in g2.edges if e[0] in g1.events and e[2] in g1.events):
        return False
    for e in g2.events - g1.events:
        for s in g2.successors(e):
            if s in g1.events:
                return False
    return True


def permitted(graph: SymbolicTraceGraph, active: dict, done_counts: Sequence[int], e: Event) -> bool:
    """Runtime admission: events outside the graph are unconstrained."""
    if e not in graph.events:
        return True
    for src in active.get(e, ()):
        if done_counts[src.thread] <= src.index:
            return False
    return True


def free_sequences(
    program: Program,
    execution: Execution,
    graph: SymbolicTraceGraph,
    last_thread: int | None = None,
) -> list[Event]:
    """Choose a synchronisation-free continuation of ``execution``.

    The greedy choice: the first thread (round-robin after
    ``last_thread``) whose next event is permitted, run for as long as
    its events stay permitted.
    """
    state = replay(program, execution).final
    if program.is_terminal(state):
        raise TraceError("program has terminated; nothing is free")
    active = graph.active_incoming(_bindings(execution.initial))
    n = program.num_threads
    start = 0 if last_thread is None else last_thread + 1
    for off in range(n):
        t = (start + off) % n
        run: list[Event] = []
        s = state
        while True:
            ev = program.next_event(s, t)
            if ev is None or not permitted(graph, active, s.counts, ev):
                break
            out = program.fire(s, t)
            if isinstance(out, StepSignal):
                break
            s = out[0]
            run.append(ev)
        if run:
            return run
    raise RuntimeError("no free continuation although the program has not terminated")


def linearizations(
    graph: SymbolicTraceGraph,
    program: Program,
    inp: InputState,
    ceiling: int = DEFAULT_CEILING,
) -> Iterator[Execution]:
    """All complete executions that match ``graph`` under ``inp``."""
    active = graph.active_incoming(inp.bindings)
    produced = 0
    stack = [(program.initial_state(inp), ())]
    while stack:
        state, events = stack.pop()
        if program.is_terminal(state):
            if set(events) == graph.events:
                produced += 1
                if produced > ceiling:
                    raise ExplosionError(f"more than {ceiling} linearizations")
                yield Execution(inp, events, True)
            continue
        for t in reversed(range(program.num_threads)):
            ev = program.next_event(state, t)
            if ev is None or ev not in graph.events:
                continue
            if not permitted(graph, active, state.counts, ev):
                continue
            out = program.fire(state, t)
            if isinstance(out, StepSignal):
                continue
            stack.append((out[0], events + (ev,)))


@dataclass
class ClassCount:
    count: int
    representatives: list[ExploredClass] = field(repr=False)


def mazurkiewicz_classes(program: Program, inp: InputState, ceiling: int = DEFAULT_CEILING) -> ClassCount:
    reps = list(Explorer(program, inp, ceiling=ceiling))
    return ClassCount(len(reps), reps)


def waiting_profile(graph: SymbolicTraceGraph, bindings=None) -> dict[int, int]:
    """How many events of each thread have to wait for another thread."""
    out: dict[int, int] = defaultdict(int)
    for dst, edges in graph.incoming.items():
        if any(bindings is None or c.evaluate(bindings) for _, c, _ in edges):
            out[dst.thread] += 1
    return dict(out)


# ---------------------------------------------------------------------------
# prefix files
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TracePrefix:
    graph: SymbolicTraceGraph
    origin: str
    attestation: tuple[tuple[str, str], ...] = ()

    @property
    def num_constraints(self) -> int:
        return len(self.graph.edges)

    def dumps(self) -> str:
        lines = [f"prefix {self.origin}"]
        lines += [f"attest {k}={v}" for k, v in self.attestation]
        lines += [f"event {e}" for e in sorted(self.graph.events)]
        for src, c, dst in sorted(self.graph.edges):
            lines.append(f"edge {src} -> {dst} [{c}]")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "TracePrefix":
        origin = None
        attest = []
        events, edges = [], []
        for no, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line:
                continue
            try:
                kind, _, rest = line.partition(" ")
                if kind == "prefix":
                    origin = rest.strip()
                elif kind == "attest":
                    k, _, v = rest.partition("=")
                    attest.append((k.strip(), v.strip()))
                elif kind == "event":
                    events.append(Event.parse(rest))
                elif kind == "edge":
                    lhs, _, tail = rest.partition("->")
                    dst_text, _, label = tail.partition("[")
                    if not label.endswith("]"):
                        raise ValueError("missing constraint")
                    edges.append((Event.parse(lhs), PathConstraint.parse(label[:-1]), Event.parse(dst_text)))
                else:
                    raise ValueError(f"unknown record {kind!r}")
            except (ValueError, TraceError) as exc:
                raise TraceError(f"line {no}: {exc}") from None
        if origin is None:
            raise TraceError("missing 'prefix' header")
        graph = SymbolicTraceGraph.of(events, edges)
        if not graph.is_acyclic():
            raise TraceError("prefix graph is cyclic")
        return cls(graph, origin, tuple(attest))

    def check_program(self, program: Program) -> None:
        """Reject prefixes that cannot belong to ``program``."""
        declared = {d["name"] for d in program.inputs}
        for e in self.graph.events:
            if not 0 <= e.thread < program.num_threads or e.index < 0:
                raise ProgramError(f"prefix event {e} does not belong to program {program.name}")
        for c in self.graph.constraints:
            missing = c.variables() - declared
            if missing:
                raise ProgramError(f"constraint {c} uses undeclared inputs {sorted(missing)}")
