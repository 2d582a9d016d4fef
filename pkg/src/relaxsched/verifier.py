"""Incremental verifier that publishes ever smaller safe trace prefixes.

The verifier starts from one complete, correct symbolic trace and
enumerates Mazurkiewicz classes depth-first, one per step.  After each
step it tries to drop a scheduling constraint: a prefix is safe when
every class the runtime could produce under it, for every input, has
already been explored and found error-free.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterator

from .explore import ClassId, ExploredClass, Explorer, Gate
from .program import DEFAULT_CEILING, InputState, Program
from .trace import (
    Edge,
    SymbolicTraceGraph,
    TracePrefix,
    build_trace_graph,
    is_prefix_of,
    waiting_profile,
)

log = logging.getLogger(__name__)


class NoCorrectTrace(RuntimeError):
    """No complete trace of the program is error-free for every input."""


class VerifierError(ValueError):
    pass


@dataclass(frozen=True)
class Strategy:
    """Initial schedule choice of the depth-first class enumeration.

    The search always reverses the deepest pending race first, so the
    order in which the first execution interleaves threads decides
    which constraints are freed early.
    """

    name: str
    policy: str


STRATEGIES = {
    # thread-at-a-time runs: races are reversed pair by pair
    "vertical": Strategy("vertical", "lowest"),
    # interleaved runs: the last race of every thread pair goes first
    "horizontal": Strategy("horizontal", "round_robin"),
    "dfs-default": Strategy("dfs-default", "lowest"),
    # thread-at-a-time runs also make workers wait before their first
    # event instead of between their events (the faster last_zero shape)
    "early-wait": Strategy("early-wait", "lowest"),
}


def exploration_strategy(name: str | Strategy) -> Strategy:
    if isinstance(name, Strategy):
        return name
    try:
        return STRATEGIES[name]
    except KeyError:
        raise VerifierError(f"unknown strategy {name!r}; choose from {sorted(STRATEGIES)}") from None


@dataclass
class _Probe:
    explorer: Explorer
    classes: Iterator[ExploredClass]
    pending: ClassId | None = None
    verdict: bool | None = None


@dataclass
class Milestone:
    step: int
    classes: int
    constraints: int
    waits: dict[int, int]


def fewer_waiting_threads(first: Milestone, later: Milestone) -> bool:
    """Some thread that had to wait initially no longer waits at all."""
    return len(later.waits) < len(first.waits)


def every_thread_waits_less(first: Milestone, later: Milestone) -> bool:
    """Each initially waiting thread waits strictly less often."""
    return bool(first.waits) and all(later.waits.get(t, 0) < w for t, w in first.waits.items())


def first_milestone(history: list[Milestone], reached: Callable[[Milestone, Milestone], bool]) -> Milestone | None:
    """The earliest published prefix whose waiting profile satisfies ``reached``."""
    if not history:
        return None
    for m in history[1:]:
        if reached(history[0], m):
            return m
    return None


@dataclass
class VerifierState:
    program: Program
    strategy: Strategy
    inputs: list[InputState]
    admissible: TracePrefix
    explored: dict[InputState, dict[ClassId, bool]]
    proven_safe: set[int] = field(default_factory=set)
    published: list[TracePrefix] = field(default_factory=list)
    history: list[Milestone] = field(default_factory=list)
    finished: bool = False
    steps: int = 0
    last_error_free: bool = True
    ceiling: int = DEFAULT_CEILING
    frontier: dict[InputState, Iterator[ExploredClass]] = field(default_factory=dict, repr=False)
    _cursor: int = 0
    _probes: dict = field(default_factory=dict, repr=False)

    @property
    def explored_traces(self) -> set[tuple[InputState, ClassId]]:
        return {(inp, cid) for inp, cs in self.explored.items() for cid in cs}

    @property
    def num_classes(self) -> int:
        return sum(len(cs) for cs in self.explored.values())

    @property
    def num_constraints(self) -> int:
        return self.admissible.num_constraints

    def gate(self, graph: SymbolicTraceGraph, inp: InputState) -> Gate:
        return Gate(graph.active_incoming(inp.bindings), len(self.program.cell_names))

    def record(self, inp: InputState, cls: ExploredClass) -> bool:
        """Store an explored class; returns False if it was known already."""
        known = self.explored[inp]
        if cls.class_id in known:
            return False
        known[cls.class_id] = cls.error_free
        if cls.error_free:
            # the terminal state is the same for every member of the class
            self.proven_safe.add(cls.final.fingerprint())
        return True

    def safe(self, graph: SymbolicTraceGraph) -> bool:
        return all(self.safe_for(graph, inp) for inp in self.inputs)

    def safe_for(self, graph: SymbolicTraceGraph, inp: InputState) -> bool:
        """Whether every class admitted by ``graph`` under ``inp`` is explored and correct.

        The admitted classes are enumerated by a gated search that is
        suspended at the first unexplored class and resumed once that
        class has been explored, so repeated checks stay cheap.
        """
        key = (graph, inp)
        probe = self._probes.get(key)
        if probe is None:
            explorer = Explorer(
                self.program, inp, gate=self.gate(graph, inp),
                policy=self.strategy.policy, ceiling=self.ceiling,
            )
            probe = self._probes[key] = _Probe(explorer, iter(explorer))
        if probe.verdict is not None:
            return probe.verdict
        known = self.explored[inp]
        if probe.pending is not None:
            ok = known.get(probe.pending)
            if ok is None:
                return False
            probe.pending = None
            if not ok:
                probe.verdict = False
                return False
        for cls in probe.classes:
            ok = known.get(cls.class_id)
            if ok is None:
                probe.pending = cls.class_id
                return False
            if not ok:
                probe.verdict = False
                return False
        probe.verdict = not probe.explorer.deadlocks
        return probe.verdict

    def forget_probes(self) -> None:
        """Drop suspended searches for graphs that are no longer candidates."""
        live = {relaxation(self.admissible.graph, e) for e in maximal_edges(self.admissible.graph)}
        self._probes = {k: v for k, v in self._probes.items() if k[0] in live}

    def publish(self, prefix: TracePrefix) -> None:
        if self.published and not is_prefix_of(prefix.graph, self.admissible.graph):
            raise VerifierError("published prefixes must shrink strictly")
        self.admissible = prefix
        self.published.append(prefix)
        self.forget_probes()
        self.history.append(Milestone(
            self.steps, self.num_classes, prefix.num_constraints, waiting_profile(prefix.graph)
        ))

    def log_line(self, safe: bool) -> str:
        return f"step={self.steps} classes={self.num_classes} safe={str(safe).lower()} constraints={self.num_constraints}"


def _attest(state: VerifierState) -> tuple[tuple[str, str], ...]:
    return (
        ("strategy", state.strategy.name),
        ("classes", str(state.num_classes)),
        ("safe", "true"),
    )


def init(
    program: Program,
    strategy: str | Strategy = "dfs-default",
    ceiling: int = DEFAULT_CEILING,
) -> VerifierState:
    """Find a complete trace that is correct for every input and publish it."""
    strat = exploration_strategy(strategy)
    inputs = program.input_states()
    frontier = {
        inp: iter(Explorer(program, inp, policy=strat.policy, ceiling=ceiling)) for inp in inputs
    }
    state = VerifierState(
        program, strat, inputs, admissible=TracePrefix(SymbolicTraceGraph.of(()), program.name),
        explored={inp: {} for inp in inputs}, ceiling=ceiling, frontier=frontier,
    )
    first = inputs[0]
    for cls in frontier[first]:
        state.record(first, cls)
        if not cls.error_free:
            continue
        graph = build_trace_graph(cls.execution, program)
        if _audit(state, graph):
            state.publish(TracePrefix(graph, program.name, _attest(state)))
            log.info("initial trace with %d constraints", len(graph.edges))
            return state
    raise NoCorrectTrace(f"no schedule of {program.name} is error-free for every input")


def _audit(state: VerifierState, graph: SymbolicTraceGraph) -> bool:
    """Explore everything admitted by ``graph``; True if all of it is correct."""
    for inp in state.inputs:
        explorer = Explorer(
            state.program, inp, gate=state.gate(graph, inp),
            policy=state.strategy.policy, ceiling=state.ceiling,
        )
        ok = True
        for cls in explorer:
            state.record(inp, cls)
            ok = ok and cls.error_free
        if not ok or explorer.deadlocks:
            return False
    return True


def verify_step(state: VerifierState) -> VerifierState:
    """Explore one more class; inputs take turns."""
    if state.finished:
        raise VerifierError("verification already finished")
    n = len(state.inputs)
    for _ in range(n):
        inp = state.inputs[state._cursor % n]
        state._cursor += 1
        it = state.frontier.get(inp)
        if it is None:
            continue
        for cls in it:
            if state.record(inp, cls):
                state.steps += 1
                state.last_error_free = cls.error_free
                return state
        state.frontier.pop(inp)
    state.finished = True
    return state


def maximal_edges(graph: SymbolicTraceGraph) -> list[Edge]:
    """Cross edges with no constrained event after their target."""
    touched = {e[0] for e in graph.edges} | {e[2] for e in graph.edges}
    out = []
    for edge in sorted(graph.edges, reverse=True):
        after = graph.up_closure([edge[2]]) - {edge[2]}
        if not after & touched:
            out.append(edge)
    return out


def relaxation(graph: SymbolicTraceGraph, edge: Edge) -> SymbolicTraceGraph:
    """Drop both endpoints of ``edge`` and everything that happens after them."""
    gone = graph.up_closure([edge[0], edge[2]])
    return graph.restrict(graph.events - gone)


def try_relax(state: VerifierState) -> tuple[Edge, TracePrefix] | None:
    graph = state.admissible.graph
    for edge in maximal_edges(graph):
        smaller = relaxation(graph, edge)
        if state.safe(smaller):
            prefix = TracePrefix(smaller, state.program.name, _attest(state))
            state.publish(prefix)
            return edge, prefix
    return None


def run(
    program: Program,
    strategy: str | Strategy = "dfs-default",
    budget: int | None = None,
    on_step: Callable[[VerifierState, str], None] | None = None,
    stop: Callable[[VerifierState], bool] | None = None,
    ceiling: int = DEFAULT_CEILING,
) -> VerifierState:
    """Drive verification: step, relax as far as possible, repeat.

    ``budget`` caps the number of explored classes; ``stop`` ends the
    run early once it returns True.
    """
    state = init(program, strategy, ceiling)
    while try_relax(state):
        pass
    if on_step:
        on_step(state, state.log_line(True))
    while not state.finished:
        if budget is not None and state.num_classes >= budget:
            break
        if stop is not None and stop(state):
            break
        verify_step(state)
        if state.finished:
            break
        while try_relax(state):
            pass
        if on_step:
            on_step(state, state.log_line(state.last_error_free))
    if state.finished:
        while try_relax(state):
            pass
    return state

