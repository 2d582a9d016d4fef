"""Mazurkiewicz-class exploration by dynamic partial order reduction.

Source of truth for "how many traces does this program have": a
stateless depth-first search with race reversal and sleep sets.  A
race is reversed by scheduling one of its initials (a thread whose next
event can start the reordered suffix), which stays complete even when
the racing thread itself is asleep at the reversal point.  Results are
additionally de-duplicated on their canonical class id.

An optional :class:`Gate` restricts the search to executions the
runtime would admit under a trace prefix.  Gated edges are modelled as
a virtual cell written by the edge source and read by its target, so
race reversal treats them like any other synchronisation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

from .program import (
    Access,
    Event,
    Execution,
    ExplosionError,
    InputState,
    Program,
    ProgramState,
    StepSignal,
    DEFAULT_CEILING,
)

ClassId = tuple


def class_id(events: Sequence[Event], accesses: Sequence[Sequence[Access]]) -> ClassId:
    """Canonical identifier of the Mazurkiewicz class of an execution.

    Per cell: the ordered writes, each with the set of events that read
    the value it produced (initial value first).  Two executions are
    equivalent iff these agree.
    """
    per_cell: dict[int, list] = {}
    for ev, accs in zip(events, accesses):
        for a in accs:
            groups = per_cell.setdefault(a.cell, [[None, []]])
            if a.write:
                groups.append([ev, []])
            else:
                groups[-1][1].append(ev)
    return tuple(
        (cell, tuple((w, tuple(sorted(rs))) for w, rs in groups))
        for cell, groups in sorted(per_cell.items())
    )


class Gate:
    """Admission check for one trace prefix under one input.

    ``incoming[e]`` lists the source events of active cross-thread edges
    into ``e``; an event may fire once every source has completed.
    """

    def __init__(self, incoming: dict[Event, tuple[Event, ...]], base_cell: int):
        self.incoming = incoming
        edge_ids: dict[tuple[Event, Event], int] = {}
        for dst, srcs in incoming.items():
            for src in srcs:
                edge_ids[(src, dst)] = base_cell + len(edge_ids)
        self.vreads: dict[Event, tuple[Access, ...]] = {}
        self.vwrites: dict[Event, tuple[Access, ...]] = {}
        for (src, dst), cell in edge_ids.items():
            self.vreads.setdefault(dst, ())
            self.vreads[dst] += (Access(cell, False, ("virtual", cell)),)
            self.vwrites.setdefault(src, ())
            self.vwrites[src] += (Access(cell, True, ("virtual", cell)),)

    def permits(self, ev: Event, counts: Sequence[int]) -> bool:
        for src in self.incoming.get(ev, ()):
            if counts[src.thread] <= src.index:
                return False
        return True

    def virtual(self, ev: Event) -> tuple[Access, ...]:
        return self.vreads.get(ev, ()) + self.vwrites.get(ev, ())


@dataclass
class ExploredClass:
    execution: Execution
    class_id: ClassId
    error_free: bool
    final: ProgramState
    accesses: list[tuple[Access, ...]]


Policy = Callable[[Sequence[int], int | None, int], list[int]]


def lowest_first(candidates: Sequence[int], last: int | None, n: int) -> list[int]:
    """Stay on the lowest-numbered runnable thread (thread-at-a-time runs)."""
    return sorted(candidates)


def round_robin(candidates: Sequence[int], last: int | None, n: int) -> list[int]:
    """Rotate to the next thread after the one that ran last."""
    start = 0 if last is None else last + 1
    return sorted(candidates, key=lambda t: (t - start) % n)


POLICIES: dict[str, Policy] = {"lowest": lowest_first, "round_robin": round_robin}


class _Node:
    __slots__ = ("state", "enabled", "backtrack", "done", "sleep", "last")

    def __init__(self, state, enabled, sleep, last):
        self.state = state
        self.enabled = enabled
        self.backtrack: set[int] = set()
        self.done: set[int] = set()
        self.sleep = sleep
        self.last = last


class Explorer:
    """Depth-first class enumeration for one program input.

    ``forced`` fixes the first scheduling decisions (a thread id per
    step); only continuations of that prefix are explored.
    """

    def __init__(
        self,
        program: Program,
        inp: InputState,
        *,
        gate: Gate | None = None,
        policy: Policy | str = lowest_first,
        forced: Sequence[int] = (),
        ceiling: int = DEFAULT_CEILING,
    ):
        self.program = program
        self.inp = inp
        self.gate = gate
        self.policy = POLICIES[policy] if isinstance(policy, str) else policy
        self.forced = list(forced)
        self.ceiling = ceiling
        self.n = program.num_threads
        self.seen: set[ClassId] = set()
        self.executions = 0
        self.blocked = 0
        self.deadlocks = 0

    # -- helpers ----------------------------------------------------------
    def _enabled(self, state: ProgramState) -> frozenset[int]:
        prog, gate = self.program, self.gate
        out = []
        for t in range(self.n):
            if not prog.enabled(state, t):
                continue
            if gate is not None and not gate.permits(Event(t, state.counts[t]), state.counts):
                continue
            out.append(t)
        return frozenset(out)

    def _pending(self, state: ProgramState, t: int) -> tuple[Access, ...] | None:
        acc = self.program.pending_accesses(state, t)
        if acc is None:
            return None
        if self.gate is not None:
            acc = acc + self.gate.virtual(Event(t, state.counts[t]))
        return acc

    def __iter__(self) -> Iterator[ExploredClass]:
        prog = self.program
        n = self.n
        root_state = prog.initial_state(self.inp)
        # per-position data, 1-based positions
        events: list[Event] = []
        real: list[tuple[Access, ...]] = []
        allacc: list[tuple[Access, ...]] = []
        clocks: list[tuple[int, ...]] = [(0,) * n]
        thread_clock: list[tuple[int, ...]] = [(0,) * n for _ in range(n)]
        clock_undo: list[tuple[int, tuple[int, ...]]] = []
        history: dict[int, list[tuple[int, bool]]] = {}
        stack: list[_Node] = []

        def push_event(t: int, ev: Event, accs: tuple[Access, ...]):
            pos = len(events) + 1
            c = list(thread_clock[t])
            for a in accs:
                hist = history.get(a.cell, ())
                for i in range(len(hist) - 1, -1, -1):
                    hp, hw = hist[i]
                    if hw or a.write:
                        for k, v in enumerate(clocks[hp]):
                            if v > c[k]:
                                c[k] = v
                    if hw:
                        break
            c[t] = pos
            ct = tuple(c)
            events.append(ev)
            allacc.append(accs)
            clocks.append(ct)
            clock_undo.append((t, thread_clock[t]))
            thread_clock[t] = ct
            for a in accs:
                history.setdefault(a.cell, []).append((pos, a.write))

        def pop_event():
            accs = allacc.pop()
            for a in accs:
                history[a.cell].pop()
            events.pop()
            clocks.pop()
            t, old = clock_undo.pop()
            thread_clock[t] = old
            real.pop()

        def conflicts(xs, ys) -> bool:
            for a in xs:
                for b in ys:
                    if a.cell == b.cell and (a.write or b.write):
                        return True
            return False

        def initials(i: int, p: int, pend, cp) -> set[int]:
            """Threads that can start the reversal of the race at position ``i``.

            The reversal runs everything after ``i`` that does not
            happen after it, then ``p``; a thread qualifies when its
            first event in that sequence has no predecessor there.
            """
            ti = events[i - 1].thread
            first: dict[int, int] = {}  # thread -> its first position after i
            out: set[int] = set()
            pend_blocked = False
            for j in range(i + 1, len(events) + 1):
                cj = clocks[j]
                if cj[ti] >= i:
                    continue
                tj = events[j - 1].thread
                if tj not in first:
                    if all(cj[u] < k for u, k in first.items()):
                        out.add(tj)
                    first[tj] = j
                if not pend_blocked and conflicts(allacc[j - 1], pend):
                    pend_blocked = True
            if not pend_blocked and all(cp[u] < k for u, k in first.items()):
                out.add(p)
            return out

        def pending_clock(p: int, pend) -> tuple[int, ...]:
            # a gated event reads each of its edge cells from the single
            # source write, so an executed source is already ordered before it
            cp = thread_clock[p]
            for a in pend:
                if a.term[0] == "virtual" and not a.write and history.get(a.cell):
                    src = clocks[history[a.cell][-1][0]]
                    cp = tuple(max(x, y) for x, y in zip(cp, src))
            return cp

        def add_backtracks(state: ProgramState):
            forced_len = len(self.forced)
            for p in range(n):
                pend = self._pending(state, p)
                if pend is None:
                    continue
                cp = pending_clock(p, pend)
                # every unordered conflicting access back to the last write on
                # the cell is a race; anything older is ordered before that write
                races: set[int] = set()
                for a in pend:
                    hist = history.get(a.cell, ())
                    for i in range(len(hist) - 1, -1, -1):
                        hp, hw = hist[i]
                        if (hw or a.write) and events[hp - 1].thread != p and cp[events[hp - 1].thread] < hp:
                            races.add(hp)
                        if hw:
                            break
                ordered = sorted(races, reverse=True)
                # a race that happens before a later one is reversed through it
                ordered = [
                    hp for hp in ordered
                    if not any(clocks[hq][events[hp - 1].thread] >= hp for hq in ordered if hq > hp)
                ]
                for best in ordered:
                    if best - 1 < forced_len:
                        continue
                    node = stack[best - 1]
                    cands = initials(best, p, pend, cp)
                    if cands & (node.backtrack | node.done):
                        continue
                    ready = sorted(c for c in cands if c in node.enabled and c not in node.sleep)
                    if ready:
                        node.backtrack.add(ready[0])
                    elif cands & node.sleep:
                        # a sleeping initial means the reversal is covered elsewhere
                        continue
                    else:
                        node.backtrack |= node.enabled

        def independent(pend: tuple[Access, ...], accs: tuple[Access, ...]) -> bool:
            for a in pend:
                for b in accs:
                    if a.cell == b.cell and (a.write or b.write):
                        return False
            return True

        def make_node(state, sleep, last):
            return _Node(state, self._enabled(state), sleep, last)

        stack.append(make_node(root_state, frozenset(), None))
        # iterative DFS: each stack node either picks its next thread or pops
        while stack:
            node = stack[-1]
            depth = len(stack) - 1
            state = node.state
            if not node.done:
                # first visit: detect races, choose the initial thread
                add_backtracks(state)
                if depth < len(self.forced):
                    t = self.forced[depth]
                    if t not in node.enabled:
                        raise ValueError(f"forced thread {t} not enabled at step {depth}")
                    node.backtrack = {t}
                else:
                    awake = [t for t in node.enabled if t not in node.sleep]
                    if not awake:
                        if prog.is_terminal(state):
                            yield_item = self._complete(state, events, real)
                            if yield_item is not None:
                                yield yield_item
                        elif not node.enabled:
                            self.deadlocks += 1
                        else:
                            self.blocked += 1
                        stack.pop()
                        if stack:
                            pop_event()
                        continue
                    node.backtrack.add(self.policy(awake, node.last, n)[0])
            choices = [
                t for t in node.backtrack
                if t not in node.done and t not in node.sleep and t in node.enabled
            ]
            if depth < len(self.forced):
                choices = [t for t in choices if t == self.forced[depth]]
            if not choices:
                stack.pop()
                if stack:
                    pop_event()
                continue
            t = self.policy(choices, node.last, n)[0]
            node.done.add(t)
            ev = Event(t, state.counts[t])
            out = prog.fire(state, t)
            assert not isinstance(out, StepSignal)
            new_state, accs = out
            accs = tuple(accs)
            vacc = self.gate.virtual(ev) if self.gate is not None else ()
            full = accs + vacc
            child_sleep = frozenset(
                q for q in node.sleep
                if independent(self._pending(state, q) or (), full)
            )
            node.sleep = node.sleep | {t}
            push_event(t, ev, full)
            real.append(accs)
            stack.append(make_node(new_state, child_sleep, t))

    def _complete(self, state, events, real) -> ExploredClass | None:
        self.executions += 1
        if self.executions > self.ceiling:
            raise ExplosionError(f"more than {self.ceiling} explored executions")
        cid = class_id(events, real)
        if cid in self.seen:
            return None
        self.seen.add(cid)
        ex = Execution(self.inp, tuple(events), True)
        return ExploredClass(ex, cid, self.program.error_free(state), state, list(real))


def explore_classes(program: Program, inp: InputState, **kwargs) -> Iterator[ExploredClass]:
    return iter(Explorer(program, inp, **kwargs))
