"""Execution environment that enforces a trace prefix on real threads.

Each program thread runs on its own worker.  Before an event that the
current prefix constrains, the worker waits until every active
predecessor has signalled completion on a global vector clock.  Shared
memory is a plain list; every event (shared access plus the local
instructions folded into it) runs under one memory lock, which gives
sequentially consistent event boundaries.
"""

from __future__ import annotations

import random
import sys
import threading
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

from .program import (
    Event,
    Execution,
    InputState,
    Program,
    _exec_shared,
    _run_locals,
)
from .trace import SymbolicTraceGraph, TracePrefix, is_prefix_of

DEFAULT_WATCHDOG_S = 10.0
SPIN_BUDGET = 10_000
# the interpreter hands the GIL around every 5 ms by default, which makes
# a spinning waiter starve the thread it is waiting for
SWITCH_INTERVAL_S = 1e-4


class WaitPolicy(str, Enum):
    BUSY = "busy"
    YIELD = "yield"
    BLOCK = "block"


class WatchdogTimeout(RuntimeError):
    """A run made no progress within the watchdog bound."""


class PrefixError(ValueError):
    pass


class VectorClock:
    """Completed-event counter per thread; each slot has a single writer."""

    def __init__(self, n: int):
        self.completed = [0] * n
        self.cond = threading.Condition(threading.Lock())
        self.waiters = 0

    def __len__(self) -> int:
        return len(self.completed)

    def snapshot(self) -> list[int]:
        return list(self.completed)

    def notify(self) -> None:
        if self.waiters:
            with self.cond:
                self.cond.notify_all()


def signal(clock: VectorClock, event: Event) -> None:
    """Mark ``event`` complete.  The owning worker is the only writer of its slot."""
    clock.completed[event.thread] = event.index + 1
    clock.notify()


@dataclass(frozen=True)
class Snapshot:
    prefix: TracePrefix
    generation: int
    _active: dict = field(default_factory=dict, compare=False, repr=False)

    def incoming(self, inp: InputState) -> dict[Event, tuple[Event, ...]]:
        got = self._active.get(inp)
        if got is None:
            got = self._active[inp] = self.prefix.graph.active_incoming(inp.bindings)
        return got


class PrefixSlot:
    """Atomically replaceable prefix; replacements may only remove constraints."""

    def __init__(self, prefix: TracePrefix | SymbolicTraceGraph):
        if isinstance(prefix, SymbolicTraceGraph):
            prefix = TracePrefix(prefix, "anonymous")
        self._snap = Snapshot(prefix, 0)
        self._write = threading.Lock()
        self.listeners: list[VectorClock] = []

    @property
    def current(self) -> TracePrefix:
        return self._snap.prefix

    @property
    def generation(self) -> int:
        return self._snap.generation

    @property
    def snapshot(self) -> Snapshot:
        return self._snap

    def replace(self, prefix: TracePrefix) -> int:
        with self._write:
            old = self._snap
            if not is_prefix_of(prefix.graph, old.prefix.graph):
                raise PrefixError("replacement is not a strict prefix of the current prefix")
            self._snap = Snapshot(prefix, old.generation + 1)
            for clock in list(self.listeners):
                clock.notify()
            return old.generation + 1


def relax_during_run(slot: PrefixSlot, new_prefix: TracePrefix) -> int:
    return slot.replace(new_prefix)


@dataclass
class Permit:
    generation: int
    waited: bool
    spins: int
    wait_ns: int


class _Stop(Exception):
    pass


def permit(
    clock: VectorClock,
    event: Event,
    slot: PrefixSlot,
    inp: InputState,
    policy: WaitPolicy | str = WaitPolicy.BUSY,
    deadline: float | None = None,
    stop: threading.Event | None = None,
) -> Permit:
    """Return once every active predecessor of ``event`` has completed."""
    policy = WaitPolicy(policy)
    done = clock.completed
    snap = slot.snapshot
    srcs = snap.incoming(inp).get(event)
    if not srcs or all(done[s.thread] > s.index for s in srcs):
        return Permit(snap.generation, False, 0, 0)
    start = time.perf_counter_ns()
    spins = 0
    while True:
        spins += 1
        snap = slot.snapshot
        srcs = snap.incoming(inp).get(event)
        if not srcs or all(done[s.thread] > s.index for s in srcs):
            return Permit(snap.generation, True, spins, time.perf_counter_ns() - start)
        if spins & 0x3FF == 0:
            if stop is not None and stop.is_set():
                raise _Stop
            if deadline is not None and time.monotonic() > deadline:
                raise WatchdogTimeout(f"{event} still waiting for {[str(s) for s in srcs]}")
        if policy is WaitPolicy.YIELD and spins > SPIN_BUDGET:
            time.sleep(0)
        elif policy is WaitPolicy.BLOCK:
            with clock.cond:
                clock.waiters += 1
                try:
                    snap = slot.snapshot
                    srcs = snap.incoming(inp).get(event)
                    if srcs and not all(done[s.thread] > s.index for s in srcs):
                        clock.cond.wait(0.01)
                finally:
                    clock.waiters -= 1
            if stop is not None and stop.is_set():
                raise _Stop
            if deadline is not None and time.monotonic() > deadline:
                raise WatchdogTimeout(f"{event} still waiting for {[str(s) for s in srcs]}")


@dataclass
class LogRecord:
    generation: int
    event: Event
    wait_ns: int

    def __str__(self) -> str:
        return f"gen={self.generation} t={self.event.thread} k={self.event.index} wait_ns={self.wait_ns}"


@dataclass
class ExecutionReport:
    executed: Execution
    error_free: bool
    violations: list[str]
    wall_time: int  # nanoseconds
    waits: int
    spins: int
    prefix_generations_seen: list[int]
    log: list[LogRecord] = field(repr=False)
    final_memory: tuple[int, ...] = field(repr=False, default=())

    def log_lines(self) -> list[str]:
        return [str(r) for r in self.log]


@contextmanager
def switch_interval(seconds: float | None):
    if seconds is None:
        yield
        return
    old = sys.getswitchinterval()
    sys.setswitchinterval(seconds)
    try:
        yield
    finally:
        sys.setswitchinterval(old)


class _Run:
    """Shared data of one execution."""

    def __init__(self, program, inp, slot, policy, instrumented, deadline, fuzz):
        self.program = program
        self.inp = inp
        self.env = program.env(inp)
        self.mem = list(program.init_mem)
        self.lock = threading.Lock()
        self.clock = VectorClock(program.num_threads)
        self.slot = slot
        self.policy = WaitPolicy(policy)
        self.instrumented = instrumented
        self.deadline = deadline
        self.fuzz = fuzz
        self.stop = threading.Event()
        self.order: list[LogRecord] = []
        self.failed: list[str] = []
        self.waits = [0] * program.num_threads
        self.spins = [0] * program.num_threads
        self.error: BaseException | None = None

    def worker(self, t: int) -> None:
        try:
            self._work(t)
        except _Stop:
            pass
        except BaseException as exc:  # surfaced by execute()
            self.error = exc
            self.stop.set()

    def _work(self, t: int) -> None:
        prog = self.program
        code = prog.code[t]
        env = self.env
        mem = self.mem
        lock = self.lock
        R = [0] * len(prog.reg_names[t])
        pc, fail = _run_locals(code, 0, R, env)
        if fail:
            self.failed.append(f"thread {t}: assertion before first event")
        rng = self.fuzz(t) if self.fuzz else None
        n = len(code)
        k = 0
        while pc < n:
            ev = Event(t, k)
            wait_ns = 0
            if self.instrumented and self.slot is not None:
                p = permit(self.clock, ev, self.slot, self.inp, self.policy, self.deadline, self.stop)
                if p.waited:
                    self.waits[t] += 1
                    self.spins[t] += p.spins
                    wait_ns = p.wait_ns
            if rng is not None:
                _jitter(rng)
            spins = 0
            ins = code[pc]
            while True:
                with lock:
                    acc = _exec_shared(ins, mem, R, env)
                    if acc is not None:
                        gen = self.slot.generation if self.slot is not None else 0
                        self.order.append(LogRecord(gen, ev, wait_ns))
                        break
                # lock or await not ready yet
                spins += 1
                if spins & 0xFF == 0:
                    if self.stop.is_set():
                        raise _Stop
                    if self.deadline is not None and time.monotonic() > self.deadline:
                        raise WatchdogTimeout(f"{ev} blocked on {ins[0]}")
                if spins > 64:
                    time.sleep(0)
            pc, fail = _run_locals(code, pc + 1, R, env)
            if fail:
                self.failed.append(f"thread {t}: assertion after {ev}")
            if self.instrumented:
                signal(self.clock, ev)
            k += 1


def _jitter(rng: random.Random) -> None:
    r = rng.random()
    if r < 0.3:
        time.sleep(0)
    elif r < 0.4:
        time.sleep(rng.random() * 2e-4)


def execute(
    program: Program,
    inp: InputState,
    slot: PrefixSlot | None = None,
    policy: WaitPolicy | str = WaitPolicy.BUSY,
    *,
    instrumented: bool = True,
    watchdog: float | None = DEFAULT_WATCHDOG_S,
    delay_seed: int | None = None,
    relax: Sequence[TracePrefix] = (),
    relax_interval: float = 1e-4,
    switch: float | None = SWITCH_INTERVAL_S,
) -> ExecutionReport:
    """Run ``program`` once on real threads under the prefix held by ``slot``.

    ``instrumented=False`` is the baseline: no permission checks and no
    clock updates.  ``relax`` lists smaller prefixes that a separate
    worker publishes into ``slot`` while the program runs.
    """
    if slot is None and instrumented:
        slot = PrefixSlot(SymbolicTraceGraph.of(()))
    deadline = time.monotonic() + watchdog if watchdog is not None else None
    fuzz: Callable[[int], random.Random] | None = None
    if delay_seed is not None:
        fuzz = lambda t: random.Random(f"{delay_seed}/{t}")  # noqa: E731
    run = _Run(program, inp, slot, policy, instrumented, deadline, fuzz)
    if slot is not None:
        slot.listeners.append(run.clock)
    workers = [
        threading.Thread(target=run.worker, args=(t,), daemon=True, name=f"worker-{t}")
        for t in range(program.num_threads)
    ]
    relaxer = None
    if relax:
        def pump():
            for prefix in relax:
                if run.stop.wait(relax_interval):
                    return
                relax_during_run(slot, prefix)
        relaxer = threading.Thread(target=pump, daemon=True, name="relaxer")
    try:
        with switch_interval(switch):
            start = time.perf_counter_ns()
            for w in workers:
                w.start()
            if relaxer is not None:
                relaxer.start()
            for w in workers:
                remaining = None if deadline is None else max(0.0, deadline - time.monotonic()) + 1.0
                w.join(remaining)
                if w.is_alive():
                    run.stop.set()
                    raise WatchdogTimeout(f"{w.name} did not finish within {watchdog} s")
            elapsed = time.perf_counter_ns() - start
            if relaxer is not None:
                run.stop.set()
                relaxer.join()
    finally:
        run.stop.set()
        if slot is not None and run.clock in slot.listeners:
            slot.listeners.remove(run.clock)
    if run.error is not None:
        raise run.error
    violations = list(run.failed)
    for text, fn in program.final_assertions:
        if not fn(tuple(run.mem)):
            violations.append(f"final assertion failed: {text}")
    events = tuple(r.event for r in run.order)
    gens = []
    for r in run.order:
        if not gens or gens[-1] != r.generation:
            gens.append(r.generation)
    return ExecutionReport(
        executed=Execution(inp, events, True),
        error_free=not violations,
        violations=violations,
        wall_time=elapsed,
        waits=sum(run.waits),
        spins=sum(run.spins),
        prefix_generations_seen=gens,
        log=run.order,
        final_memory=tuple(run.mem),
    )
