"""Hypothesis strategies for random programs and random trace graphs."""

from __future__ import annotations

from hypothesis import strategies as st

from relaxsched.constraints import TRUE, PathConstraint
from relaxsched.program import Event, load_program
from relaxsched.trace import SymbolicTraceGraph

LABELS = [TRUE, PathConstraint.parse("x == y"), PathConstraint.parse("x != y")]
CELLS = ["a", "b"]


@st.composite
def instructions(draw, depth=0):
    kind = draw(st.sampled_from(["read", "write", "rmw", "read", "if"] if depth == 0 else ["read", "write", "rmw"]))
    loc = draw(st.sampled_from(CELLS + ["*p"]))
    if kind == "read":
        return [{"op": "read", "loc": loc, "reg": "r"}]
    if kind == "write":
        return [{"op": "write", "loc": loc, "value": f"r + {draw(st.integers(1, 2))}"}]
    if kind == "rmw":
        return [{"op": "rmw", "loc": loc, "reg": "r", "value": "r + 1"}]
    # a read whose value decides whether one more access happens
    body = draw(instructions(depth=1))
    return [
        {"op": "read", "loc": loc, "reg": "r"},
        {"op": "if", "cond": f"r == {draw(st.integers(0, 1))}", "then": body},
    ]


@st.composite
def small_programs(draw, max_threads=3, max_len=3):
    """Programs with at most ~8 shared events, an assertion, and a pointer input."""
    n = draw(st.integers(1, max_threads))
    threads = []
    for _ in range(n):
        code = [{"op": "set", "reg": "r", "value": "0"}]
        for _ in range(draw(st.integers(1, max_len))):
            code += draw(instructions())
        if draw(st.booleans()):
            code.append({"op": "assert", "cond": f"r != {draw(st.integers(2, 3))}"})
        threads.append(code)
    return load_program({
        "name": "random",
        "inputs": [{"name": "p", "kind": "ptr", "domain": ["a", "b"]}],
        "shared": [{"name": "a", "init": 0}, {"name": "b", "init": 0}],
        "threads": threads,
        "assertions": draw(st.sampled_from([[], ["a + b < 5"]])),
    })


@st.composite
def random_graphs(draw, max_events=8, max_threads=3):
    """Acyclic graphs: edges follow a random interleaving of per-thread chains."""
    n = draw(st.integers(1, max_threads))
    sizes = [draw(st.integers(0, 3)) for _ in range(n)]
    while sum(sizes) > max_events:
        sizes[sizes.index(max(sizes))] -= 1
    chains = [[Event(t, k) for k in range(sz)] for t, sz in enumerate(sizes)]
    order: list[Event] = []
    pos = [0] * n
    while len(order) < sum(sizes):
        t = draw(st.sampled_from([t for t in range(n) if pos[t] < sizes[t]]))
        order.append(chains[t][pos[t]])
        pos[t] += 1
    edges = set()
    for i in range(len(order)):
        for j in range(i + 1, len(order)):
            if order[i].thread != order[j].thread and draw(st.integers(0, 3)) == 0:
                edges.add((order[i], draw(st.sampled_from(LABELS)), order[j]))
    return SymbolicTraceGraph.of(order, edges), sizes


def chain_program(sizes):
    """Threads of private writes: every interleaving is feasible."""
    return load_program({
        "name": "chains",
        "inputs": [
            {"name": "x", "kind": "ptr", "domain": ["c0"]},
            {"name": "y", "kind": "ptr", "domain": ["c0", "c1"]},
        ],
        "shared": [{"name": "c0", "init": 0}, {"name": "c1", "init": 0}]
        + [{"name": f"t{t}", "init": 0} for t in range(len(sizes))],
        "threads": [
            [{"op": "write", "loc": f"t{t}", "value": str(k)} for k in range(sz)]
            for t, sz in enumerate(sizes)
        ],
    })


@st.composite
def interleavings(draw, sizes, extra=False):
    """A program-order respecting sequence over per-thread chains (maybe partial)."""
    pos = [0] * len(sizes)
    limit = [sz + (1 if extra and draw(st.booleans()) else 0) for sz in sizes]
    out = []
    while any(p < l for p, l in zip(pos, limit)):
        live = [t for t in range(len(sizes)) if pos[t] < limit[t]]
        if draw(st.integers(0, 6)) == 0:
            break
        t = draw(st.sampled_from(live))
        out.append(Event(t, pos[t]))
        pos[t] += 1
    return out
