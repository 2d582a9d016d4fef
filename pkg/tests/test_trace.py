import pytest
from hypothesis import given, settings, strategies as st

from relaxsched.constraints import PathConstraint
from relaxsched.explore import Explorer, class_id
from relaxsched.program import Event, Execution, ProgramError, replay, run_schedule
from relaxsched.trace import (
    SymbolicTraceGraph,
    TraceError,
    TracePrefix,
    adheres,
    build_trace_graph,
    free_sequences,
    is_prefix_of,
    linearizations,
    matches,
    remove_event,
    waiting_profile,
)

from oracles import adheres_literal, event, linearizations_literal, matches_literal, prefix_literal, remove_literal
from strategies import chain_program, interleavings, random_graphs, small_programs

XY = PathConstraint.parse("x == y")


def edge(a, c, b):
    return (event(a), PathConstraint.parse(c), event(b))


def test_fig2_edges(fig2):
    assert fig2.events == frozenset(event(s) for s in ["0:0", "0:1", "0:2", "1:0", "1:1"])
    assert fig2.edges == frozenset({edge("0:1", "x == y", "1:0"), edge("0:2", "x == y", "1:1")})


def test_reversed_schedule_points_the_other_way(fig1, aliased):
    g = build_trace_graph(run_schedule(fig1, aliased, [1, 1, 0, 0, 0]), fig1)
    assert g.edges and all(src.thread == 1 and dst.thread == 0 for src, _, dst in g.edges)


def test_graph_is_the_same_under_either_input(fig1, aliased, distinct, fig2):
    # the edges are symbolic: the non-aliased run yields the same graph
    assert build_trace_graph(run_schedule(fig1, distinct, [0, 0, 0, 1, 1]), fig1) == fig2


def test_reduction_drops_implied_edges(fig1, aliased, fig2):
    full = build_trace_graph(run_schedule(fig1, aliased, [0, 0, 0, 1, 1]), fig1, reduce=False)
    assert fig2.edges < full.edges
    assert edge("0:1", "x == y", "1:1") in full.edges


def test_remove_examples(fig2):
    g = remove_event(fig2, event("0:0"))
    assert g.edges == fig2.edges and event("0:0") not in g.events
    g = remove_event(fig2, event("0:1"))
    assert g.edges == frozenset({edge("0:2", "x == y", "1:1")})
    assert XY in g.constraints


def test_adheres_examples(fig1, aliased, distinct, fig2):
    def ex(inp, *evs):
        return Execution(inp, tuple(event(e) for e in evs), False)

    assert adheres(ex(aliased), fig2)
    assert adheres(ex(aliased, "0:0", "0:1", "1:0"), fig2)
    assert not adheres(ex(aliased, "0:0", "1:0"), fig2)
    assert adheres(ex(distinct, "0:0", "1:0"), fig2)
    assert not adheres(ex(aliased, "0:0", "0:0"), fig2)
    assert not matches(ex(aliased, "0:0", "0:1", "1:0"), fig2)
    assert matches(ex(aliased, "0:0", "0:1", "0:2", "1:0", "1:1"), fig2)


def test_adheres_rejects_events_outside_graph(fig1, aliased):
    g = SymbolicTraceGraph.of([event("0:0")])
    assert not adheres(Execution(aliased, (event("1:0"),), False), g)


def test_fig2_linearization_counts(fig1, aliased, distinct, fig2):
    assert len(list(linearizations(fig2, fig1, aliased))) == 2
    assert len(list(linearizations(fig2, fig1, distinct))) == 10
    assert all(fig1.error_free(replay(fig1, ex).final) for ex in linearizations(fig2, fig1, aliased))


def test_prefix_examples(fig2):
    assert is_prefix_of(fig2.restrict({event("0:0"), event("0:1"), event("0:2")}), fig2)
    assert is_prefix_of(fig2.restrict({event("0:0"), event("0:1"), event("1:0")}), fig2)
    assert not is_prefix_of(fig2.restrict({event("1:0"), event("1:1")}), fig2)
    assert not is_prefix_of(fig2.restrict({event("0:1"), event("0:2")}), fig2)
    assert not is_prefix_of(fig2, fig2)
    assert is_prefix_of(SymbolicTraceGraph.of([]), fig2)


def test_waiting_profile(fig2, aliased, distinct):
    assert waiting_profile(fig2, aliased.bindings) == {1: 2}
    assert waiting_profile(fig2, distinct.bindings) == {}


def test_free_sequence_examples(fig1, aliased, fig2):
    empty = Execution(aliased, (), False)
    assert free_sequences(fig1, empty, SymbolicTraceGraph.of([])) == [event("0:0"), event("0:1"), event("0:2")]
    after = Execution(aliased, (event("0:0"),), False)
    assert free_sequences(fig1, after, fig2, last_thread=0) == [event("0:1"), event("0:2")]
    done = run_schedule(fig1, aliased, [0, 0, 0, 1, 1])
    with pytest.raises(TraceError):
        free_sequences(fig1, done, fig2)


def test_cycle_rejected():
    with pytest.raises(TraceError):
        SymbolicTraceGraph.of([event("0:0")], [edge("0:0", "true", "1:0")])


# -- prefix files -------------------------------------------------------------

def test_prefix_round_trip(fig2):
    p = TracePrefix(fig2, "fig1_example", (("strategy", "vertical"), ("safe", "true")))
    text = p.dumps()
    assert "edge 0:1 -> 1:0 [x == y]" in text
    assert TracePrefix.loads(text) == p
    assert TracePrefix.loads(text).dumps() == text


@pytest.mark.parametrize("text, fragment", [
    ("event 0:0\n", "missing 'prefix' header"),
    ("prefix p\nbogus 1\n", "line 2"),
    ("prefix p\nevent 0:0\nevent 1:0\nedge 0:0 -> 1:0 x == y\n", "line 4"),
    ("prefix p\nevent 0:0\nevent 0:1\nevent 1:0\nevent 1:1\n"
     "edge 0:1 -> 1:0 [true]\nedge 1:1 -> 0:0 [true]\n", "cyclic"),
    ("prefix p\nevent 0:0\nedge 0:0 -> 1:0 [true]\n", "outside the graph"),
])
def test_prefix_load_errors(text, fragment):
    with pytest.raises(TraceError, match=fragment):
        TracePrefix.loads(text)


def test_prefix_checked_against_program(fig1, fig2):
    TracePrefix(fig2, "fig1_example").check_program(fig1)
    with pytest.raises(ProgramError):
        TracePrefix(SymbolicTraceGraph.of([event("5:0")]), "x").check_program(fig1)
    bad = SymbolicTraceGraph.of([event("0:0"), event("1:0")], [edge("0:0", "z == 1", "1:0")])
    with pytest.raises(ProgramError):
        TracePrefix(bad, "x").check_program(fig1)


# -- properties ---------------------------------------------------------------

@given(random_graphs(), st.data())
def test_adheres_matches_oracle(gs, data):
    graph, sizes = gs
    prog = chain_program(sizes)
    seq = data.draw(interleavings(sizes, extra=True))
    for inp in prog.input_states():
        ex = Execution(inp, tuple(seq), False)
        assert adheres(ex, graph) == adheres_literal(seq, graph.events, graph.edges, inp.bindings)
        assert matches(ex, graph) == matches_literal(seq, graph.events, graph.edges, inp.bindings)


@given(random_graphs(), st.data())
def test_adherence_is_prefix_closed(gs, data):
    graph, sizes = gs
    prog = chain_program(sizes)
    seq = data.draw(interleavings(sizes))
    for inp in prog.input_states():
        if adheres(Execution(inp, tuple(seq), False), graph):
            for k in range(len(seq)):
                assert adheres(Execution(inp, tuple(seq[:k]), False), graph)


@given(random_graphs(max_events=7))
@settings(max_examples=40)
def test_linearizations_match_oracle(gs):
    graph, sizes = gs
    prog = chain_program(sizes)
    for inp in prog.input_states():
        got = {ex.events for ex in linearizations(graph, prog, inp)}
        assert got == linearizations_literal(prog, inp, graph.events, graph.edges)


@given(random_graphs(), st.data())
def test_prefix_order_matches_oracle(gs, data):
    graph, _ = gs
    keep = data.draw(st.sets(st.sampled_from(sorted(graph.events)))) if graph.events else set()
    sub = graph.restrict(keep)
    assert is_prefix_of(sub, graph) == prefix_literal((sub.events, sub.edges), (graph.events, graph.edges))
    closed = graph.restrict(graph.events - graph.up_closure(keep))
    if closed.events != graph.events:
        assert is_prefix_of(closed, graph)


@given(random_graphs())
def test_remove_matches_oracle(gs):
    graph, _ = gs
    for e in graph.events:
        g = remove_event(graph, e)
        assert (g.events, g.edges) == remove_literal(graph.events, graph.edges, e)


@given(small_programs(), st.data())
def test_reduction_preserves_adherence(prog, data):
    inp = data.draw(st.sampled_from(prog.input_states()))
    reps = list(Explorer(prog, inp))
    rep = data.draw(st.sampled_from(reps))
    full = build_trace_graph(rep.execution, prog, reduce=False)
    small = build_trace_graph(rep.execution, prog)
    assert small.edges <= full.edges
    for other in prog.input_states():
        for c in Explorer(prog, other):
            for k in range(len(c.execution.events) + 1):
                ex = Execution(other, c.execution.events[:k], False)
                assert adheres(ex, small) == adheres(ex, full)


@given(small_programs(), st.data())
def test_free_sequences_rebuild_the_class(prog, data):
    inp = data.draw(st.sampled_from(prog.input_states()))
    rep = data.draw(st.sampled_from(list(Explorer(prog, inp))))
    graph = build_trace_graph(rep.execution, prog)
    events: list[Event] = []
    last = None
    while not prog.is_terminal(replay(prog, Execution(inp, tuple(events), False)).final):
        run = free_sequences(prog, Execution(inp, tuple(events), False), graph, last)
        assert run and len({e.thread for e in run}) == 1
        events += run
        last = run[0].thread
    ex = Execution(inp, tuple(events), True)
    assert matches(ex, graph)
    assert class_id(ex.events, replay(prog, ex).accesses) == rep.class_id
