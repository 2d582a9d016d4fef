import random

import pytest
from hypothesis import given, settings, strategies as st

from relaxsched.explore import Explorer, Gate, class_id
from relaxsched.program import load_benchmark, load_program, replay, run_schedule
from relaxsched.trace import build_trace_graph, mazurkiewicz_classes
from relaxsched.verifier import maximal_edges, relaxation

from oracles import admitted_brute, classes_brute, gated_deadlock_brute
from strategies import small_programs

SMALL = [
    ("fig1_example", {}),
    ("bigshot", {}),
    ("peterson", {}),
    ("dekker", {}),
    ("lamport", {}),
    ("shared_pointer", {}),
    ("fibonacci", {"NUM": 3, "BOUND": 21}),
    ("last_zero", {"N": 4}),
]


def brute_ids(prog, inp):
    return {class_id(ex.events, replay(prog, ex).accesses) for ex in
            (runs[0] for runs in classes_brute(prog, inp).values())}


@pytest.mark.parametrize("name, params", SMALL)
def test_classes_match_brute_force(name, params):
    prog = load_benchmark(name, **params)
    for inp in prog.input_states():
        ex = Explorer(prog, inp)
        found = {c.class_id for c in ex}
        assert found == brute_ids(prog, inp)
        assert len(classes_brute(prog, inp)) == len(found)


@pytest.mark.parametrize("policy", ["lowest", "round_robin"])
def test_policies_reach_the_same_classes(policy):
    prog = load_benchmark("last_zero", N=5)
    inp = prog.input_states()[0]
    assert {c.class_id for c in Explorer(prog, inp, policy=policy)} == {
        c.class_id for c in Explorer(prog, inp)
    }


def test_fig1_class_counts(fig1, aliased, distinct):
    assert mazurkiewicz_classes(fig1, aliased).count == 6
    assert mazurkiewicz_classes(fig1, distinct).count == 1
    bad = [c for c in Explorer(fig1, aliased) if not c.error_free]
    assert len(bad) == 1


def test_single_thread_one_class():
    prog = load_program({"name": "s", "shared": [{"name": "z"}], "threads": [[
        {"op": "write", "loc": "z", "value": "1"}, {"op": "read", "loc": "z", "reg": "r"}]]})
    assert mazurkiewicz_classes(prog, prog.input_states()[0]).count == 1


def test_indexer_sizes_grow_by_factor_eight():
    counts = [mazurkiewicz_classes(load_benchmark("indexer", N=n), load_benchmark("indexer", N=n).input_states()[0]).count
              for n in (11, 12, 13)]
    assert counts == [1, 8, 64]


def test_forced_prefix_restricts_search(fig1, aliased):
    reps = list(Explorer(fig1, aliased, forced=[1]))
    assert reps and all(c.execution.events[0].thread == 1 for c in reps)


@given(small_programs())
@settings(max_examples=120)
def test_random_programs_match_brute_force(prog):
    for inp in prog.input_states():
        assert {c.class_id for c in Explorer(prog, inp)} == brute_ids(prog, inp)


@given(small_programs(), st.data())
@settings(max_examples=80)
def test_gated_search_matches_admitted_executions(prog, data):
    inp = data.draw(st.sampled_from(prog.input_states()))
    reps = list(Explorer(prog, inp))
    rep = data.draw(st.sampled_from(reps))
    graph = build_trace_graph(rep.execution, prog)
    graphs = [graph] + [relaxation(graph, e) for e in maximal_edges(graph)]
    for g in graphs:
        for other in prog.input_states():
            gate = Gate(g.active_incoming(other.bindings), len(prog.cell_names))
            ex = Explorer(prog, other, gate=gate)
            got = {c.class_id for c in ex}
            want = {class_id(e.events, replay(prog, e).accesses) for e in admitted_brute(prog, other, g)}
            assert got == want
            assert (ex.deadlocks > 0) == gated_deadlock_brute(prog, other, g)


@given(small_programs(), st.randoms(use_true_random=False))
def test_class_id_invariant_under_independent_swaps(prog, rnd):
    inp = prog.input_states()[0]
    for rep in Explorer(prog, inp):
        rp = replay(prog, rep.execution)
        evs = list(rep.execution.events)
        swaps = [i for i in range(len(evs) - 1)
                 if evs[i].thread != evs[i + 1].thread
                 and not any(a.cell == b.cell and (a.write or b.write)
                             for a in rp.accesses[i] for b in rp.accesses[i + 1])]
        if not swaps:
            continue
        i = rnd.choice(swaps)
        evs[i], evs[i + 1] = evs[i + 1], evs[i]
        swapped = run_schedule(prog, inp, [e.thread for e in evs])
        assert class_id(swapped.events, replay(prog, swapped).accesses) == rep.class_id


def test_gated_fig2_admits_only_the_safe_class(fig1, aliased, fig2):
    gate = Gate(fig2.active_incoming(aliased.bindings), len(fig1.cell_names))
    reps = list(Explorer(fig1, aliased, gate=gate))
    assert len(reps) == 1 and reps[0].error_free
