import pytest
from hypothesis import given, strategies as st

from relaxsched.constraints import TRUE, Atom, ConstraintError, PathConstraint, eval_constraint
from relaxsched.program import InputState

ALIASED = InputState.from_dict({"x": "m0", "y": "m0", "n": 5})
DISTINCT = InputState.from_dict({"x": "m0", "y": "m1", "n": 5})


def test_aliasing_atom():
    c = PathConstraint.parse("x == y")
    assert eval_constraint(c, ALIASED)
    assert not eval_constraint(c, DISTINCT)


def test_conjunction():
    c = PathConstraint.parse("x == y ∧ n < 3")
    assert not eval_constraint(c, ALIASED)
    assert eval_constraint(PathConstraint.parse("x == y && n < 6"), ALIASED)


def test_true_and_cell_atoms():
    assert PathConstraint.parse("true") is TRUE or PathConstraint.parse("true") == TRUE
    assert eval_constraint(TRUE, DISTINCT)
    assert eval_constraint(PathConstraint.parse("y == &m1"), DISTINCT)
    assert eval_constraint(PathConstraint.parse("x != y"), DISTINCT)


def test_symmetric_atoms_normalise():
    assert PathConstraint.parse("y == x") == PathConstraint.parse("x == y")
    assert PathConstraint.parse("n < 3 && x == y") == PathConstraint.parse("x == y && n < 3")


@pytest.mark.parametrize("text", ["x = y", "x == ", "(x == y)", "x <= 3"])
def test_parse_errors(text):
    with pytest.raises(ConstraintError):
        PathConstraint.parse(text)


def test_unbound_variable():
    with pytest.raises(ConstraintError):
        eval_constraint(PathConstraint.parse("z == 1"), ALIASED)


def test_order_on_pointer_rejected():
    with pytest.raises(ConstraintError):
        Atom("x", "<", "3").evaluate({"x": "m0"})


atoms = st.builds(
    Atom,
    st.sampled_from(["x", "y", "n"]),
    st.sampled_from(["==", "!="]),
    st.sampled_from(["x", "y", "n", "3", "&m0"]),
)


@given(st.lists(atoms, max_size=3))
def test_text_round_trip(items):
    c = PathConstraint.of(*items)
    assert PathConstraint.parse(str(c)) == c
