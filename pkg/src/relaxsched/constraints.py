"""Path constraints: conjunctions of atoms over program inputs.

Grammar (one atom per conjunct, joined by ``&&``)::

    v == w      v != w      v == 3      v < 3      p == &cell

``true`` is the empty conjunction.  For pointer inputs ``x == y`` tests
aliasing, i.e. whether both pointers target the same memory cell.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping

_ATOM_RE = re.compile(
    r"^\s*([A-Za-z_]\w*)\s*(==|!=|<)\s*(&?[A-Za-z_][\w\[\]]*|-?\d+)\s*$"
)


class ConstraintError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Atom:
    left: str
    op: str
    right: str  # variable name, "&cell", or integer literal

    def __post_init__(self):
        if self.op not in ("==", "!=", "<"):
            raise ConstraintError(f"unsupported operator {self.op!r}")

    @property
    def right_is_const(self) -> bool:
        return self.right.lstrip("-").isdigit()

    def variables(self) -> set[str]:
        names = {self.left}
        if not self.right_is_const and not self.right.startswith("&"):
            names.add(self.right)
        return names

    def evaluate(self, bindings: Mapping[str, int | str]) -> bool:
        try:
            lhs = bindings[self.left]
        except KeyError:
            raise ConstraintError(f"unbound variable {self.left!r}") from None
        if self.right_is_const:
            rhs: int | str = int(self.right)
        elif self.right.startswith("&"):
            rhs = self.right[1:]
        else:
            try:
                rhs = bindings[self.right]
            except KeyError:
                raise ConstraintError(f"unbound variable {self.right!r}") from None
        if self.op == "==":
            return lhs == rhs
        if self.op == "!=":
            return lhs != rhs
        if isinstance(lhs, str) or isinstance(rhs, str):
            raise ConstraintError(f"'<' applied to a pointer in {self}")
        return lhs < rhs

    def __str__(self) -> str:
        return f"{self.left} {self.op} {self.right}"


@dataclass(frozen=True, order=True)
class PathConstraint:
    """A conjunction of atoms; the empty conjunction is ``true``."""

    atoms: tuple[Atom, ...] = ()

    @classmethod
    def of(cls, *atoms: Atom) -> "PathConstraint":
        norm = []
        for a in atoms:
            # x == y and y == x are the same atom
            symmetric = a.op in ("==", "!=") and not a.right_is_const
            if symmetric and not a.right.startswith("&") and a.right < a.left:
                a = Atom(a.right, a.op, a.left)
            norm.append(a)
        return cls(tuple(sorted(set(norm))))

    @classmethod
    def parse(cls, text: str) -> "PathConstraint":
        text = text.strip()
        if text in ("", "true"):
            return TRUE
        atoms = []
        for part in re.split(r"&&|∧", text):
            m = _ATOM_RE.match(part)
            if not m:
                raise ConstraintError(f"cannot parse atom {part.strip()!r}")
            atoms.append(Atom(*m.groups()))
        return cls.of(*atoms)

    @property
    def is_true(self) -> bool:
        return not self.atoms

    def variables(self) -> set[str]:
        out: set[str] = set()
        for a in self.atoms:
            out |= a.variables()
        return out

    def evaluate(self, bindings: Mapping[str, int | str]) -> bool:
        return all(a.evaluate(bindings) for a in self.atoms)

    def __and__(self, other: "PathConstraint") -> "PathConstraint":
        return PathConstraint.of(*self.atoms, *other.atoms)

    def __str__(self) -> str:
        if not self.atoms:
            return "true"
        return " && ".join(str(a) for a in self.atoms)


TRUE = PathConstraint()


def eval_constraint(constraint: PathConstraint, input_state) -> bool:
    """Evaluate ``constraint`` against an :class:`InputState`."""
    return constraint.evaluate(input_state.bindings)
