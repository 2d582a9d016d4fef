"""Finite concurrent programs as deterministic transition systems.

A program is a set of threads, each a straight-line list of instructions
over shared memory cells, thread-local registers and program inputs.
Bounded loops and branches are compiled into forward jumps, so control
flow is acyclic.  Only shared-memory accesses are *events*; local
instructions are folded into the event that precedes them (leading
locals run as part of the initial state).

Scheduling is the only source of nondeterminism: :func:`step` is a pure
function of ``(state, thread)``.
"""

from __future__ import annotations

import ast
import copy
import enum
import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Iterator, NamedTuple, Sequence

from .constraints import TRUE, Atom, PathConstraint

DEFAULT_CEILING = 10**7


class ProgramError(ValueError):
    """Raised for malformed or inconsistent program documents."""


class ExplosionError(RuntimeError):
    """Raised when an enumeration exceeds its configured ceiling."""


class Event(NamedTuple):
    thread: int
    index: int

    def __str__(self) -> str:
        return f"{self.thread}:{self.index}"

    @classmethod
    def parse(cls, text: str) -> "Event":
        t, k = text.strip().split(":")
        return cls(int(t), int(k))


class StepSignal(enum.Enum):
    TERMINAL = "terminal"
    BLOCKED = "blocked"


TERMINAL = StepSignal.TERMINAL
BLOCKED = StepSignal.BLOCKED


@dataclass(frozen=True)
class InputState:
    """One initial state: integer inputs and pointer targets (cell names)."""

    items: tuple[tuple[str, int | str], ...]

    @classmethod
    def from_dict(cls, bindings: dict[str, int | str]) -> "InputState":
        return cls(tuple(sorted(bindings.items())))

    @cached_property
    def bindings(self) -> dict[str, int | str]:
        return dict(self.items)

    def aliasing(self) -> frozenset[frozenset[str]]:
        """Equivalence classes of pointer inputs that share a target."""
        groups: dict[str, set[str]] = {}
        for name, value in self.items:
            if isinstance(value, str):
                groups.setdefault(value, set()).add(name)
        return frozenset(frozenset(g) for g in groups.values())

    def __str__(self) -> str:
        return ",".join(f"{k}={v}" for k, v in self.items)


class Access(NamedTuple):
    cell: int
    write: bool
    term: tuple  # ("cell", idx) or ("ptr", input name)


class ProgramState(NamedTuple):
    inp: InputState
    mem: tuple[int, ...]
    pcs: tuple[int, ...]
    regs: tuple[tuple[int, ...], ...]
    failed: tuple[bool, ...]
    counts: tuple[int, ...]

    def fingerprint(self) -> int:
        return hash(self)


@dataclass(frozen=True)
class Execution:
    initial: InputState
    events: tuple[Event, ...]
    terminal: bool = False

    def __len__(self) -> int:
        return len(self.events)


# ---------------------------------------------------------------------------
# expression compilation
# ---------------------------------------------------------------------------

_ALLOWED = (
    ast.Expression, ast.BoolOp, ast.BinOp, ast.UnaryOp, ast.Compare, ast.Name,
    ast.Constant, ast.IfExp, ast.Load, ast.And, ast.Or, ast.Add, ast.Sub,
    ast.Mult, ast.FloorDiv, ast.Mod, ast.USub, ast.Not, ast.Eq, ast.NotEq,
    ast.Lt, ast.LtE, ast.Gt, ast.GtE, ast.Subscript,
)


_EXPR_CACHE: dict[tuple, Callable] = {}


class _Rewriter(ast.NodeTransformer):
    def __init__(self, resolve: Callable[[str], ast.expr], subscript=None):
        self.resolve = resolve
        self.subscript = subscript

    def visit_Name(self, node: ast.Name) -> ast.expr:
        return ast.copy_location(self.resolve(node.id), node)

    def visit_Subscript(self, node: ast.Subscript) -> ast.expr:
        if self.subscript is None or not isinstance(node.value, ast.Name):
            raise ProgramError("indexing is only allowed on shared arrays in assertions")
        index = self.visit(node.slice)
        return ast.copy_location(self.subscript(node.value.id, index), node)


def _compile_expr(text: str | int | bool, resolve, subscript=None, args=("R", "I")):
    if isinstance(text, bool):
        text = str(int(text))
    text = str(text)
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ProgramError(f"bad expression {text!r}: {exc.msg}") from None
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED):
            raise ProgramError(f"unsupported syntax {type(node).__name__} in {text!r}")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, bool)):
            raise ProgramError(f"only integer constants allowed in {text!r}")
    body = _Rewriter(resolve, subscript).visit(tree.body)
    key = (ast.dump(body), args)
    cached = _EXPR_CACHE.get(key)
    if cached is not None:
        return cached
    fn = ast.Expression(
        ast.Lambda(
            ast.arguments(
                posonlyargs=[], args=[ast.arg(a) for a in args], kwonlyargs=[],
                kw_defaults=[], defaults=[],
            ),
            body,
        )
    )
    ast.fix_missing_locations(fn)
    compiled = eval(compile(fn, f"<expr {text}>", "eval"), {"__builtins__": {}})
    _EXPR_CACHE[key] = compiled
    return compiled


def _const_int(text, params: dict[str, int]) -> int:
    fn = _compile_expr(text, lambda n: _param_node(n, params), args=())
    return int(fn())


def _param_node(name: str, params: dict[str, int]) -> ast.expr:
    if name in params:
        return ast.Constant(params[name])
    raise ProgramError(f"undeclared name {name!r} in constant expression")


# ---------------------------------------------------------------------------
# program loading
# ---------------------------------------------------------------------------





@dataclass(eq=False)
class Program:
    """A validated, compiled program.  Construct with :func:`load_program`."""

    name: str
    document: dict
    inputs: list[dict]
    cell_names: list[str]
    init_mem: tuple[int, ...]
    code: list[list[tuple]]
    reg_names: list[list[str]]
    final_assertions: list[tuple[str, Callable]] = field(repr=False)
    thread_names: list[str] = field(default_factory=list)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Program) and self.document == other.document

    def __hash__(self) -> int:
        return hash(json.dumps(self.document, sort_keys=True))

    @property
    def num_threads(self) -> int:
        return len(self.code)

    @cached_property
    def cell_index(self) -> dict[str, int]:
        return {n: i for i, n in enumerate(self.cell_names)}

    # -- inputs -----------------------------------------------------------
    def input_states(self) -> list[InputState]:
        """Every initial state from the declared finite input domains."""
        names = [d["name"] for d in self.inputs]
        domains = [d["domain"] for d in self.inputs]
        return [
            InputState.from_dict(dict(zip(names, combo)))
            for combo in itertools.product(*domains)
        ]

    def input_named(self, text: str) -> InputState:
        """Parse ``name=val,...``; unspecified inputs take their first domain value."""
        chosen: dict[str, int | str] = {d["name"]: d["domain"][0] for d in self.inputs}
        kinds = {d["name"]: d["kind"] for d in self.inputs}
        for part in filter(None, (p.strip() for p in text.split(","))):
            key, _, val = part.partition("=")
            key = key.strip()
            if key not in kinds:
                raise ProgramError(f"unknown input {key!r}")
            chosen[key] = int(val) if kinds[key] == "int" else val.strip()
        for d in self.inputs:
            if chosen[d["name"]] not in d["domain"]:
                raise ProgramError(f"value {chosen[d['name']]!r} outside domain of {d['name']}")
        return InputState.from_dict(chosen)

    def env(self, inp: InputState) -> dict[str, int]:
        """Input bindings as the interpreter sees them (pointers as cell indices)."""
        cache = self.__dict__.setdefault("_env_cache", {})
        try:
            return cache[inp]
        except KeyError:
            pass
        out = {}
        for k, v in inp.items:
            out[k] = self.cell_index[v] if isinstance(v, str) else v
        cache[inp] = out
        return out

    # -- transition relation ---------------------------------------------
    def initial_state(self, inp: InputState) -> ProgramState:
        env = self.env(inp)
        pcs, regs, failed = [], [], []
        for t, code in enumerate(self.code):
            R = [0] * len(self.reg_names[t])
            pc, fail = _run_locals(code, 0, R, env)
            pcs.append(pc)
            regs.append(tuple(R))
            failed.append(fail)
        n = self.num_threads
        return ProgramState(inp, self.init_mem, tuple(pcs), tuple(regs), tuple(failed), (0,) * n)

    def terminated(self, state: ProgramState, t: int) -> bool:
        return state.pcs[t] >= len(self.code[t])

    def is_terminal(self, state: ProgramState) -> bool:
        return all(pc >= len(c) for pc, c in zip(state.pcs, self.code))

    def next_event(self, state: ProgramState, t: int) -> Event | None:
        if self.terminated(state, t):
            return None
        return Event(t, state.counts[t])

    def pending_accesses(self, state: ProgramState, t: int) -> tuple[Access, ...] | None:
        """Cells the thread's next event may touch (writes conservatively)."""
        if self.terminated(state, t):
            return None
        ins = self.code[t][state.pcs[t]]
        env = self.env(state.inp)
        R = state.regs[t]
        may_write = ins[0] not in ("read", "await")
        if ins[0] == "await":
            return tuple(Access(cell, False, term) for cell, term in (_resolve(loc, R, env) for loc in ins[1]))
        cell, term = _resolve(ins[1], R, env)
        return (Access(cell, may_write, term),)

    def fire(self, state: ProgramState, t: int):
        """Execute thread ``t``'s next event.

        Returns ``(new_state, accesses)``, or a :class:`StepSignal`.
        """
        code = self.code[t]
        pc = state.pcs[t]
        if pc >= len(code):
            return TERMINAL
        env = self.env(state.inp)
        mem = list(state.mem)
        R = list(state.regs[t])
        accesses = _exec_shared(code[pc], mem, R, env)
        if accesses is None:
            return BLOCKED
        pc, fail = _run_locals(code, pc + 1, R, env)
        new = ProgramState(
            state.inp,
            tuple(mem),
            _replace(state.pcs, t, pc),
            _replace(state.regs, t, tuple(R)),
            _replace(state.failed, t, state.failed[t] or fail),
            _replace(state.counts, t, state.counts[t] + 1),
        )
        return new, accesses

    def enabled(self, state: ProgramState, t: int) -> bool:
        if self.terminated(state, t):
            return False
        ins = self.code[t][state.pcs[t]]
        if ins[0] not in ("lock", "await"):
            return True
        return _exec_shared(ins, list(state.mem), list(state.regs[t]), self.env(state.inp)) is not None

    def error_free(self, state: ProgramState) -> bool:
        if any(state.failed):
            return False
        if self.is_terminal(state):
            return all(fn(state.mem) for _, fn in self.final_assertions)
        return True

    def thread_registers(self, state: ProgramState, t: int) -> dict[str, int]:
        return dict(zip(self.reg_names[t], state.regs[t]))

    def cell_value(self, state: ProgramState, name: str) -> int:
        return state.mem[self.cell_index[name]]


def _replace(tup: tuple, i: int, value) -> tuple:
    return tup[:i] + (value,) + tup[i + 1:]


def _resolve(loc: tuple, R, env) -> tuple[int, tuple]:
    kind = loc[0]
    if kind == "cell":
        return loc[1], ("cell", loc[1])
    if kind == "ptr":
        cell = env[loc[1]]
        return cell, ("ptr", loc[1])
    _, base, size, fn, name = loc
    i = fn(R, env)
    if not 0 <= i < size:
        raise ProgramError(f"index {i} out of bounds for {name}[{size}]")
    return base + i, ("cell", base + i)


def _run_locals(code, pc, R, env):
    fail = False
    n = len(code)
    while pc < n:
        ins = code[pc]
        op = ins[0]
        if op == "set":
            R[ins[1]] = ins[2](R, env)
            pc += 1
        elif op == "assert":
            if not ins[1](R, env):
                fail = True
            pc += 1
        elif op == "br":
            pc = pc + 1 if ins[1](R, env) else ins[2]
        elif op == "jmp":
            pc = ins[1]
        else:
            break
    return pc, fail


def _exec_shared(ins, mem, R, env):
    """Perform one shared access in place; ``None`` means blocked."""
    op = ins[0]
    if op == "await":
        _, locs, regs, cond = ins
        resolved = [_resolve(loc, R, env) for loc in locs]
        saved = [R[r] for r in regs]
        for r, (cell, _) in zip(regs, resolved):
            R[r] = mem[cell]
        if not cond(R, env):
            for r, v in zip(regs, saved):
                R[r] = v
            return None
        return [Access(cell, False, term) for cell, term in resolved]
    cell, term = _resolve(ins[1], R, env)
    if op == "read":
        R[ins[2]] = mem[cell]
        return [Access(cell, False, term)]
    if op == "write":
        mem[cell] = ins[2](R, env)
        return [Access(cell, True, term)]
    if op == "rmw":
        R[ins[2]] = mem[cell]
        mem[cell] = ins[3](R, env)
        return [Access(cell, True, term)]
    if op == "cas":
        _, _, expect, value, reg = ins
        if mem[cell] == expect(R, env):
            mem[cell] = value(R, env)
            if reg is not None:
                R[reg] = 1
            return [Access(cell, True, term)]
        if reg is not None:
            R[reg] = 0
        return [Access(cell, False, term)]
    if op == "lock":
        if mem[cell] != 0:
            return None
        mem[cell] = 1
        return [Access(cell, True, term)]
    if op == "unlock":
        mem[cell] = 0
        return [Access(cell, True, term)]
    raise ProgramError(f"not a shared instruction: {op}")


class _ThreadCompiler:
    def __init__(self, prog: "_Loader", tid: int):
        self.prog = prog
        self.tid = tid
        self.code: list[list] = []
        self.regs: dict[str, int] = {}
        self.consts: dict[str, int] = {}

    def reg(self, name: str) -> int:
        if name in self.prog.params or name == "tid" or name in self.prog.inputs:
            raise ProgramError(f"cannot assign to read-only name {name!r}")
        return self.regs.setdefault(name, len(self.regs))

    def collect_regs(self, body):
        for ins in body:
            for key in ("reg",):
                if key in ins and ins[key] is not None:
                    self.reg(ins[key])
            for r in ins.get("regs", []):
                self.reg(r)
            for sub in ("then", "else", "body"):
                if sub in ins:
                    self.collect_regs(ins[sub])

    def resolve_name(self, name: str) -> ast.expr:
        if name in self.consts:
            return ast.Constant(self.consts[name])
        if name == "tid":
            return ast.Constant(self.tid)
        if name in self.prog.params:
            return ast.Constant(self.prog.params[name])
        if name in self.regs:
            return ast.Subscript(ast.Name("R", ast.Load()), ast.Constant(self.regs[name]), ast.Load())
        if self.prog.inputs.get(name) == "int":
            return ast.Subscript(ast.Name("I", ast.Load()), ast.Constant(name), ast.Load())
        raise ProgramError(f"undeclared variable {name!r} in thread {self.tid}")

    def expr(self, text):
        return _compile_expr(text, self.resolve_name)

    def loc(self, text: str) -> tuple:
        if not isinstance(text, str):
            raise ProgramError(f"location must be a string, got {text!r}")
        text = text.strip()
        if text.startswith("*"):
            name = text[1:].strip()
            if self.prog.inputs.get(name) != "ptr":
                raise ProgramError(f"{name!r} is not a declared pointer input")
            return ("ptr", name)
        if "[" in text:
            name, _, rest = text.partition("[")
            name = name.strip()
            if not rest.endswith("]") or name not in self.prog.arrays:
                raise ProgramError(f"undeclared shared array in location {text!r}")
            base, size = self.prog.arrays[name]
            return ("arr", base, size, self.expr(rest[:-1]), name)
        if text not in self.prog.scalars:
            raise ProgramError(f"undeclared shared variable {text!r}")
        return ("cell", self.prog.scalars[text])

    def emit(self, body, breaks: list[int] | None):
        for ins in body:
            if not isinstance(ins, dict) or "op" not in ins:
                raise ProgramError(f"instruction must be an object with 'op': {ins!r}")
            op = ins["op"]
            if op == "read":
                self.code.append(("read", self.loc(ins["loc"]), self.reg(ins["reg"])))
            elif op == "write":
                self.code.append(("write", self.loc(ins["loc"]), self.expr(ins["value"])))
            elif op == "rmw":
                self.code.append(("rmw", self.loc(ins["loc"]), self.reg(ins["reg"]), self.expr(ins["value"])))
            elif op == "cas":
                reg = self.reg(ins["reg"]) if ins.get("reg") else None
                self.code.append(("cas", self.loc(ins["loc"]), self.expr(ins["expect"]), self.expr(ins["value"]), reg))
            elif op in ("lock", "unlock"):
                self.code.append((op, self.loc(ins["loc"])))
            elif op == "await":
                locs = ins["locs"] if "locs" in ins else [ins["loc"]]
                regs = ins["regs"] if "regs" in ins else [ins["reg"]]
                if len(locs) != len(regs):
                    raise ProgramError("await needs one register per location")
                self.code.append(("await", tuple(self.loc(l) for l in locs),
                                  tuple(self.reg(r) for r in regs), self.expr(ins["until"])))
            elif op == "set":
                self.code.append(("set", self.reg(ins["reg"]), self.expr(ins["value"])))
            elif op == "assert":
                self.code.append(("assert", self.expr(ins["cond"]), str(ins["cond"])))
            elif op == "if":
                cond = self.expr(ins["cond"])
                br = len(self.code)
                self.code.append(None)
                self.emit(ins.get("then", []), breaks)
                if ins.get("else"):
                    jmp = len(self.code)
                    self.code.append(None)
                    self.code[br] = ("br", cond, len(self.code))
                    self.emit(ins["else"], breaks)
                    self.code[jmp] = ("jmp", len(self.code))
                else:
                    self.code[br] = ("br", cond, len(self.code))
            elif op == "loop":
                if "times" not in ins:
                    raise ProgramError("cyclic control flow: loops need a 'times' bound")
                times = _const_int(ins["times"], {**self.prog.params, "tid": self.tid, **self.consts})
                var = ins.get("var")
                mine: list[int] = []
                for i in range(times):
                    if var:
                        self.consts[var] = i
                    self.emit(ins.get("body", []), mine)
                if var:
                    self.consts.pop(var, None)
                end = len(self.code)
                for pos in mine:
                    self.code[pos] = ("jmp", end)
            elif op == "break":
                if breaks is None:
                    raise ProgramError("'break' outside of a loop")
                breaks.append(len(self.code))
                self.code.append(None)
            elif op in ("goto", "jump", "while"):
                raise ProgramError(f"cyclic control flow: {op!r} is not supported")
            else:
                raise ProgramError(f"unknown instruction {op!r}")


class _Loader:
    def __init__(self, doc: dict):
        self.doc = doc
        self.params: dict[str, int] = {}
        self.inputs: dict[str, str] = {}
        self.scalars: dict[str, int] = {}
        self.arrays: dict[str, tuple[int, int]] = {}


def _normalize_source(source) -> dict:
    if isinstance(source, Program):
        return copy.deepcopy(source.document)
    if isinstance(source, dict):
        return copy.deepcopy(source)
    if isinstance(source, Path):
        return json.loads(source.read_text(encoding="utf-8"))
    if isinstance(source, str):
        stripped = source.lstrip()
        if stripped.startswith("{"):
            return json.loads(source)
        return json.loads(Path(source).read_text(encoding="utf-8"))
    raise ProgramError(f"cannot load a program from {type(source).__name__}")


def load_program(source, params: dict[str, int] | None = None) -> Program:
    """Load and validate a program document (JSON text, path, or dict).

    ``params`` override the document's ``params`` block (e.g. thread count).
    """
    try:
        doc = _normalize_source(source)
    except json.JSONDecodeError as exc:
        raise ProgramError(f"not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ProgramError("program document must be a JSON object")
    unknown = set(doc) - {"name", "params", "inputs", "shared", "threads", "assertions", "description"}
    if unknown:
        raise ProgramError(f"unknown fields {sorted(unknown)}")
    for key in ("name", "threads"):
        if key not in doc:
            raise ProgramError(f"missing field {key!r}")
    doc.setdefault("params", {})
    doc.setdefault("inputs", [])
    doc.setdefault("shared", [])
    doc.setdefault("assertions", [])
    if params:
        unknown_params = set(params) - set(doc["params"])
        if unknown_params:
            raise ProgramError(f"unknown params {sorted(unknown_params)}")
        doc["params"].update(params)

    ld = _Loader(doc)
    for k, v in doc["params"].items():
        if not isinstance(v, int):
            raise ProgramError(f"param {k!r} must be an integer")
        ld.params[k] = v

    cell_names: list[str] = []
    init: list[int] = []
    for sv in doc["shared"]:
        name = sv.get("name")
        if not isinstance(name, str) or name in ld.scalars or name in ld.arrays:
            raise ProgramError(f"bad or duplicate shared variable {name!r}")
        if "size" in sv:
            size = _const_int(sv["size"], ld.params)
            ld.arrays[name] = (len(cell_names), size)
            vals = sv.get("init", 0)
            vals = [vals] * size if isinstance(vals, int) else list(vals)
            if len(vals) != size:
                raise ProgramError(f"init of {name} has wrong length")
            for i, v in enumerate(vals):
                cell_names.append(f"{name}[{i}]")
                init.append(int(v))
        else:
            ld.scalars[name] = len(cell_names)
            cell_names.append(name)
            init.append(int(sv.get("init", 0)))

    inputs = []
    for d in doc["inputs"]:
        name, kind, domain = d.get("name"), d.get("kind"), d.get("domain")
        if kind not in ("int", "ptr") or not isinstance(name, str) or not domain:
            raise ProgramError(f"bad input declaration {d!r}")
        if name in ld.inputs or name in ld.scalars or name in ld.arrays:
            raise ProgramError(f"duplicate name {name!r}")
        if kind == "ptr":
            for target in domain:
                if target not in cell_names:
                    raise ProgramError(f"pointer {name!r} targets undeclared cell {target!r}")
        ld.inputs[name] = kind
        inputs.append({"name": name, "kind": kind, "domain": list(domain)})

    bodies: list[tuple[str, list]] = []
    for i, th in enumerate(doc["threads"]):
        if isinstance(th, list):
            bodies.append((f"T{len(bodies)}", th))
        elif isinstance(th, dict) and "code" in th:
            count = _const_int(th.get("count", 1), ld.params)
            for j in range(count):
                label = th.get("name", f"T{len(bodies)}")
                bodies.append((f"{label}{j}" if count > 1 else label, th["code"]))
        else:
            raise ProgramError(f"thread entry {i} must be a list or an object with 'code'")

    code, reg_names, names = [], [], []
    for tid, (label, body) in enumerate(bodies):
        tc = _ThreadCompiler(ld, tid)
        tc.collect_regs(body)
        tc.emit(body, None)
        code.append(tc.code)
        reg_names.append(list(tc.regs))
        names.append(label)

    def shared_name(name: str) -> ast.expr:
        if name in ld.scalars:
            return ast.Subscript(ast.Name("M", ast.Load()), ast.Constant(ld.scalars[name]), ast.Load())
        if name in ld.params:
            return ast.Constant(ld.params[name])
        raise ProgramError(f"undeclared shared variable {name!r} in assertion")

    def shared_sub(name: str, index: ast.expr) -> ast.expr:
        if name not in ld.arrays:
            raise ProgramError(f"undeclared shared array {name!r} in assertion")
        base, _ = ld.arrays[name]
        idx = ast.BinOp(ast.Constant(base), ast.Add(), index)
        return ast.Subscript(ast.Name("M", ast.Load()), idx, ast.Load())

    finals = []
    for text in doc["assertions"]:
        finals.append((str(text), _compile_expr(text, shared_name, shared_sub, args=("M",))))

    return Program(
        name=str(doc["name"]),
        document=doc,
        inputs=inputs,
        cell_names=cell_names,
        init_mem=tuple(init),
        code=code,
        reg_names=reg_names,
        final_assertions=finals,
        thread_names=names,
    )


def dump_program(program: Program) -> str:
    return json.dumps(program.document, indent=2, sort_keys=True)


BENCHMARKS = (
    "bigshot", "dekker", "fibonacci", "lamport", "peterson",
    "shared_pointer", "indexer", "last_zero", "fig1_example",
)


def benchmark_path(name: str) -> Path:
    ref = resources.files("relaxsched") / "benchmarks" / f"{name}.json"
    return Path(str(ref))


def load_benchmark(name: str, **params: int) -> Program:
    path = benchmark_path(name)
    if not path.exists():
        raise ProgramError(f"no shipped benchmark named {name!r}")
    return load_program(path, params or None)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def step(program: Program, state: ProgramState, thread: int):
    """Successor of ``state`` when ``thread`` runs its next event.

    Returns a :class:`ProgramState`, ``TERMINAL`` or ``BLOCKED``.
    """
    out = program.fire(state, thread)
    if isinstance(out, StepSignal):
        return out
    return out[0]


@dataclass
class Replay:
    """States and accesses observed while replaying an execution."""

    states: list[ProgramState]
    accesses: list[tuple[Access, ...]]

    @property
    def final(self) -> ProgramState:
        return self.states[-1]


def replay(program: Program, execution: Execution) -> Replay:
    """Re-run ``execution`` step by step; raises ProgramError if it is invalid."""
    state = program.initial_state(execution.initial)
    states, accesses = [state], []
    for pos, ev in enumerate(execution.events):
        if not 0 <= ev.thread < program.num_threads:
            raise ProgramError(f"event {ev} names an unknown thread")
        if ev.index != state.counts[ev.thread]:
            raise ProgramError(f"event {ev} at position {pos} has the wrong occurrence index")
        out = program.fire(state, ev.thread)
        if isinstance(out, StepSignal):
            raise ProgramError(f"event {ev} at position {pos} cannot fire ({out.value})")
        state, acc = out
        states.append(state)
        accesses.append(tuple(acc))
    return Replay(states, accesses)


def run_schedule(program: Program, inp: InputState, threads: Sequence[int]) -> Execution:
    """Build an execution from a sequence of thread ids."""
    state = program.initial_state(inp)
    events = []
    for t in threads:
        ev = program.next_event(state, t)
        out = program.fire(state, t)
        if isinstance(out, StepSignal):
            raise ProgramError(f"thread {t} cannot step ({out.value})")
        state = out[0]
        events.append(ev)
    return Execution(inp, tuple(events), program.is_terminal(state))


def enumerate_executions(
    program: Program,
    inp: InputState,
    limit: int | None = None,
    ceiling: int = DEFAULT_CEILING,
) -> Iterator[Execution]:
    """Every complete interleaving from ``inp`` (brute force).

    Deadlocked partial runs are not complete and are not yielded.
    """
    if limit is not None and limit < 1:
        raise ValueError("limit must be >= 1")
    produced = 0
    n = program.num_threads
    stack: list[tuple[ProgramState, tuple[Event, ...]]] = [(program.initial_state(inp), ())]
    while stack:
        state, events = stack.pop()
        if program.is_terminal(state):
            produced += 1
            if produced > ceiling:
                raise ExplosionError(f"more than {ceiling} executions of {program.name}")
            yield Execution(inp, events, True)
            if limit is not None and produced >= limit:
                return
            continue
        for t in reversed(range(n)):
            out = program.fire(state, t)
            if isinstance(out, StepSignal):
                continue
            stack.append((out[0], events + (Event(t, state.counts[t]),)))


def _conflict(a: Access, b: Access) -> bool:
    return a.cell == b.cell and (a.write or b.write)


def pair_constraint(program: Program, a: Access, b: Access) -> PathConstraint | None:
    """Weakest constraint under which two accesses conflict, or ``None``."""
    if not (a.write or b.write):
        return None
    ka, kb = a.term, b.term
    if ka[0] == "cell" and kb[0] == "cell":
        return TRUE if ka[1] == kb[1] else None
    if ka[0] == "ptr" and kb[0] == "ptr":
        return TRUE if ka[1] == kb[1] else PathConstraint.of(Atom(ka[1], "==", kb[1]))
    ptr, cell = (ka, kb) if ka[0] == "ptr" else (kb, ka)
    return PathConstraint.of(Atom(ptr[1], "==", "&" + program.cell_names[cell[1]]))


def access_constraint(program: Program, xs: Sequence[Access], ys: Sequence[Access]) -> PathConstraint | None:
    """Symbolic dependency between two access sets.

    Several distinct non-trivial atoms would need a disjunction; that case
    falls back to ``true`` (dependency over-approximated).
    """
    found: set[PathConstraint] = set()
    for a in xs:
        for b in ys:
            c = pair_constraint(program, a, b)
            if c is None:
                continue
            if c.is_true:
                return TRUE
            found.add(c)
    if not found:
        return None
    if len(found) == 1:
        return found.pop()
    return TRUE


def _locate(execution: Execution, ev: Event) -> int:
    try:
        return execution.events.index(ev)
    except ValueError:
        raise ProgramError(f"event {ev} does not occur in the execution") from None


def dependent(program: Program, e1: Event, e2: Event, inp: InputState,
              execution: Execution | None = None) -> bool:
    """Concrete dependency: a common cell under ``inp`` with at least one write.

    Event accesses are taken from ``execution`` (default: the first
    enumerated complete execution from ``inp``).
    """
    if execution is None:
        execution = next(enumerate_executions(program, inp, limit=1))
    rp = replay(program, execution)
    xs = rp.accesses[_locate(execution, e1)]
    ys = rp.accesses[_locate(execution, e2)]
    return any(_conflict(a, b) for a in xs for b in ys)


def symbolic_dependent(program: Program, e1: Event, e2: Event,
                       execution: Execution | None = None) -> PathConstraint | None:
    """Weakest supported constraint under which ``e1`` and ``e2`` conflict."""
    if execution is None:
        execution = next(enumerate_executions(program, program.input_states()[0], limit=1))
    rp = replay(program, execution)
    return access_constraint(
        program, rp.accesses[_locate(execution, e1)], rp.accesses[_locate(execution, e2)]
    )
