"""Benchmark harness: time programs under a shrinking ladder of prefixes.

Every benchmark runs uninstrumented first (the baseline), then once per
ladder prefix with gating enabled.  Raw samples go to ``raw.csv`` and
the per-configuration medians with their overhead relative to the
baseline go to ``summary.csv``.
"""

from __future__ import annotations

import csv
import json
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from .program import InputState, Program, ProgramError, load_benchmark, load_program
from .runtime import PrefixSlot, WaitPolicy, execute
from .trace import TracePrefix, is_prefix_of
from . import verifier

BASELINE = "baseline"


class ConfigError(ValueError):
    pass


@dataclass
class BenchConfig:
    benchmark: str
    params: dict[str, int] = field(default_factory=dict)
    prefix_ladder: list[TracePrefix] = field(default_factory=list)
    runs: int = 1000
    wait_policy: WaitPolicy = WaitPolicy.BUSY
    input: str | None = None
    seed: int | None = None
    program: Program | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.runs < 1:
            raise ConfigError("runs must be at least 1")
        self.wait_policy = WaitPolicy(self.wait_policy)
        check_ladder(self.prefix_ladder)


@dataclass(frozen=True)
class TimingRecord:
    benchmark: str
    constraints: int | str
    median_ns: float
    overhead_pct: int


def check_ladder(ladder: Sequence[TracePrefix]) -> None:
    for big, small in zip(ladder, ladder[1:]):
        if not is_prefix_of(small.graph, big.graph):
            raise ConfigError(
                f"ladder is not strictly decreasing at {big.num_constraints} -> {small.num_constraints} constraints"
            )


def overhead_pct(median_ns: float, baseline_ns: float) -> int:
    return round((median_ns / baseline_ns - 1.0) * 100.0)


def resolve_program(spec: str, params: dict[str, int] | None = None) -> Program:
    """A program file path, or the name of a shipped benchmark."""
    path = Path(spec)
    if path.exists():
        return load_program(path, params or None)
    if spec.endswith(".json"):
        raise ProgramError(f"no such program file: {spec}")
    return load_benchmark(spec, **(params or {}))


def resolve_input(program: Program, text: str | None) -> InputState:
    if text is None or text == "":
        return program.input_states()[0]
    return program.input_named(text)


def select_ladder(chain: Sequence[TracePrefix], counts: Sequence[int] | None) -> list[TracePrefix]:
    """Pick the chain members with the requested constraint counts (first hit wins)."""
    if counts is None:
        return list(chain)
    by_count: dict[int, TracePrefix] = {}
    for p in chain:
        by_count.setdefault(p.num_constraints, p)
    missing = [c for c in counts if c not in by_count]
    if missing:
        raise ConfigError(f"verified chain has no prefix with {missing} constraints")
    return [by_count[c] for c in counts]


def verified_ladder(program: Program, strategy: str, budget: int | None = None) -> list[TracePrefix]:
    return list(verifier.run(program, strategy, budget=budget).published)


def time_runs(
    program: Program,
    inp: InputState,
    prefix: TracePrefix | None,
    runs: int,
    policy: WaitPolicy,
    seed: int | None = None,
) -> list[int]:
    out = []
    for i in range(runs):
        slot = PrefixSlot(prefix) if prefix is not None else None
        report = execute(
            program, inp, slot, policy,
            instrumented=prefix is not None,
            delay_seed=None if seed is None else seed + i,
        )
        out.append(report.wall_time)
    return out


def run_config(
    cfg: BenchConfig,
    program: Program | None = None,
    on_row: Callable[[str, int | str, int, int], None] | None = None,
) -> tuple[list[tuple[str, int | str, int, int]], list[TimingRecord]]:
    program = program or cfg.program or resolve_program(cfg.benchmark, cfg.params)
    inp = resolve_input(program, cfg.input)
    raw: list[tuple[str, int | str, int, int]] = []
    summary: list[TimingRecord] = []
    configs: list[tuple[int | str, TracePrefix | None]] = [(BASELINE, None)]
    configs += [(p.num_constraints, p) for p in cfg.prefix_ladder]
    base_median = None
    for label, prefix in configs:
        samples = time_runs(program, inp, prefix, cfg.runs, cfg.wait_policy, cfg.seed)
        for i, ns in enumerate(samples):
            row = (cfg.benchmark, label, i, ns)
            raw.append(row)
            if on_row:
                on_row(*row)
        med = statistics.median(samples)
        if base_median is None:
            base_median = med
        summary.append(TimingRecord(cfg.benchmark, label, med, overhead_pct(med, base_median)))
    return raw, summary


def load_config(path: str | Path) -> tuple[list[BenchConfig], dict]:
    """Read a bench config file.

    The file holds global defaults plus a ``benchmarks`` list.  Each
    entry names a program and either lists prefix files in ``ladder``
    or asks for a verified ``strategy`` (with optional ``budget`` and a
    ``constraints`` selection from the published chain).
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    entries = doc.get("benchmarks", [doc] if "benchmark" in doc else [])
    if not entries:
        raise ConfigError("config lists no benchmarks")
    configs = []
    for entry in entries:
        if "benchmark" not in entry:
            raise ConfigError(f"entry without 'benchmark': {entry}")
        params = dict(entry.get("params", {}))
        program = resolve_program(_relative(entry["benchmark"], path.parent), params)
        if "ladder" in entry:
            ladder = [
                TracePrefix.loads(Path(_relative(f, path.parent)).read_text(encoding="utf-8"))
                for f in entry["ladder"]
            ]
            for p in ladder:
                p.check_program(program)
        else:
            chain = verified_ladder(program, entry.get("strategy", "dfs-default"), entry.get("budget"))
            ladder = select_ladder(chain, entry.get("constraints"))
        configs.append(BenchConfig(
            benchmark=entry.get("label", program.name),
            params=params,
            prefix_ladder=ladder,
            runs=int(entry.get("runs", doc.get("runs", 1000))),
            wait_policy=entry.get("wait", doc.get("wait", "busy")),
            input=entry.get("input"),
            seed=entry.get("seed", doc.get("seed")),
            program=program,
        ))
    return configs, doc


def _relative(spec: str, base: Path) -> str:
    p = Path(spec)
    if not p.is_absolute() and (base / p).exists():
        return str(base / p)
    return spec


def write_csv(out: Path, raw, summary: Sequence[TimingRecord]) -> None:
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "raw.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["benchmark", "constraints", "run", "ns"])
        w.writerows(raw)
    with open(out / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["benchmark", "constraints", "median_ns", "overhead_pct"])
        for r in summary:
            w.writerow([r.benchmark, r.constraints, f"{r.median_ns:.1f}", r.overhead_pct])


def format_summary(summary: Sequence[TimingRecord]) -> str:
    lines = [f"{'benchmark':<24} {'constraints':>11} {'median_us':>12} {'overhead':>9}"]
    for r in summary:
        lines.append(
            f"{r.benchmark:<24} {str(r.constraints):>11} {r.median_ns / 1000:>12.1f} {r.overhead_pct:>8}%"
        )
    return "\n".join(lines)
