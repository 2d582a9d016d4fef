"""Command-line front end: verify, run and bench."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import bench, verifier
from .program import ProgramError
from .runtime import WaitPolicy, WatchdogTimeout, PrefixSlot, execute
from .trace import TracePrefix, TraceError

EXIT_VIOLATION = 1
EXIT_USAGE = 2
EXIT_WATCHDOG = 3


def _params(pairs: list[str]) -> dict[str, int]:
    out = {}
    for item in pairs:
        key, sep, value = item.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"expected NAME=INT, got {item!r}")
        out[key.strip()] = int(value)
    return out


def cmd_verify(args) -> int:
    program = bench.resolve_program(args.program, _params(args.param))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    log_path = out / "verify.log"
    written = 0

    with open(log_path, "w", encoding="utf-8") as log:
        def on_step(state: verifier.VerifierState, line: str) -> None:
            nonlocal written
            print(line)
            log.write(line + "\n")
            while written < len(state.published):
                _write_prefix(out, written, state.published[written])
                written += 1

        try:
            state = verifier.run(program, args.strategy, budget=args.budget, on_step=on_step)
        except verifier.NoCorrectTrace as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_VIOLATION
        while written < len(state.published):
            _write_prefix(out, written, state.published[written])
            written += 1
        tail = "finished" if state.finished else "budget exhausted"
        summary = f"{tail}: {state.num_classes} classes, {len(state.published)} prefixes, final constraints={state.num_constraints}"
        print(summary)
        log.write(summary + "\n")
    return 0


def _write_prefix(out: Path, n: int, prefix: TracePrefix) -> None:
    (out / f"prefix_{n:03d}.txt").write_text(prefix.dumps(), encoding="utf-8")


def cmd_run(args) -> int:
    program = bench.resolve_program(args.program, _params(args.param))
    prefix = TracePrefix.loads(Path(args.prefix).read_text(encoding="utf-8"))
    prefix.check_program(program)
    if ("safe", "true") not in prefix.attestation:
        print("warning: prefix carries no safety attestation", file=sys.stderr)
    inp = bench.resolve_input(program, args.input)
    violated = 0
    for i in range(args.runs):
        seed = None if args.delay_fuzz is None else args.delay_fuzz * 1_000_003 + i
        report = execute(
            program, inp, PrefixSlot(prefix), WaitPolicy(args.wait),
            watchdog=args.watchdog, delay_seed=seed,
        )
        if args.log:
            for line in report.log_lines():
                print(line)
        status = "ok" if report.error_free else "violation"
        print(f"run={i} ns={report.wall_time} waits={report.waits} {status}")
        if not report.error_free:
            violated += 1
            for v in report.violations:
                print(f"  {v}")
    print(f"{args.runs} runs, {violated} with violations")
    return EXIT_VIOLATION if violated else 0


def cmd_bench(args) -> int:
    configs, doc = bench.load_config(args.config)
    out = Path(args.out or doc.get("out", "bench-out"))
    raw, summary = [], []
    for cfg in configs:
        r, s = bench.run_config(cfg)
        raw += r
        summary += s
    bench.write_csv(out, raw, summary)
    print(bench.format_summary(summary))
    print(f"wrote {out / 'raw.csv'} and {out / 'summary.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="relaxsched", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="verify a program and emit its prefix ladder")
    v.add_argument("program", help="program JSON file or shipped benchmark name")
    v.add_argument("--strategy", default="dfs-default", choices=sorted(verifier.STRATEGIES))
    v.add_argument("--out", required=True)
    v.add_argument("--budget", type=int, default=None, help="stop after this many classes")
    v.add_argument("--param", action="append", default=[], metavar="NAME=INT")
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("run", help="execute a program under a prefix")
    r.add_argument("program")
    r.add_argument("--prefix", required=True)
    r.add_argument("--input", default=None, metavar="NAME=VAL,...")
    r.add_argument("--runs", type=int, default=1)
    r.add_argument("--wait", default="busy", choices=[p.value for p in WaitPolicy])
    r.add_argument("--log", action="store_true", help="print the event log of every run")
    r.add_argument("--delay-fuzz", type=int, default=None, metavar="SEED")
    r.add_argument("--watchdog", type=float, default=10.0, metavar="SECONDS")
    r.add_argument("--param", action="append", default=[], metavar="NAME=INT")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bench", help="time benchmarks under prefix ladders")
    b.add_argument("--config", required=True)
    b.add_argument("--out", default=None)
    b.set_defaults(func=cmd_bench)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (ProgramError, TraceError, bench.ConfigError, verifier.VerifierError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except WatchdogTimeout as exc:
        print(f"watchdog: {exc}", file=sys.stderr)
        return EXIT_WATCHDOG


if __name__ == "__main__":
    sys.exit(main())
