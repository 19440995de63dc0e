"""``recasm`` command line: run, transform, check, enumerate, export-dot.

Exit codes: 0 success, 1 parse error / malformed input / unmet transform
precondition, 2 run halted on an inconsistent update set, 3 step budget
exhausted under ``--expect-quiescent``, 4 a requested check failed.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from typing import Optional, Sequence

from .concurrency import (
    ConcurrentProgram,
    Exhaustive,
    FormatError,
    Sampled,
    TransformError,
    check_po_run,
    delegate_transform,
    enumerate_runs,
    extract_po_run,
    flatten_static,
    run_concurrent,
    wrap_recursive_as_concurrent,
)
from .parser import ParseErrorList, parse
from .printer import pretty_print
from .runtime import (
    ConfigError,
    Trace,
    assert_postulates,
    init_run,
    make_policy,
    run_to_quiescence,
)
from .state import dumps
from .values import to_json

EXIT_OK, EXIT_INPUT, EXIT_HALTED, EXIT_BUDGET, EXIT_CHECK = 0, 1, 2, 3, 4


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_INPUT):
        super().__init__(message)
        self.code = code


def load_program(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            src = fh.read()
    except OSError as e:
        raise CliError(f"{path}: {e.strerror}") from None
    try:
        return parse(src)
    except ParseErrorList as e:
        raise CliError(e.format(path)) from None


def load_trace(path: str) -> Trace:
    try:
        return Trace.load(path)
    except (OSError, ValueError, KeyError) as e:
        raise CliError(f"{path}: malformed trace: {e}") from None


def _write(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _seed(args) -> int:
    env = os.environ.get("RECASM_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise CliError(f"RECASM_SEED must be an integer, got {env!r}") from None
    return args.seed


def cmd_run(args) -> int:
    program = load_program(args.program)
    try:
        inputs = json.loads(args.input) if args.input else {}
    except json.JSONDecodeError as e:
        raise CliError(f"--input is not valid JSON: {e}") from None
    if not isinstance(inputs, dict):
        raise CliError("--input must be a JSON object mapping input symbols to values")
    seed = _seed(args)
    try:
        policy = make_policy(args.policy)
        if args.semantics == "concurrent":
            cp = ConcurrentProgram.from_program(program)
            run, trace = run_concurrent(cp, inputs, policy, seed, args.max_steps,
                                        args.max_read_lag, args.on_inconsistency)
        else:
            if args.max_read_lag:
                raise CliError("--max-read-lag needs --semantics concurrent")
            run = init_run(program, inputs, seed, args.on_inconsistency)
            run, trace = run_to_quiescence(run, policy, args.max_steps)
    except (ConfigError, ValueError) as e:
        raise CliError(str(e)) from None
    if args.trace:
        trace.dump(args.trace)
    streams = {s: [to_json(v) for v in vs] for s, vs in sorted(run.streams.items())}
    outputs = {s: to_json(run.output(s)) for s in run.observed() if s not in streams}
    summary = {
        "format": 1,
        "status": run.status,
        "reason": run.reason,
        "steps": run.step_index,
        "agents": len(run.registry.agents),
        "outputs": outputs,
        "streams": streams,
    }
    if args.final_state:
        final = dict(summary)
        final["state"] = run.state.to_json()
        _write(args.final_state, dumps(final) + "\n")
    if args.json:
        print(dumps(summary))
    else:
        print(f"status: {run.status}" + (f" ({run.reason})" if run.reason else ""))
        print(f"steps: {run.step_index}")
        print(f"agents created: {len(run.registry.agents)}")
        for s, v in outputs.items():
            print(f"{s} = {json.dumps(v)}")
        for s, vs in streams.items():
            print(f"{s} stream: {', '.join(json.dumps(v) for v in vs)}")
    if run.status == "halted":
        return EXIT_HALTED
    if args.expect_quiescent and run.status != "quiescent":
        return EXIT_BUDGET
    return EXIT_OK


def cmd_transform(args) -> int:
    program = load_program(args.input)
    try:
        if args.kind == "wrap":
            out = wrap_recursive_as_concurrent(program).program
        elif args.kind == "delegate":
            out = delegate_transform(ConcurrentProgram.from_program(program))
        else:
            out = flatten_static(ConcurrentProgram.from_program(program))
    except (TransformError, ParseErrorList) as e:
        raise CliError(f"{args.kind}: {e}") from None
    _write(args.output, pretty_print(out))
    return EXIT_OK


def _coherence_mode(text: str):
    kind, _, rest = text.partition(":")
    try:
        if kind == "exhaustive":
            return Exhaustive(int(rest) if rest else 12)
        if kind == "sampled":
            n, _, seed = rest.partition(":")
            return Sampled(int(n) if n else 1000, int(seed) if seed else 0)
    except ValueError:
        pass
    raise CliError(f"bad --coherence mode {text!r}; use exhaustive[:LIMIT] or sampled[:N[:SEED]]")


def cmd_check(args) -> int:
    trace = load_trace(args.trace)
    want_post = args.postulates or not (args.postulates or args.po_run)
    want_po = args.po_run or not (args.postulates or args.po_run)
    report = {"format": 1}
    ok = True
    if want_post:
        rep = assert_postulates(trace)
        report["postulates"] = rep.to_json()
        ok &= rep.ok
        for v in rep.violations:
            print(f"step {v.step}: {v.kind}: {v.agent} {v.detail}", file=sys.stderr)
    if want_po:
        try:
            po = extract_po_run(trace)
        except (FormatError, KeyError, ValueError) as e:
            raise CliError(f"{args.trace}: {e}") from None
        rep = check_po_run(po, _coherence_mode(args.coherence))
        report["po_run"] = rep.to_json()
        ok &= rep.ok
        if not rep.ok:
            print(f"po-run check failed: {rep.counterexample}", file=sys.stderr)
    report["ok"] = ok
    if args.report:
        _write(args.report, dumps(report) + "\n")
    print("ok" if ok else "FAILED")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_enumerate(args) -> int:
    program = load_program(args.program)
    try:
        if program.agents:
            target = ConcurrentProgram.from_program(program)
        else:
            target = program
        rs = enumerate_runs(target, args.depth, args.max_runs)
    except (TransformError, ConfigError) as e:
        raise CliError(str(e)) from None

    def digest(c) -> str:
        return hashlib.sha256(repr(c).encode()).hexdigest()[:16]

    runs = sorted([digest(c) for c in seq] for seq in rs.runs)
    out = {
        "format": 1,
        "depth": args.depth,
        "runs": len(rs.runs),
        "complete": rs.complete,
        "terminated_branches": rs.terminated_branches,
        "sequences": runs,
    }
    if args.output:
        _write(args.output, dumps(out) + "\n")
    print(f"{len(rs.runs)} runs to depth {args.depth}"
          f"{'' if rs.complete else ' (partial: budget exceeded)'}, "
          f"{rs.terminated_branches} ended by inconsistency")
    return EXIT_OK


def cmd_export_dot(args) -> int:
    trace = load_trace(args.trace)
    try:
        po = extract_po_run(trace)
    except (FormatError, KeyError) as e:
        raise CliError(f"{args.trace}: {e}") from None
    _write(args.output, po.to_dot())
    if args.json:
        _write(args.json, dumps(po.to_json()) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="recasm", description="Run and analyse recursive ASM programs.")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="execute a program")
    r.add_argument("program")
    r.add_argument("--input", help="JSON object of main's input values")
    r.add_argument("--policy", default="synchronous",
                   choices=["synchronous", "interleaving", "random-subset"])
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--max-steps", type=int, default=1000)
    r.add_argument("--on-inconsistency", default="halt", choices=["halt", "skip"])
    r.add_argument("--semantics", default="recursive", choices=["recursive", "concurrent"])
    r.add_argument("--max-read-lag", type=int, default=0)
    r.add_argument("--trace", help="write the JSON-lines trace here")
    r.add_argument("--final-state", help="write the final state JSON here")
    r.add_argument("--expect-quiescent", action="store_true")
    r.add_argument("--json", action="store_true", help="print the summary as JSON")
    r.set_defaults(func=cmd_run)

    t = sub.add_parser("transform", help="wrap, delegate or flatten a program")
    t.add_argument("kind", choices=["wrap", "delegate", "flatten"])
    t.add_argument("input")
    t.add_argument("output", nargs="?", default="-")
    t.set_defaults(func=cmd_transform)

    c = sub.add_parser("check", help="check a trace")
    c.add_argument("trace")
    c.add_argument("--postulates", action="store_true")
    c.add_argument("--po-run", action="store_true")
    c.add_argument("--coherence", default="exhaustive:12")
    c.add_argument("--report", help="write the JSON report here")
    c.set_defaults(func=cmd_check)

    e = sub.add_parser("enumerate", help="enumerate run prefixes")
    e.add_argument("program")
    e.add_argument("--depth", type=int, default=3)
    e.add_argument("--max-runs", type=int, default=200_000)
    e.add_argument("--output")
    e.set_defaults(func=cmd_enumerate)

    d = sub.add_parser("export-dot", help="render a trace's partial order as DOT")
    d.add_argument("trace")
    d.add_argument("-o", "--output", default="-")
    d.add_argument("--json", help="also write the po-run as JSON")
    d.set_defaults(func=cmd_export_dot)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        print(str(e), file=sys.stderr)
        return e.code


if __name__ == "__main__":
    sys.exit(main())
