"""The `laby` command line tool.

Subcommands: compile (diagnostics, SSA dump, DOT export), run (sequential
or parallel, with trace and event-log output), diff (compare two trace
files), bench (the three experiment harnesses), and gen (synthetic inputs).
"""

from __future__ import annotations

import argparse
import sys

from . import bench as bench_mod
from .datagen import GENERATORS, gen_inputs
from .errors import LabyError
from .oracle import run_sequential
from .pipeline import compile_source
from .runtime import RandomDelay, run_parallel
from .ssa import dump_ssa
from .dataflow import export_dot
from .trace import diff_traces, parse_trace, serialize_trace
from .transforms import RunContext


def _read_program(path):
    try:
        with open(path, "r", encoding="utf-8") as f:
            return f.read()
    except OSError as e:
        raise LabyError(f"cannot read {path}: {e.strerror}")


def _compile(args):
    prog = compile_source(_read_program(args.file), workers=args.workers,
                          filename=args.file)
    if args.dump_ssa:
        sys.stdout.write(dump_ssa(prog.ssa))
    if args.dot:
        with open(args.dot, "w", encoding="utf-8") as f:
            f.write(export_dot(prog.graph))
    if not args.dump_ssa:
        g = prog.graph
        print(f"{args.file}: {len(prog.cfg.blocks)} blocks, "
              f"{len(g.nodes)} nodes, {len(g.edges)} edges")
    return 0


def _parse_delays(specs):
    delays = {}
    for spec in specs or ():
        fields = dict(part.split("=", 1) for part in spec.split(","))
        try:
            delays[fields["node"]] = int(fields["ms"])
        except KeyError:
            raise LabyError(f"--delay wants node=<id>,ms=<int>, got {spec!r}")
    return delays


def _run(args):
    prog = compile_source(_read_program(args.file), workers=args.workers,
                          filename=args.file)
    ctx = RunContext(data_dir=args.data_dir, write_files=not args.no_write)
    delays = _parse_delays(args.delay)
    if args.mode == "sequential":
        if delays or args.barrier or args.no_hoist or args.no_discard:
            raise LabyError("runtime flags apply to --mode parallel only")
        trace = run_sequential(prog.graph, ctx)
        stats = None
    else:
        plan = RandomDelay(args.delay_seed) if args.delay_seed is not None \
            else None
        res = run_parallel(prog.graph, ctx, seed=args.seed,
                           barrier=args.barrier, hoist=not args.no_hoist,
                           discard=not args.no_discard, delay_plan=plan,
                           node_delays_ms=delays,
                           record_events=bool(args.events))
        trace, stats = res.trace, res.stats
    text = serialize_trace(trace)
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    if args.events:
        if stats is None:
            raise LabyError("--events applies to --mode parallel only")
        with open(args.events, "w", encoding="utf-8") as f:
            f.write("wallclock-ns,instance,event-kind,path-len\n")
            for ns, label, kind, pos in stats.events:
                f.write(f"{ns},{label},{kind},{pos}\n")
    if stats is not None:
        print(f"path length {len(trace.path)}, "
              f"{stats.instances} instances, {stats.decisions} decisions, "
              f"{stats.ctrl_msgs} control msgs, {stats.data_msgs} data msgs, "
              f"{stats.wallclock_ns / 1e6:.1f} ms", file=sys.stderr)
    return 0


def _diff(args):
    a = parse_trace(_read_program(args.a), where=args.a)
    b = parse_trace(_read_program(args.b), where=args.b)
    diffs = diff_traces(a, b)
    if not diffs:
        print("traces identical")
        return 0
    for d in diffs:
        print(d)
    return 1


def _bench(args):
    if args.benchmark == "step-overhead":
        report = bench_mod.bench_step_overhead(
            steps=args.steps or 1000, elements=args.elements,
            workers=args.workers, mode=args.mode, runs=args.runs,
            seed=args.seed, setup_sleep_ms=args.setup_sleep_ms)
    elif args.benchmark == "hoisting":
        report = bench_mod.bench_hoisting(
            scale=args.scale, days=args.steps or 20, workers=args.workers,
            runs=args.runs, seed=args.seed)
    else:
        report = bench_mod.bench_pipelining(
            scale=args.scale, days=args.steps or 20, delay_ms=args.delay_ms,
            workers=args.workers, runs=args.runs, seed=args.seed)
    print(report.summary())
    if args.csv:
        report.write_csv(args.csv)
        print(f"wrote {args.csv}")
    return 0


def _gen(args):
    paths = gen_inputs(args.program, args.out, scale=args.scale,
                       seed=args.seed)
    print(f"wrote {len(paths)} files under {args.out}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(
        prog="laby",
        description="Compile and run imperative dataflow programs.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compile", help="compile a program and report shape")
    c.add_argument("file")
    c.add_argument("--workers", type=int, default=4)
    c.add_argument("--dump-ssa", action="store_true",
                   help="print the SSA form and nothing else")
    c.add_argument("--dot", metavar="OUT",
                   help="write the dataflow graph in DOT format")
    c.set_defaults(func=_compile)

    r = sub.add_parser("run", help="execute a program")
    r.add_argument("file")
    r.add_argument("--mode", choices=("sequential", "parallel"),
                   default="parallel")
    r.add_argument("--workers", type=int, default=4)
    r.add_argument("--seed", type=int, default=0,
                   help="scheduler interleaving seed")
    r.add_argument("--barrier", action="store_true",
                   help="wait for each path position to finish before "
                        "starting the next")
    r.add_argument("--no-hoist", action="store_true",
                   help="drop retained operator state before every bag")
    r.add_argument("--no-discard", action="store_true",
                   help="keep all buffered partitions until the run ends")
    r.add_argument("--delay", action="append", metavar="node=ID,ms=D",
                   help="defer each output of a node by D ms (repeatable)")
    r.add_argument("--delay-seed", type=int, default=None,
                   help="randomly delay message delivery (adversarial)")
    r.add_argument("--data-dir", default=".")
    r.add_argument("--no-write", action="store_true",
                   help="record writeFile output in the trace only")
    r.add_argument("--trace", metavar="OUT",
                   help="write the trace here instead of stdout")
    r.add_argument("--events", metavar="OUT",
                   help="write the event log CSV here")
    r.set_defaults(func=_run)

    d = sub.add_parser("diff", help="compare two trace files")
    d.add_argument("a")
    d.add_argument("b")
    d.set_defaults(func=_diff)

    b = sub.add_parser("bench", help="run a benchmark harness")
    b.add_argument("benchmark",
                   choices=("step-overhead", "hoisting", "pipelining"))
    b.add_argument("--steps", type=int, default=None)
    b.add_argument("--elements", type=int, default=200)
    b.add_argument("--workers", type=int, default=4)
    b.add_argument("--scale", type=int, default=1)
    b.add_argument("--delay-ms", type=int, default=50)
    b.add_argument("--mode", choices=("single-job", "per-step-jobs"),
                   default=None)
    b.add_argument("--runs", type=int, default=3)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--setup-sleep-ms", type=int, default=0,
                   help="model an external per-job scheduling latency")
    b.add_argument("--csv", metavar="OUT")
    b.set_defaults(func=_bench)

    g = sub.add_parser("gen", help="generate synthetic inputs")
    g.add_argument("program", choices=sorted(GENERATORS))
    g.add_argument("--scale", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default=".")
    g.set_defaults(func=_gen)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except LabyError as e:
        print(f"laby: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
