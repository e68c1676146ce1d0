"""Desk-scale benchmark harnesses with CSV reports.

Three experiment shapes:

  * step-overhead — one long-lived job versus launching a fresh job per
    iteration step of the same loop
  * hoisting — loop-invariant build-side retention on versus off
  * pipelining — overlapped iteration steps versus a step barrier, with an
    injected per-bag delay on the diff branch

Every benchmark first checks a reduced-scale run against the sequential
reference before timing anything, and each variant is measured over at
least three runs with medians reported.
"""

from __future__ import annotations

import csv
import statistics
import tempfile
import time
from dataclasses import dataclass, field

from .datagen import gen_visit_count, gen_pagerank
from .dataflow import build_dataflow
from .oracle import run_sequential
from .pipeline import compile_source
from .programs import microbench_source, visit_count_source
from .runtime import run_parallel
from .trace import BagId, diff_traces
from .transforms import RunContext

CSV_COLUMNS = (
    "benchmark", "variant", "run", "steps", "workers", "elements", "scale",
    "delay_ms", "median_step_us", "p95_step_us", "wallclock_ms",
    "deployments", "instantiations", "ctrl_msgs", "data_msgs", "builds",
    "drop_calls", "overlap_events", "invocation",
)


@dataclass
class VariantResult:
    variant: str
    runs: list = field(default_factory=list)   # per-run stat dicts
    counters: dict = field(default_factory=dict)

    def _values(self, key):
        return [r[key] for r in self.runs if r.get(key) is not None]

    def median(self, key):
        vals = self._values(key)
        return statistics.median(vals) if vals else None

    def p95(self, key):
        vals = sorted(self._values(key))
        if not vals:
            return None
        return vals[min(len(vals) - 1, int(0.95 * (len(vals) - 1) + 0.5))]


@dataclass
class BenchReport:
    name: str
    params: dict
    invocation: str
    variants: list = field(default_factory=list)

    def variant(self, name):
        for v in self.variants:
            if v.variant == name:
                return v
        raise KeyError(name)

    def rows(self):
        out = []
        for v in self.variants:
            for i, r in enumerate(v.runs):
                row = {c: "" for c in CSV_COLUMNS}
                row.update({
                    "benchmark": self.name,
                    "variant": v.variant,
                    "run": i,
                    "invocation": self.invocation,
                })
                for k in ("steps", "workers", "elements", "scale",
                          "delay_ms"):
                    if k in self.params:
                        row[k] = self.params[k]
                for k in ("median_step_us", "p95_step_us", "wallclock_ms",
                          "overlap_events", "ctrl_msgs", "data_msgs"):
                    if r.get(k) is not None:
                        row[k] = r[k]
                for k in ("deployments", "instantiations", "builds",
                          "drop_calls"):
                    if k in v.counters:
                        row[k] = v.counters[k]
                out.append(row)
        return out

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as f:
            w = csv.DictWriter(f, fieldnames=CSV_COLUMNS)
            w.writeheader()
            for row in self.rows():
                w.writerow(row)

    def summary(self):
        lines = [f"benchmark: {self.name}"]
        for k, v in self.params.items():
            lines.append(f"  {k}: {v}")
        for v in self.variants:
            lines.append(f"  [{v.variant}]")
            med = v.median("median_step_us")
            if med is not None:
                lines.append(f"    median step latency: {med:.1f} us "
                             f"(p95 {v.p95('p95_step_us'):.1f} us)")
            wall = v.median("wallclock_ms")
            if wall is not None:
                lines.append(f"    wallclock: {wall:.1f} ms")
            ov = v.median("overlap_events")
            if ov is not None:
                lines.append(f"    overlap events: {ov:.0f}")
            for k, val in sorted(v.counters.items()):
                lines.append(f"    {k}: {val}")
        return "\n".join(lines)


def _oracle_check(graph, ctx_args, seed=0, **run_kw):
    """Reduced-scale correctness gate: parallel trace must match the oracle."""
    ref = run_sequential(graph, RunContext(**ctx_args))
    res = run_parallel(graph, RunContext(**ctx_args), seed=seed, **run_kw)
    diffs = diff_traces(ref, res.trace)
    if diffs:
        raise RuntimeError(
            "benchmark pre-check failed; parallel run diverges from the "
            "reference:\n" + "\n".join(diffs[:10]))


def _counter_total(ctx, name):
    return sum(v for (n, _k), v in ctx.counters.items() if n == name)


# ---------------------------------------------------------------------------
# step overhead

def _map_node(graph):
    for node in graph.nodes.values():
        if node.op.kind == "map" and node.parallelism > 1:
            return node
    raise AssertionError("microbenchmark graph has no parallel map")


def _source_node(graph):
    for node in graph.nodes.values():
        if node.op.kind == "source" and node.parallelism > 1:
            return node
    raise AssertionError("microbenchmark graph has no parallel source")


def _single_job_step_latencies(res, steps):
    """Per-step latency from the close stamps of the mapped bag.

    A step is done when the last map instance closes its output for that
    path position; latencies are the gaps between consecutive steps.
    """
    last_close = {}
    for pos, ns in res.stats.close_stamps:
        last_close[pos] = max(last_close.get(pos, 0), ns)
    positions = sorted(last_close)
    assert len(positions) == steps, (len(positions), steps)
    out = []
    for a, b in zip(positions, positions[1:]):
        out.append((last_close[b] - last_close[a]) / 1000.0)
    return out


def bench_step_overhead(steps=1000, elements=200, workers=4, mode=None,
                        runs=3, seed=0, setup_sleep_ms=0):
    """One long-lived loop job versus a fresh job per iteration step.

    `setup_sleep_ms` models an external scheduler's per-job launch latency
    in per-step mode; it defaults to zero and is always recorded in the
    report parameters, so a sleep never hides in the numbers.
    """
    modes = [mode] if mode else ["single-job", "per-step-jobs"]
    invocation = (f"laby bench step-overhead --steps {steps} "
                  f"--elements {elements} --workers {workers} --seed {seed} "
                  f"--setup-sleep-ms {setup_sleep_ms}")
    report = BenchReport(
        name="step-overhead",
        params={"steps": steps, "elements": elements, "workers": workers,
                "setup_sleep_ms": setup_sleep_ms},
        invocation=invocation)

    check = compile_source(microbench_source(5), workers=2)
    _source_node(check.graph).op.values[:] = list(range(6))
    _oracle_check(check.graph, {})

    values = list(range(elements))
    expected = sorted(v + steps for v in values)

    for m in modes:
        variant = VariantResult(variant=m)
        report.variants.append(variant)
        ctx = None
        for _ in range(runs):
            ctx = RunContext()
            if m == "single-job":
                prog = compile_source(microbench_source(steps),
                                      workers=workers)
                src, mnode = _source_node(prog.graph), _map_node(prog.graph)
                src.op.values[:] = values
                res = run_parallel(prog.graph, ctx, seed=seed,
                                   stamp_nodes=(mnode.id,))
                lat = _single_job_step_latencies(res, steps)
                final = trace_bag_elements(res.trace, mnode.id, 1 + steps)
                wall_ns = res.stats.wallclock_ns
                ctrl, data = res.stats.ctrl_msgs, res.stats.data_msgs
            else:
                prog = compile_source(microbench_source(1), workers=workers)
                lat = []
                ctrl = data = 0
                current = values
                t0 = time.monotonic_ns()
                for _step in range(steps):
                    if setup_sleep_ms:
                        time.sleep(setup_sleep_ms / 1000.0)
                    t1 = time.monotonic_ns()
                    # One launch: plan the step's job, deploy it, run it,
                    # and collect the result bag back to the driver.
                    graph = build_dataflow(prog.lifted, workers)
                    src, mnode = _source_node(graph), _map_node(graph)
                    src.op.values[:] = current
                    res = run_parallel(graph, ctx, seed=seed)
                    current = trace_bag_elements(res.trace, mnode.id, 2)
                    lat.append((time.monotonic_ns() - t1) / 1000.0)
                    ctrl += res.stats.ctrl_msgs
                    data += res.stats.data_msgs
                final = current
                wall_ns = time.monotonic_ns() - t0
            if sorted(final) != expected:
                raise RuntimeError(f"{m}: wrong benchmark result")
            variant.runs.append({
                "median_step_us": statistics.median(lat),
                "p95_step_us": sorted(lat)[int(0.95 * (len(lat) - 1))],
                "wallclock_ms": wall_ns / 1e6,
                "ctrl_msgs": ctrl,
                "data_msgs": data,
            })
        variant.counters = {
            "deployments": _counter_total(ctx, "deploy"),
            "instantiations": _counter_total(ctx, "instantiate"),
        }
    return report


def trace_bag_elements(trace, node_id, pos):
    """The elements of one bag of a trace, as a list."""
    return list(trace.bags[BagId(node_id, pos)].elements())


# ---------------------------------------------------------------------------
# hoisting

def _visit_count_setup(data_dir, scale, days, seed):
    gen_visit_count(data_dir, scale=scale, seed=seed, days=days,
                    ids_per_day=2000 * scale, attr_pairs=5000 * scale)


def bench_hoisting(scale=1, days=20, workers=4, runs=3, seed=0,
                   data_dir=None):
    """The visit-count miniature with build-side retention on and off."""
    invocation = (f"laby bench hoisting --scale {scale} --workers {workers} "
                  f"--seed {seed}")
    report = BenchReport(
        name="hoisting",
        params={"steps": days, "workers": workers, "scale": scale},
        invocation=invocation)
    with tempfile.TemporaryDirectory(prefix="laby-bench-") as tmp:
        data_dir = data_dir or tmp
        _visit_count_setup(data_dir, scale, days, seed)

        small = tmp + "/check"
        gen_visit_count(small, scale=1, seed=seed, days=3,
                        ids_per_day=50, attr_pairs=40)
        prog = compile_source(visit_count_source(days=3), workers=2)
        _oracle_check(prog.graph, {"data_dir": small, "write_files": False})

        prog = compile_source(visit_count_source(days=days), workers=workers)
        traces = {}
        for hoist in (True, False):
            name = "hoist-on" if hoist else "hoist-off"
            variant = VariantResult(variant=name)
            report.variants.append(variant)
            ctx = None
            for _ in range(runs):
                ctx = RunContext(data_dir=data_dir, write_files=False)
                res = run_parallel(prog.graph, ctx, seed=seed, hoist=hoist)
                traces[name] = res.trace
                variant.runs.append(
                    {"wallclock_ms": res.stats.wallclock_ns / 1e6})
            variant.counters = {
                "builds": _counter_total(ctx, "build"),
                "drop_calls": _counter_total(ctx, "dropState"),
                "deployments": _counter_total(ctx, "deploy"),
                "instantiations": _counter_total(ctx, "instantiate"),
            }
        if diff_traces(traces["hoist-on"], traces["hoist-off"]):
            raise RuntimeError("hoisting changed the results")
    return report


# ---------------------------------------------------------------------------
# pipelining

def _diff_branch_reduce(graph):
    for node in graph.nodes.values():
        if node.op.kind == "reduce":
            return node
    raise AssertionError("no reduce node in the visit-count graph")


def bench_pipelining(scale=1, days=20, delay_ms=50, workers=4, runs=3,
                     seed=0, data_dir=None):
    """Overlapped steps versus a step barrier, with a delayed diff branch."""
    invocation = (f"laby bench pipelining --scale {scale} "
                  f"--delay-ms {delay_ms} --workers {workers} --seed {seed}")
    report = BenchReport(
        name="pipelining",
        params={"steps": days, "workers": workers, "scale": scale,
                "delay_ms": delay_ms},
        invocation=invocation)
    with tempfile.TemporaryDirectory(prefix="laby-bench-") as tmp:
        data_dir = data_dir or tmp
        _visit_count_setup(data_dir, scale, days, seed)

        small = tmp + "/check"
        gen_visit_count(small, scale=1, seed=seed, days=3,
                        ids_per_day=50, attr_pairs=40)
        prog = compile_source(visit_count_source(days=3), workers=2)
        _oracle_check(prog.graph, {"data_dir": small, "write_files": False})

        prog = compile_source(visit_count_source(days=days), workers=workers)
        delays = {_diff_branch_reduce(prog.graph).id: delay_ms}
        traces = {}
        for barrier in (False, True):
            name = "barrier-off" if not barrier else "barrier-on"
            variant = VariantResult(variant=name)
            report.variants.append(variant)
            for _ in range(runs):
                ctx = RunContext(data_dir=data_dir, write_files=False)
                res = run_parallel(prog.graph, ctx, seed=seed,
                                   barrier=barrier, node_delays_ms=delays)
                traces[name] = res.trace
                variant.runs.append({
                    "wallclock_ms": res.stats.wallclock_ns / 1e6,
                    "overlap_events": res.stats.overlap_events,
                })
        if diff_traces(traces["barrier-off"], traces["barrier-on"]):
            raise RuntimeError("barrier changed the results")
    return report
