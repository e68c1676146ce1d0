"""Bundled example programs and parameterized program builders.

The `.laby` sources under `golden/` are fixed test subjects; the builder
functions produce the same shapes with adjustable sizes (loop bounds,
element counts) for benchmarks and scaled-down correctness runs.
"""

from __future__ import annotations

import importlib.resources

GOLDEN_NAMES = (
    "reassign",
    "branch_merge",
    "visit_count",
    "loop_join",
    "loop_branch",
    "pagerank",
)


def golden_source(name):
    """Return the text of a bundled `.laby` program."""
    if name not in GOLDEN_NAMES:
        raise KeyError(f"unknown golden program {name!r}")
    ref = importlib.resources.files(__package__) / "golden" / f"{name}.laby"
    return ref.read_text(encoding="utf-8")


def visit_count_source(days=365):
    """The page-visit anomaly program over `days` daily log files."""
    return (
        "// Page-visit anomaly report: loop over a year of daily logs, count visits\n"
        "// per page of one page type, and from day 2 on write the total absolute\n"
        "// change against the previous day.\n"
        'pageAttributes = readFile("pageAttributes", (int, int))\n'
        "yesterdayCnts = emptyBag((int, int))\n"
        "day = 1\n"
        "do {\n"
        '  fileName = "pageVisitLog" + day\n'
        "  visits = readFile(fileName, int)\n"
        "  joinedWithAttrs = visits.join(pageAttributes)\n"
        "  visits2 = joinedWithAttrs.filter(p => p.1 == 7)\n"
        "  visitsMapped = visits2.map(x => (x.0, 1))\n"
        "  counts = visitsMapped.reduceByKey(_ + _)\n"
        "  if (day != 1) {\n"
        "    joinedYesterday = counts.join(yesterdayCnts)\n"
        "    diffs = joinedYesterday.map(p => abs(p.1 - p.2))\n"
        "    summed = diffs.reduce(_ + _)\n"
        '    outFileName = "diff" + day\n'
        "    summed.writeFile(outFileName)\n"
        "  }\n"
        "  yesterdayCnts = counts\n"
        "  day = day + 1\n"
        f"}} while (day <= {days})\n"
    )


def pagerank_source(days=3, steps=10):
    """Daily PageRank: `days` outer steps, `steps` damped updates each."""
    return (
        "// Daily PageRank over page-transition logs: an outer loop per day and an\n"
        "// inner fixed-point loop of ten damped update steps.  Ranks use a 10^15\n"
        "// fixed-point scale so all arithmetic stays in integers; with 50 pages the\n"
        "// initial rank is 10^15/50 and the teleport term is 0.15 * 10^15/50.\n"
        "day = 1\n"
        "do {\n"
        '  fileName = "transitions" + day\n'
        "  edges = readFile(fileName, (int, int))\n"
        "  outdeg = edges.map(e => (e.0, 1)).reduceByKey(_ + _)\n"
        "  ranks = outdeg.map(d => (d.0, 20000000000000))\n"
        "  i = 0\n"
        "  do {\n"
        "    i = i + 1\n"
        "    withDeg = ranks.join(outdeg)\n"
        "    shares = withDeg.map(t => (t.0, t.1 * 17 / 20 / t.2))\n"
        "    contribs = edges.join(shares)\n"
        "    moved = contribs.map(t => (t.1, t.2))\n"
        "    summed = moved.reduceByKey(_ + _)\n"
        "    ranks = summed.map(s => (s.0, s.1 + 3000000000000))\n"
        f"  }} while (i < {steps})\n"
        '  outName = "ranks" + day\n'
        "  ranks.writeFile(outName)\n"
        "  day = day + 1\n"
        f"}} while (day <= {days})\n"
    )


def microbench_source(steps=1000):
    """The step-overhead microbenchmark: a do-while that increments a
    counter and maps the working bag through x + 1 each step.

    The initial bag is a placeholder singleton; benchmark harnesses replace
    the source node's values with the real input elements.
    """
    return (
        "bag = singletonBag(0)\n"
        "i = 0\n"
        "do {\n"
        "  bag = bag.map(x => x + 1)\n"
        "  i = i + 1\n"
        f"}} while (i < {steps})\n"
    )
