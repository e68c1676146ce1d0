"""Deterministic synthetic input generators.

All generators are pure functions of (scale, seed, sizes): the same
arguments produce byte-identical files.  Sizes are harness parameters
chosen so that scale 1 is comfortable on a laptop.
"""

from __future__ import annotations

import os

from .files import render_element
from .seeding import derive_rng

VISIT_DAYS = 100
VISIT_IDS_PER_DAY = 10_000
VISIT_ATTR_PAIRS = 50_000
PAGERANK_DAYS = 3
PAGERANK_PAGES = 50
PAGERANK_EDGES_PER_DAY = 200


def _write_dataset(out_dir, name, elements):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8") as f:
        for v in elements:
            f.write(render_element(v))
            f.write("\n")
    return path


def gen_visit_count(out_dir, scale=1, seed=0, days=VISIT_DAYS,
                    ids_per_day=None, attr_pairs=None):
    """Daily page-visit logs plus a page-attribute table.

    Page IDs range over [0, attr_pairs); every page has exactly one
    (id, type) attribute row with type in [0, 10), so the type == 7
    filter keeps roughly a tenth of the joined visits.
    """
    if ids_per_day is None:
        ids_per_day = VISIT_IDS_PER_DAY * scale
    if attr_pairs is None:
        attr_pairs = VISIT_ATTR_PAIRS * scale
    rng = derive_rng("visit-count", scale, seed, days,
                     ids_per_day, attr_pairs)
    paths = [_write_dataset(
        out_dir, "pageAttributes",
        ((page, rng.randrange(10)) for page in range(attr_pairs)))]
    for day in range(1, days + 1):
        paths.append(_write_dataset(
            out_dir, f"pageVisitLog{day}",
            (rng.randrange(attr_pairs) for _ in range(ids_per_day))))
    return paths


def gen_pagerank(out_dir, scale=1, seed=0, days=PAGERANK_DAYS,
                 pages=PAGERANK_PAGES, edges_per_day=None):
    """Daily page-transition files of (from, to) pairs.

    Each day starts from a random permutation cycle over all pages, which
    guarantees every page at least one outgoing and one incoming edge, then
    adds random extra transitions up to the requested count.
    """
    if edges_per_day is None:
        edges_per_day = PAGERANK_EDGES_PER_DAY * scale
    if edges_per_day < pages:
        raise ValueError("need at least one edge per page")
    rng = derive_rng("pagerank", scale, seed, days, pages,
                     edges_per_day)
    paths = []
    for day in range(1, days + 1):
        perm = list(range(pages))
        rng.shuffle(perm)
        edges = [(perm[i], perm[(i + 1) % pages]) for i in range(pages)]
        while len(edges) < edges_per_day:
            edges.append((rng.randrange(pages), rng.randrange(pages)))
        rng.shuffle(edges)
        paths.append(_write_dataset(out_dir, f"transitions{day}", edges))
    return paths


GENERATORS = {
    "visit-count": gen_visit_count,
    "pagerank": gen_pagerank,
}


def gen_inputs(program, out_dir, scale=1, seed=0, **sizes):
    """Generate the input files for a named benchmark program."""
    try:
        gen = GENERATORS[program]
    except KeyError:
        raise KeyError(
            f"unknown input set {program!r}; "
            f"choose from {', '.join(sorted(GENERATORS))}")
    return gen(out_dir, scale=scale, seed=seed, **sizes)
