"""Sequential reference evaluation of a dataflow graph.

Walks the execution path one block visit at a time with a single
instance per node, building a fresh transformation for every output bag
so no state retention or discard logic is involved.  Input choice is by
construction: a non-phi input takes the producer's newest bag, a phi
takes the input tagged with the block visited immediately before the
merge.  The resulting trace is the yardstick every parallel run is
diffed against.
"""

from collections import Counter

from .cfg import EXIT_BLOCK
from .errors import BudgetExceededError, ExecutionError
from .trace import BagId, ExecutionTrace
from .transforms import ListCollector, make_transformation

ELEMENT_BUDGET = 10_000_000
PATH_BUDGET = 100_000


def run_sequential(graph, ctx, budget=ELEMENT_BUDGET, max_path=PATH_BUDGET):
    cfg = graph.cfg
    by_block = {}
    for node in graph.nodes.values():
        by_block.setdefault(node.home_block, []).append(node)
    path = [cfg.entry] + cfg.auto_append_chain(cfg.entry)
    trace = ExecutionTrace(path=path)
    latest = {}      # node id -> (BagId, element list)
    total = 0
    pos = 0
    while pos < len(path):
        pos += 1
        block = path[pos - 1]
        if block == EXIT_BLOCK:
            break
        prev = path[pos - 2] if pos >= 2 else None
        for node in by_block.get(block, ()):
            bid = BagId(node.id, pos)
            choices, elements = _compute_bag(node, ctx, latest, prev)
            trace.bags[bid] = Counter(elements)
            trace.input_choices[bid] = choices
            trace.node_order.setdefault(node.id, []).append(pos)
            latest[node.id] = (bid, elements)
            total += len(elements)
            if total > budget:
                raise BudgetExceededError(
                    f"run exceeded {budget} bag elements")
        blk = cfg.blocks[block]
        if blk.cond_var is not None:
            nxt = _decide(graph, block, latest)
            path.append(nxt)
            if nxt != EXIT_BLOCK:
                path.extend(cfg.auto_append_chain(nxt))
            if len(path) > max_path:
                raise BudgetExceededError(
                    f"execution path exceeded {max_path} blocks")
    trace.side_effects = {name: Counter(elems)
                          for name, elems in ctx.side_effects.items()}
    return trace


def _compute_bag(node, ctx, latest, prev):
    out = ListCollector()
    tr = make_transformation(node.op, ctx, node.id, 0, 1, out)
    if node.kind == "source":
        tr.open_bag()
        return [], out.elements
    if node.kind == "phi":
        picks = [i for i, b in enumerate(node.op.pred_blocks) if b == prev]
        assert len(picks) == 1, f"{node.id}: ambiguous phi predecessor {prev}"
        slot = picks[0]
        bid, elems = latest[node.inputs[slot]]
        tr.open_bag()
        tr.push_batch(elems, 0)
        tr.close_in(0)
        return [(slot, bid)], out.elements
    choices = []
    tr.open_bag()
    for slot, src in enumerate(node.inputs):
        bid, elems = latest[src]
        choices.append((slot, bid))
        tr.push_batch(elems, slot)
        tr.close_in(slot)
    return choices, out.elements


def _decide(graph, block, latest):
    blk = graph.cfg.blocks[block]
    cond_id = graph.cond_vars[block]
    _, elems = latest[cond_id]
    if len(elems) != 1 or not isinstance(elems[0], bool):
        raise ExecutionError(
            f"condition {cond_id} must hold exactly one boolean, "
            f"got {len(elems)} element(s)")
    return blk.true_succ if elems[0] else blk.false_succ
