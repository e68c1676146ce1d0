"""Construction of the cyclic logical dataflow graph.

One node per lifted variable, one edge per variable reference.  An edge
is conditional when the producer and consumer live in different basic
blocks, or when it is the back-edge input of a loop-head phi — exactly
the edges on which a produced bag may legitimately never be sent.

Binary operators buffer slot 0 (the build side).  When exactly one
input is loop-invariant with respect to the consumer's block — the CFG
has a cycle through the consumer that avoids the producer — that input
becomes the build side so its state can be retained across iteration
steps; otherwise slots follow source order.

Partitioning: join and reduceByKey inputs hash by key; cross and
writeFile broadcast their slot-0 side; readFile broadcasts the name to
every reader; parallelism-1 consumers (conditions, lifted scalars,
reduce) receive broadcasts; everything else forwards partitions.
"""

from dataclasses import dataclass, field

from .cfg import EXIT_BLOCK, can_reach_before

FORWARD = "forward"
BROADCAST = "broadcast"
HASH = "hash"


@dataclass
class LogicalNode:
    id: str
    kind: str
    home_block: int
    parallelism: int
    is_condition: bool
    op: object                    # lifted operator payload (udf, values, swap)
    inputs: list                  # producer ids in physical slot order


@dataclass
class LogicalEdge:
    index: int
    src: str
    dst: str
    dst_slot: int
    conditional: bool = False
    partitioning: str = FORWARD
    src_home: int = 0
    dst_home: int = 0
    # Blocks of the sibling inputs when dst is a phi: reaching one of
    # them first withholds the bag (the other input will be chosen).
    other_homes: tuple = ()
    phi_input: int = None         # input index on a phi dst, else None


class DataflowGraph:
    def __init__(self, lifted, workers):
        self.lifted = lifted
        self.cfg = lifted.cfg
        self.workers = workers
        self.nodes = {}
        self.edges = []
        self.in_edges = {}            # node id -> [edge], slot order
        self.out_edges = {}           # node id -> [edge]
        self.cond_vars = dict(lifted.cond_vars)
        self.entry_inputs = []
        self.side_effects = []
        self._keep = {}

    @property
    def order(self):
        return list(self.nodes)

    def nodes_in_block(self, block):
        return [n for n in self.nodes.values() if n.home_block == block]

    def keep(self, w, b1, b2):
        """May a bag made at b1 still be chosen by b2 when the path tail is w?

        True iff some CFG walk from w reaches b2 before touching b1
        again; the consumer's own block keeps its inputs.
        """
        key = (w, b1, b2)
        if key not in self._keep:
            self._keep[key] = (w == b2) or can_reach_before(self.cfg, w, b2, b1)
        return self._keep[key]

    def invariant(self, b1, b2):
        """Is a producer at b1 loop-invariant for a consumer at b2?"""
        return b1 != b2 and can_reach_before(self.cfg, b2, b2, b1)


def build_dataflow(lifted, workers):
    g = DataflowGraph(lifted, workers)
    cond_ids = lifted.condition_ids()
    for vid, op in lifted.ops.items():
        home = lifted.block_of[vid]
        # A full-bag fold must see every element, so it runs single-instance;
        # its inputs reach instance 0 through the broadcast partitioning rule.
        p = 1 if lifted.was_scalar[vid] or op.kind == "reduce" else workers
        node = LogicalNode(id=vid, kind=op.kind, home_block=home,
                           parallelism=p, is_condition=vid in cond_ids,
                           op=op, inputs=list(op.inputs))
        g.nodes[vid] = node
        if op.kind == "readFile":
            g.entry_inputs.append(vid)
        elif op.kind == "writeFile":
            g.side_effects.append(vid)
    _choose_build_sides(g)
    _build_edges(g)
    _mark_conditional(g)
    _assign_partitioning(g)
    _validate(g)
    return g


def _choose_build_sides(g):
    for node in g.nodes.values():
        if node.kind not in ("join", "cross"):
            continue
        b2 = node.home_block
        homes = [g.lifted.block_of[i] for i in node.inputs]
        inv = [g.invariant(b1, b2) for b1 in homes]
        if inv[1] and not inv[0]:
            node.inputs = [node.inputs[1], node.inputs[0]]
            node.op.swap = True


def _build_edges(g):
    for node in g.nodes.values():
        for slot, src in enumerate(node.inputs):
            e = LogicalEdge(index=len(g.edges), src=src, dst=node.id,
                            dst_slot=slot,
                            src_home=g.nodes[src].home_block,
                            dst_home=node.home_block)
            if node.kind == "phi":
                e.phi_input = slot
                e.other_homes = tuple(g.nodes[other].home_block
                                      for k, other in enumerate(node.inputs)
                                      if k != slot)
            g.edges.append(e)
            g.in_edges.setdefault(node.id, []).append(e)
            g.out_edges.setdefault(src, []).append(e)


def _is_loop_head(g, block):
    blk = g.cfg.blocks.get(block)
    return blk is not None and blk.merge_info is not None \
        and blk.merge_info[0] == "loop_head"


def _mark_conditional(g):
    for e in g.edges:
        if e.src_home != e.dst_home:
            e.conditional = True
        elif e.phi_input == 1 and _is_loop_head(g, e.dst_home):
            # Back-edge input produced later in the same loop body.
            e.conditional = True


def _assign_partitioning(g):
    for e in g.edges:
        dst = g.nodes[e.dst]
        if dst.kind in ("join", "reduceByKey"):
            e.partitioning = HASH
        elif dst.kind in ("cross", "writeFile"):
            e.partitioning = BROADCAST if e.dst_slot == 0 else FORWARD
        elif dst.kind == "readFile":
            e.partitioning = BROADCAST
        elif dst.parallelism == 1:
            e.partitioning = BROADCAST
        else:
            e.partitioning = FORWARD


def _validate(g):
    # Cycles must pass through a loop-head phi back edge.
    back = {e.index for e in g.edges
            if e.phi_input == 1 and _is_loop_head(g, e.dst_home)}
    indeg = {nid: 0 for nid in g.nodes}
    for e in g.edges:
        if e.index not in back:
            indeg[e.dst] += 1
    queue = [nid for nid, d in indeg.items() if d == 0]
    seen = 0
    while queue:
        nid = queue.pop()
        seen += 1
        for e in g.out_edges.get(nid, ()):
            if e.index in back:
                continue
            indeg[e.dst] -= 1
            if indeg[e.dst] == 0:
                queue.append(e.dst)
    if seen != len(g.nodes):
        raise AssertionError("dataflow contains a cycle outside phi back edges")
    by_block = {}
    for block, vid in g.cond_vars.items():
        by_block.setdefault(block, []).append(vid)
    for block, vids in by_block.items():
        if len(vids) > 1:
            raise AssertionError(f"block {block} has several condition nodes")


_PALETTE = ["blue", "red", "darkgreen", "purple", "orange", "brown",
            "cadetblue", "magenta"]


def _edge_color(g, e, cond_colors):
    src_block = g.cfg.blocks.get(e.src_home)
    if src_block is not None and src_block.cond_var is not None:
        cond = g.cond_vars.get(e.src_home)
        if cond in cond_colors:
            return cond_colors[cond]
    return "gray40"


def export_dot(g):
    """Graphviz rendering: blocks as clusters, conditional edges dashed
    and colored by the condition that governs the source block."""
    cond_colors = {}
    for block in sorted(g.cond_vars):
        cond_colors[g.cond_vars[block]] = \
            _PALETTE[len(cond_colors) % len(_PALETTE)]
    lines = ["digraph dataflow {", "  rankdir=TB;",
             '  node [fontname="Helvetica"];']
    by_block = {}
    for nid, node in g.nodes.items():
        by_block.setdefault(node.home_block, []).append(node)
    for block in sorted(by_block):
        lines.append(f"  subgraph cluster_block_{block} {{")
        lines.append(f'    label="block {block}"; style=dotted;')
        for node in by_block[block]:
            attrs = []
            if node.kind == "phi":
                attrs.append("shape=invhouse")
                attrs.append("style=filled")
                attrs.append("fillcolor=gray85")
            elif node.is_condition:
                attrs.append("shape=octagon")
                if node.id in cond_colors:
                    attrs.append(f"color={cond_colors[node.id]}")
            else:
                attrs.append("shape=box")
            if node.parallelism > 1:
                attrs.append("penwidth=2.5")
            label = f"{node.id}\\n{node.kind} p={node.parallelism}"
            attrs.append(f'label="{label}"')
            lines.append(f'    "{node.id}" [{", ".join(attrs)}];')
        lines.append("  }")
    for e in g.edges:
        attrs = []
        if g.nodes[e.dst].kind in ("join", "cross", "phi", "writeFile"):
            attrs.append(f'label="s{e.dst_slot}"')
        if e.conditional:
            attrs.append("style=dashed")
            attrs.append(f"color={_edge_color(g, e, cond_colors)}")
        suffix = f' [{", ".join(attrs)}]' if attrs else ""
        lines.append(f'  "{e.src}" -> "{e.dst}"{suffix};')
    lines.append("}")
    return "\n".join(lines) + "\n"
