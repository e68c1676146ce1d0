"""Control-flow graph over normalized statements.

Blocks partition the normalized assignment statements; every block ends in
one of three ways: a two-way branch on a condition variable, an unconditional
fall-through, or the end of the program. Loop exits that leave the program
branch to the EXIT_BLOCK pseudo-block (id 0), which holds no statements.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import syntax as S

EXIT_BLOCK = 0


@dataclass
class BasicBlock:
    block_id: int
    stmts: list = field(default_factory=list)
    # Terminator: exactly one of the three shapes below.
    cond_var: str = None          # branch variable name, if two-way branch
    true_succ: int = None
    false_succ: int = None
    succ: int = None              # unconditional fall-through
    # Merge metadata for SSA: ("if_join", then_end, else_or_guard) or
    # ("loop_head", init_pred, backedge_tail).
    merge_info: tuple = None

    def successors(self):
        if self.cond_var is not None:
            return [self.true_succ, self.false_succ]
        if self.succ is not None:
            return [self.succ]
        return []


@dataclass
class ControlFlowGraph:
    blocks: dict = field(default_factory=dict)   # id -> BasicBlock, insertion ordered
    entry: int = 1

    @property
    def edges(self):
        out = []
        for b in self.blocks.values():
            for s in b.successors():
                out.append((b.block_id, s))
        return out

    def successors(self, block_id):
        if block_id == EXIT_BLOCK:
            return []
        return self.blocks[block_id].successors()

    def predecessors(self, block_id):
        return [src for (src, dst) in self.edges if dst == block_id]

    def auto_append_chain(self, block_id):
        """Blocks implicitly appended after block_id: follow single-successor
        fall-throughs until a branch block, a terminal block, or EXIT."""
        chain = []
        cur = block_id
        while cur != EXIT_BLOCK:
            blk = self.blocks[cur]
            if blk.succ is None:
                break
            chain.append(blk.succ)
            cur = blk.succ
        return chain

    def dominators(self):
        """Iterative dominator sets over reachable blocks (entry included)."""
        ids = [b for b in self.blocks if self._reachable(b)]
        dom = {b: set(ids) for b in ids}
        dom[self.entry] = {self.entry}
        preds = {b: [p for p in self.predecessors(b) if p in dom] for b in ids}
        changed = True
        while changed:
            changed = False
            for b in ids:
                if b == self.entry:
                    continue
                ps = [dom[p] for p in preds[b]]
                new = set.intersection(*ps) | {b} if ps else {b}
                if new != dom[b]:
                    dom[b] = new
                    changed = True
        return dom

    def _reachable(self, block_id):
        seen = {self.entry}
        work = [self.entry]
        while work:
            cur = work.pop()
            if cur == block_id:
                return True
            for s in self.successors(cur):
                if s != EXIT_BLOCK and s not in seen:
                    seen.add(s)
                    work.append(s)
        return block_id == self.entry


def can_reach_before(cfg, start, target, avoid):
    """True if some CFG walk from `start` (exclusive) reaches `target` without
    visiting `avoid` first. Hitting the target counts even when target == avoid."""
    seen = set()
    work = list(cfg.successors(start)) if start != EXIT_BLOCK else []
    while work:
        cur = work.pop()
        if cur == target:
            return True
        if cur == avoid or cur == EXIT_BLOCK or cur in seen:
            continue
        seen.add(cur)
        work.extend(cfg.successors(cur))
    return False


class _Builder:
    def __init__(self):
        self.cfg = ControlFlowGraph()
        self.next_id = 0

    def new_block(self):
        self.next_id += 1
        blk = BasicBlock(block_id=self.next_id)
        self.cfg.blocks[blk.block_id] = blk
        return blk

    def build(self, stmts):
        cur = self.new_block()
        cur = self._emit(stmts, cur)
        self._prune_terminal(cur)
        return self.cfg

    def _emit(self, stmts, cur):
        for s in stmts:
            if isinstance(s, S.Assign):
                cur.stmts.append(s)
            elif isinstance(s, S.If):
                guard = cur
                guard.cond_var = s.cond.name
                then0 = self.new_block()
                guard.true_succ = then0.block_id
                then_end = self._emit(s.then, then0)
                if s.orelse:
                    else0 = self.new_block()
                    guard.false_succ = else0.block_id
                    else_end = self._emit(s.orelse, else0)
                else:
                    else_end = None
                join = self.new_block()
                guard_false_to_join = else_end is None
                if guard_false_to_join:
                    guard.false_succ = join.block_id
                    join.merge_info = ("if_join", then_end.block_id, guard.block_id)
                else:
                    else_end.succ = join.block_id
                    join.merge_info = ("if_join", then_end.block_id, else_end.block_id)
                then_end.succ = join.block_id
                cur = join
            elif isinstance(s, S.DoWhile):
                head = self.new_block()
                init = cur
                cur.succ = head.block_id
                tail = self._emit(s.body, head)
                tail.cond_var = s.cond.name
                tail.true_succ = head.block_id
                head.merge_info = ("loop_head", init.block_id, tail.block_id)
                join = self.new_block()
                tail.false_succ = join.block_id
                cur = join
            else:
                raise AssertionError(f"unnormalized statement reached CFG builder: {s!r}")
        return cur

    def _prune_terminal(self, cur):
        # The trailing block is terminal; if it carries no statements, drop it
        # and retarget its incoming edges at the exit pseudo-block.
        if cur.stmts or len(self.cfg.blocks) == 1:
            return
        bid = cur.block_id
        del self.cfg.blocks[bid]
        for blk in self.cfg.blocks.values():
            # Falling through into the removed block just ends the program;
            # a branch into it becomes an explicit edge to the exit block.
            if blk.succ == bid:
                blk.succ = None
            if blk.true_succ == bid:
                blk.true_succ = EXIT_BLOCK
            if blk.false_succ == bid:
                blk.false_succ = EXIT_BLOCK


def build_cfg(typed):
    """Build the CFG of a normalized TypedProgram."""
    return _Builder().build(typed.program.stmts)
