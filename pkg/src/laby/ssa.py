"""Static single assignment form over the structured CFG.

Every assignment target gets a fresh version (`name_N`, N counted from 1
in source order).  Merge points receive phi assignments under two rules:

- if-join: a phi for every variable whose reaching definition differs
  between the two incoming paths.  Input order is [then, else]; when the
  `if` has no else branch the second input comes from the guard block.
- loop head: a phi for every variable that is defined before the loop
  and assigned somewhere in the loop body.  Input order is [initial,
  back edge].

Each phi input is tagged with the block id of the predecessor it flows
in from.  No dead-code elimination and no simplification happen here:
copies, unused definitions and single-source phis are all preserved.
"""

from dataclasses import dataclass, field

from . import syntax as S
from .cfg import EXIT_BLOCK
from .errors import LabyError


@dataclass
class Phi:
    """Merge of reaching definitions; inputs are (pred_block, var_id)."""

    inputs: list


@dataclass
class SsaAssignment:
    target: str          # versioned variable id, e.g. "day_2"
    rhs: object          # expression over versioned ids, or Phi
    type: object         # declared type of the target
    block: int
    pos: tuple = (0, 0)


@dataclass
class SsaBlock:
    block_id: int
    assigns: list = field(default_factory=list)   # phis first, then statements
    cond_var: str = None                          # versioned id, if branching
    true_succ: int = None
    false_succ: int = None
    succ: int = None

    def successors(self):
        if self.cond_var is not None:
            return [self.true_succ, self.false_succ]
        if self.succ is not None:
            return [self.succ]
        return []

    def phis(self):
        return [a for a in self.assigns if isinstance(a.rhs, Phi)]


@dataclass
class SsaProgram:
    blocks: dict                 # block_id -> SsaBlock, insertion ordered
    entry: int
    cfg: object                  # underlying ControlFlowGraph (same block ids)
    var_types: dict              # var id -> declared type
    base_name: dict              # var id -> source-level name
    filename: str = "<input>"

    def assignments(self):
        for blk in self.blocks.values():
            yield from blk.assigns

    def def_block(self):
        return {a.target: a.block for a in self.assignments()}

    def cond_vars(self):
        return {b.block_id: b.cond_var for b in self.blocks.values()
                if b.cond_var is not None}

    def assign_of(self, var_id):
        for a in self.assignments():
            if a.target == var_id:
                return a
        raise KeyError(var_id)


class _Renamer:
    def __init__(self, typed, cfg):
        self.typed = typed
        self.cfg = cfg
        self.versions = {}       # base name -> last version used
        self.var_types = {}
        self.base_name = {}
        self.blocks = {}
        self.env_out = {}        # block id -> {base name -> var id}
        # Names assigned per block, in source terms (pre-rename).
        self.assigned = {
            bid: [st.name for st in blk.stmts]
            for bid, blk in cfg.blocks.items()
        }

    def run(self):
        pending = []             # (phi, base name, backedge pred) to patch
        for bid, blk in self.cfg.blocks.items():
            sblk = SsaBlock(block_id=bid, true_succ=blk.true_succ,
                            false_succ=blk.false_succ, succ=blk.succ)
            self.blocks[bid] = sblk
            env = self._entry_env(blk, sblk, pending)
            for st in blk.stmts:
                rhs = self._rename_expr(st.expr, env)
                target = self._define(st.name, env)
                sblk.assigns.append(SsaAssignment(
                    target=target, rhs=rhs,
                    type=self.typed.var_types[st.name],
                    block=bid, pos=st.pos))
            if blk.cond_var is not None:
                sblk.cond_var = env[blk.cond_var]
            self.env_out[bid] = env
        for phi, name, tail in pending:
            phi.inputs[1] = (tail, self.env_out[tail][name])
        return SsaProgram(blocks=self.blocks, entry=self.cfg.entry,
                          cfg=self.cfg, var_types=self.var_types,
                          base_name=self.base_name,
                          filename=self.typed.filename)

    def _entry_env(self, blk, sblk, pending):
        info = blk.merge_info
        if info is None:
            preds = self.cfg.predecessors(blk.block_id)
            if not preds:
                return {}
            (p,) = preds
            return dict(self.env_out[p])
        kind, first, second = info
        if kind == "loop_head":
            env = dict(self.env_out[first])
            body = self._loop_assigned(blk.block_id, second)
            for name in list(env):
                if name not in body:
                    continue
                init_id = env[name]
                phi = Phi(inputs=[(first, init_id), None])
                target = self._define(name, env)
                sblk.assigns.append(SsaAssignment(
                    target=target, rhs=phi,
                    type=self.typed.var_types[name],
                    block=blk.block_id))
                pending.append((phi, name, second))
            return env
        # if_join: first = end of then branch, second = end of else branch
        # (or the guard itself when there is no else).
        env_then = self.env_out[first]
        env_else = self.env_out[second]
        env = {}
        for name, then_id in env_then.items():
            if name not in env_else:
                continue
            else_id = env_else[name]
            if then_id == else_id:
                env[name] = then_id
                continue
            phi = Phi(inputs=[(first, then_id), (second, else_id)])
            target = self._define(name, env)
            sblk.assigns.append(SsaAssignment(
                target=target, rhs=phi,
                type=self.typed.var_types[name],
                block=blk.block_id))
        return env

    def _loop_assigned(self, head, tail):
        names = set()
        for bid in range(head, tail + 1):
            names.update(self.assigned.get(bid, ()))
        return names

    def _define(self, name, env):
        ver = self.versions.get(name, 0) + 1
        self.versions[name] = ver
        var_id = f"{name}_{ver}"
        env[name] = var_id
        self.var_types[var_id] = self.typed.var_types[name]
        self.base_name[var_id] = name
        return var_id

    def _rename_expr(self, e, env):
        if isinstance(e, S.VarRef):
            return S.VarRef(name=env[e.name], pos=e.pos)
        if isinstance(e, (S.IntLit, S.BoolLit, S.StrLit, S.Lambda,
                          S.CombinerLit, S.TypeLit)):
            return e
        if isinstance(e, S.BinOp):
            return S.BinOp(op=e.op, left=self._rename_expr(e.left, env),
                           right=self._rename_expr(e.right, env), pos=e.pos)
        if isinstance(e, S.TupleExpr):
            return S.TupleExpr(items=tuple(self._rename_expr(i, env)
                                           for i in e.items), pos=e.pos)
        if isinstance(e, S.MethodCall):
            return S.MethodCall(recv=self._rename_expr(e.recv, env),
                                method=e.method,
                                args=[self._rename_expr(a, env)
                                      for a in e.args], pos=e.pos)
        if isinstance(e, S.BuiltinCall):
            return S.BuiltinCall(name=e.name,
                                 args=[self._rename_expr(a, env)
                                       for a in e.args], pos=e.pos)
        raise AssertionError(f"unexpected expression in SSA rename: {e!r}")


def to_ssa(typed, cfg):
    """Rename a normalized program over its CFG into SSA form."""
    return _Renamer(typed, cfg).run()


def _rhs_vars(rhs):
    if isinstance(rhs, Phi):
        return [v for _, v in rhs.inputs]
    out = []

    def walk(e):
        if isinstance(e, S.VarRef):
            out.append(e.name)
        elif isinstance(e, S.BinOp):
            walk(e.left)
            walk(e.right)
        elif isinstance(e, S.TupleExpr):
            for i in e.items:
                walk(i)
        elif isinstance(e, S.MethodCall):
            walk(e.recv)
            for a in e.args:
                walk(a)
        elif isinstance(e, S.BuiltinCall):
            for a in e.args:
                walk(a)

    walk(rhs)
    return out


def check_ssa(ssa):
    """Verify single assignment and that definitions dominate uses.

    Phi inputs are checked against the tagged predecessor block instead
    of the phi's own block.  Raises LabyError on violation.
    """
    defs = {}
    for a in ssa.assignments():
        if a.target in defs:
            raise LabyError(f"variable {a.target} assigned twice")
        defs[a.target] = a.block
    dom = ssa.cfg.dominators()

    def dominates(d, b):
        return d in dom.get(b, set())

    for blk in ssa.blocks.values():
        for a in blk.assigns:
            if isinstance(a.rhs, Phi):
                for pred, var in a.rhs.inputs:
                    if var not in defs:
                        raise LabyError(f"phi input {var} undefined")
                    if not dominates(defs[var], pred):
                        raise LabyError(
                            f"phi input {var} does not reach {a.target} "
                            f"via block {pred}")
                continue
            for var in _rhs_vars(a.rhs):
                if var not in defs:
                    raise LabyError(f"use of undefined variable {var}")
                d = defs[var]
                same = d == blk.block_id
                before = False
                if same:
                    names = [x.target for x in blk.assigns]
                    before = names.index(var) < names.index(a.target)
                if not ((same and before) or (not same and dominates(d, blk.block_id))):
                    raise LabyError(
                        f"definition of {var} does not dominate its use "
                        f"in {a.target}")
        if blk.cond_var is not None and blk.cond_var not in defs:
            raise LabyError(f"branch variable {blk.cond_var} undefined")


def _fmt_rhs(rhs):
    if isinstance(rhs, Phi):
        parts = ", ".join(f"{b}: {v}" for b, v in rhs.inputs)
        return f"phi({parts})"
    return S.pretty_expr(rhs)


def dump_ssa(ssa):
    """Stable text rendering: one block per section, one assignment per line."""
    lines = []
    for blk in ssa.blocks.values():
        lines.append(f"block {blk.block_id}:")
        for a in blk.assigns:
            lines.append(f"  {a.target} = {_fmt_rhs(a.rhs)}")
        if blk.cond_var is not None:
            t = "exit" if blk.true_succ == EXIT_BLOCK else blk.true_succ
            f = "exit" if blk.false_succ == EXIT_BLOCK else blk.false_succ
            lines.append(f"  branch {blk.cond_var} ? {t} : {f}")
        elif blk.succ is not None and blk.succ != EXIT_BLOCK:
            lines.append(f"  goto {blk.succ}")
        else:
            lines.append("  end")
    return "\n".join(lines) + "\n"
