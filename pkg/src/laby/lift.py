"""Lowering of scalar variables onto bag operators.

After this pass every variable denotes a bag.  Scalar variables become
singleton bags:

- a constant right-hand side becomes a `source` holding one element;
- a unary operation on a variable becomes a `map` over its singleton;
- a binary operation of two variables becomes a `cross` of the two
  singletons followed by a `map` that applies the operation;
- a binary operation with an int or bool literal folds the literal into
  the `map` function;
- a string literal operand is materialized as its own source node and
  combined through `cross`, since file names are built this way and the
  name feed must be a real input edge.

File names used by readFile/writeFile are input edges: literal names
are materialized as singleton sources.  `emptyBag` becomes a source
with no elements.  Copies become identity maps; nothing is folded away.
"""

from dataclasses import dataclass, field

from . import syntax as S
from .ssa import Phi


@dataclass
class LiftedOp:
    kind: str                 # source | phi | map | filter | join | cross |
                              # reduceByKey | reduce | readFile | writeFile
    inputs: list = field(default_factory=list)   # producer var ids, slot order
    udf: object = None        # S.Lambda for map/filter
    combine_op: str = None    # combiner operator for reduce/reduceByKey
    elem_type: object = None  # element type of the produced bag
    values: list = None       # source only: the concrete elements
    pred_blocks: list = None  # phi only: predecessor block per input
    # join/cross: true when the physical build side (slot 0) is the second
    # source-order input; emit layout stays in source order either way.
    swap: bool = False


@dataclass
class LiftedProgram:
    ops: dict                 # var id -> LiftedOp, in block/statement order
    block_of: dict            # var id -> home block
    cond_vars: dict           # block id -> condition var id
    was_scalar: dict          # var id -> bool (scalar before lifting)
    cfg: object
    base_name: dict
    filename: str = "<input>"

    @property
    def order(self):
        return list(self.ops)

    def condition_ids(self):
        return set(self.cond_vars.values())


def elem_of(t):
    return t.element if isinstance(t, S.BagType) else t


def _lam(body):
    return S.Lambda(param="p", body=body)


_IDENTITY = _lam(S.VarRef(name="p"))


class _Lifter:
    def __init__(self, ssa):
        self.ssa = ssa
        self.ops = {}
        self.block_of = {}
        self.was_scalar = {}
        self.base_name = dict(ssa.base_name)
        self.n_const = 0
        self.n_tmp = 0
        self.block = None

    def run(self):
        for blk in self.ssa.blocks.values():
            self.block = blk.block_id
            for a in blk.assigns:
                self._assign(a)
        return LiftedProgram(ops=self.ops, block_of=self.block_of,
                             cond_vars=self.ssa.cond_vars(),
                             was_scalar=self.was_scalar,
                             cfg=self.ssa.cfg, base_name=self.base_name,
                             filename=self.ssa.filename)

    def _emit(self, var_id, op, scalar):
        self.ops[var_id] = op
        self.block_of[var_id] = self.block
        self.was_scalar[var_id] = scalar
        self.base_name.setdefault(var_id, var_id)
        return var_id

    def _const(self, value, etype):
        self.n_const += 1
        return self._emit(f"c{self.n_const}",
                          LiftedOp("source", values=[value], elem_type=etype),
                          scalar=True)

    def _tmp(self, op, scalar):
        self.n_tmp += 1
        return self._emit(f"x{self.n_tmp}", op, scalar)

    def _assign(self, a):
        t = self.ssa.var_types[a.target]
        scalar = not isinstance(t, S.BagType)
        etype = elem_of(t)
        rhs = a.rhs
        if isinstance(rhs, Phi):
            op = LiftedOp("phi", inputs=[v for _, v in rhs.inputs],
                          pred_blocks=[b for b, _ in rhs.inputs],
                          elem_type=etype)
            self._emit(a.target, op, scalar)
        elif isinstance(rhs, S.VarRef):
            self._emit(a.target, LiftedOp("map", inputs=[rhs.name],
                                          udf=_IDENTITY, elem_type=etype),
                       scalar)
        elif isinstance(rhs, (S.IntLit, S.BoolLit, S.StrLit)):
            self._emit(a.target, LiftedOp("source", values=[rhs.value],
                                          elem_type=etype), scalar)
        elif isinstance(rhs, S.BinOp):
            self._scalar_expr(a.target, rhs, etype)
        elif isinstance(rhs, S.BuiltinCall):
            self._builtin(a.target, rhs, etype, scalar)
        elif isinstance(rhs, S.MethodCall):
            self._method(a.target, rhs, etype, scalar)
        else:
            raise AssertionError(f"cannot lift rhs {rhs!r}")

    def _builtin(self, target, rhs, etype, scalar):
        if rhs.name == "abs":
            self._scalar_expr(target, rhs, etype)
        elif rhs.name == "readFile":
            name_id = self._atom_input(rhs.args[0])
            self._emit(target, LiftedOp("readFile", inputs=[name_id],
                                        elem_type=etype), scalar)
        elif rhs.name == "emptyBag":
            self._emit(target, LiftedOp("source", values=[],
                                        elem_type=etype), scalar)
        elif rhs.name == "singletonBag":
            val = _literal_value(rhs.args[0])
            if val is not _NOT_LITERAL:
                self._emit(target, LiftedOp("source", values=[val],
                                            elem_type=etype), scalar)
            else:
                self._scalar_expr(target, rhs.args[0], etype)
        else:
            raise AssertionError(f"cannot lift builtin {rhs.name}")

    def _method(self, target, rhs, etype, scalar):
        m = rhs.method
        recv = rhs.recv.name
        if m in ("map", "filter"):
            op = LiftedOp(m, inputs=[recv], udf=rhs.args[0], elem_type=etype)
        elif m in ("join", "cross"):
            op = LiftedOp(m, inputs=[recv, rhs.args[0].name], elem_type=etype)
        elif m == "reduceByKey":
            op = LiftedOp(m, inputs=[recv], combine_op=rhs.args[0].op,
                          elem_type=etype)
        elif m == "reduce":
            op = LiftedOp(m, inputs=[recv], combine_op=rhs.args[0].op,
                          elem_type=etype)
        elif m == "writeFile":
            name_id = self._atom_input(rhs.args[0])
            op = LiftedOp("writeFile", inputs=[name_id, recv],
                          elem_type=etype)
        else:
            raise AssertionError(f"cannot lift method {m}")
        self._emit(target, op, scalar)

    def _atom_input(self, atom):
        """Turn an atomic argument into a producer id, materializing literals."""
        if isinstance(atom, S.VarRef):
            return atom.name
        if isinstance(atom, S.IntLit):
            return self._const(atom.value, S.INT)
        if isinstance(atom, S.BoolLit):
            return self._const(atom.value, S.BOOL)
        if isinstance(atom, S.StrLit):
            return self._const(atom.value, S.STRING)
        raise AssertionError(f"not an atom: {atom!r}")

    def _scalar_expr(self, target, expr, etype):
        """Lift a scalar expression over variable and literal atoms.

        Int and bool literals fold into the map function; string
        literals are materialized first.  With one variable atom the
        result is a map over it; with several, the singletons are
        crossed pairwise and the map reads tuple fields.
        """
        atoms = _atoms_of(expr)
        slots = []                 # (atom, var_id or None)
        for at in atoms:
            if isinstance(at, S.VarRef):
                slots.append((at, at.name))
            elif isinstance(at, S.StrLit):
                slots.append((at, self._const(at.value, S.STRING)))
            else:
                slots.append((at, None))
        vars_ = [(at, vid) for at, vid in slots if vid is not None]
        if not vars_:
            at0 = atoms[0]
            const_t = {S.IntLit: S.INT, S.BoolLit: S.BOOL}.get(type(at0), S.STRING)
            vid = self._const(at0.value, const_t)
            vars_ = [(at0, vid)]
        if len(vars_) == 1:
            src = vars_[0][1]
            ref = {id(vars_[0][0]): S.VarRef(name="p")}
        else:
            from .typecheck import _cross_element
            src = vars_[0][1]
            for _, vid in vars_[1:]:
                cross_t = _cross_element(self.ops[src].elem_type,
                                         self.ops[vid].elem_type)
                src = self._tmp(LiftedOp("cross", inputs=[src, vid],
                                         elem_type=cross_t), scalar=True)
            ref = {id(at): S.FieldAccess(base=S.VarRef(name="p"), index=k)
                   for k, (at, _) in enumerate(vars_)}
        body = _rewrite(expr, ref)
        self._emit(target, LiftedOp("map", inputs=[src], udf=_lam(body),
                                    elem_type=etype), scalar=True)


_NOT_LITERAL = object()


def _literal_value(expr):
    if isinstance(expr, (S.IntLit, S.BoolLit, S.StrLit)):
        return expr.value
    if isinstance(expr, S.TupleExpr):
        vals = [_literal_value(i) for i in expr.items]
        if _NOT_LITERAL in vals:
            return _NOT_LITERAL
        return tuple(vals)
    return _NOT_LITERAL


def _atoms_of(expr):
    out = []

    def walk(e):
        if isinstance(e, (S.VarRef, S.IntLit, S.BoolLit, S.StrLit)):
            out.append(e)
        elif isinstance(e, S.BinOp):
            walk(e.left)
            walk(e.right)
        elif isinstance(e, S.TupleExpr):
            for i in e.items:
                walk(i)
        elif isinstance(e, S.BuiltinCall) and e.name == "abs":
            walk(e.args[0])
        else:
            raise AssertionError(f"unexpected atom in scalar expression: {e!r}")

    walk(expr)
    return out


def _rewrite(expr, ref):
    """Rebuild expr substituting variable atoms per the ref table."""
    if id(expr) in ref:
        return ref[id(expr)]
    if isinstance(expr, (S.IntLit, S.BoolLit, S.StrLit)):
        return expr
    if isinstance(expr, S.VarRef):
        return ref[id(expr)]
    if isinstance(expr, S.BinOp):
        return S.BinOp(op=expr.op, left=_rewrite(expr.left, ref),
                       right=_rewrite(expr.right, ref))
    if isinstance(expr, S.TupleExpr):
        return S.TupleExpr(items=tuple(_rewrite(i, ref) for i in expr.items))
    if isinstance(expr, S.BuiltinCall) and expr.name == "abs":
        return S.BuiltinCall(name="abs", args=[_rewrite(expr.args[0], ref)])
    raise AssertionError(f"cannot rewrite {expr!r}")


def lift(ssa):
    """Lift an SSA program so that every definition produces a bag."""
    return _Lifter(ssa).run()


def _fmt_val(v):
    if isinstance(v, tuple):
        return "(" + ", ".join(_fmt_val(x) for x in v) + ")"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return '"' + v + '"'
    return str(v)


def _fmt_op(op):
    if op.kind == "source":
        vals = ", ".join(_fmt_val(v) for v in op.values)
        return "source {" + vals + "}"
    if op.kind == "phi":
        parts = ", ".join(f"{b}: {v}" for b, v in
                          zip(op.pred_blocks, op.inputs))
        return f"phi({parts})"
    if op.kind in ("map", "filter"):
        return (f"{op.kind}({op.inputs[0]}, "
                f"{op.udf.param} => {S.pretty_expr(op.udf.body)})")
    if op.kind in ("join", "cross"):
        return f"{op.kind}({op.inputs[0]}, {op.inputs[1]})"
    if op.kind in ("reduceByKey", "reduce"):
        return f"{op.kind}({op.inputs[0]}, _ {op.combine_op} _)"
    if op.kind == "readFile":
        return f"readFile({op.inputs[0]}) : {S.pretty_type(op.elem_type)}"
    if op.kind == "writeFile":
        return f"writeFile(name={op.inputs[0]}, data={op.inputs[1]})"
    raise AssertionError(op.kind)


def dump_lifted(lp):
    """Stable text rendering of the lifted program, grouped by block."""
    from .cfg import EXIT_BLOCK
    by_block = {}
    for vid, blk in lp.block_of.items():
        by_block.setdefault(blk, []).append(vid)
    lines = []
    for bid, blk in lp.cfg.blocks.items():
        lines.append(f"block {bid}:")
        for vid in by_block.get(bid, []):
            mark = " (scalar)" if lp.was_scalar[vid] else ""
            lines.append(f"  {vid} = {_fmt_op(lp.ops[vid])}{mark}")
        cond = lp.cond_vars.get(bid)
        if cond is not None:
            t = "exit" if blk.true_succ == EXIT_BLOCK else blk.true_succ
            f = "exit" if blk.false_succ == EXIT_BLOCK else blk.false_succ
            lines.append(f"  branch {cond} ? {t} : {f}")
        elif blk.succ is not None and blk.succ != EXIT_BLOCK:
            lines.append(f"  goto {blk.succ}")
        else:
            lines.append("  end")
    return "\n".join(lines) + "\n"
