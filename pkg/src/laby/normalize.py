"""Three-address normalization.

After normalization:
  * every right-hand side is a literal, a variable copy, or a single
    operator/call whose arguments are variable references or literals
    (lambdas, combiners and type literals ride along unchanged)
  * `while` loops are desugared into a guarded do-while:
        while (e) B   =>   ifCond = e; if (ifCond) { do { B; exitCond = e' } while (exitCond) }
  * every loop/if condition is a single variable reference
  * writeFile statements become assignments to a fresh, never-read variable
    so that every statement is an assignment, an if, or a do-while
"""

from __future__ import annotations

import copy

from . import syntax as S
from .typecheck import TypedProgram, all_identifiers

_ATOMS = (S.IntLit, S.BoolLit, S.StrLit, S.VarRef)


class Normalizer:
    def __init__(self, typed):
        self.var_types = typed.var_types
        self.used = set(all_identifiers(typed.program)) | set(typed.var_types)
        self.counters = {}

    def fresh(self, prefix):
        """A new identifier; the first ifCond/exitCond keep their bare names."""
        n = self.counters.get(prefix, 0)
        while True:
            n += 1
            if prefix in ("ifCond", "exitCond"):
                name = prefix if n == 1 else f"{prefix}{n}"
            else:
                name = f"{prefix}{n}"
            if name not in self.used:
                self.counters[prefix] = n
                self.used.add(name)
                return name

    def _temp_assign(self, out, expr, prefix="t"):
        name = self.fresh(prefix)
        self.var_types[name] = expr.type
        out.append(S.Assign(name=name, expr=expr, pos=expr.pos))
        ref = S.VarRef(name=name, pos=expr.pos)
        ref.type = expr.type
        return ref

    # -- expressions -----------------------------------------------------

    def atom(self, e, out):
        """Flatten to a variable reference or literal, emitting temps into out."""
        if isinstance(e, _ATOMS):
            return e
        rhs = self.rhs(e, out)
        return self._temp_assign(out, rhs)

    def rhs(self, e, out):
        """Flatten to an allowed right-hand side (single op, atomic args)."""
        if isinstance(e, _ATOMS):
            return e
        if isinstance(e, S.BinOp):
            e.left = self.atom(e.left, out)
            e.right = self.atom(e.right, out)
            return e
        if isinstance(e, S.MethodCall):
            e.recv = self.atom(e.recv, out)
            e.args = [self.arg(a, out) for a in e.args]
            return e
        if isinstance(e, S.BuiltinCall):
            e.args = [self.arg(a, out) for a in e.args]
            return e
        if isinstance(e, S.TupleExpr):
            # Only reachable as a singletonBag argument.
            e.items = [self.atom(i, out) for i in e.items]
            return e
        raise AssertionError(f"unexpected expression in normalization: {e!r}")

    def arg(self, a, out):
        if isinstance(a, (S.Lambda, S.CombinerLit, S.TypeLit)):
            return a
        if isinstance(a, S.TupleExpr):
            a.items = [self.atom(i, out) for i in a.items]
            return a
        return self.atom(a, out)

    def cond_var(self, e, out, prefix):
        """Conditions become single variable references."""
        if isinstance(e, S.VarRef):
            return e
        rhs = self.rhs(e, out)
        return self._temp_assign(out, rhs, prefix=prefix)

    # -- statements --------------------------------------------------------

    def stmts(self, stmts):
        out = []
        for s in stmts:
            self.stmt(s, out)
        return out

    def stmt(self, s, out):
        if isinstance(s, S.Assign):
            rhs = self.rhs(s.expr, out)
            out.append(S.Assign(name=s.name, expr=rhs, pos=s.pos))
            return
        if isinstance(s, S.ExprStmt):
            # Only writeFile reaches here (typechecked); give the sink a name.
            rhs = self.rhs(s.expr, out)
            name = self.fresh("w")
            self.var_types[name] = rhs.recv.type
            out.append(S.Assign(name=name, expr=rhs, pos=s.pos))
            return
        if isinstance(s, S.If):
            cond = self.cond_var(s.cond, out, "ifCond")
            out.append(S.If(cond=cond, then=self.stmts(s.then),
                            orelse=self.stmts(s.orelse), pos=s.pos))
            return
        if isinstance(s, S.DoWhile):
            body = self.stmts(s.body)
            cond = self.cond_var(s.cond, body, "exitCond")
            out.append(S.DoWhile(body=body, cond=cond, pos=s.pos))
            return
        if isinstance(s, S.While):
            # Loop inversion; the condition expression is evaluated twice.
            cond_copy = copy.deepcopy(s.cond)
            guard = self.cond_var(s.cond, out, "ifCond")
            body = self.stmts(s.body)
            exit_cond = self.cond_var(cond_copy, body, "exitCond")
            loop = S.DoWhile(body=body, cond=exit_cond, pos=s.pos)
            out.append(S.If(cond=guard, then=[loop], orelse=[], pos=s.pos))
            return
        raise AssertionError(f"unknown statement {s!r}")


def normalize(typed):
    """Normalize a TypedProgram in place; returns a new TypedProgram."""
    norm = Normalizer(typed)
    stmts = norm.stmts(typed.program.stmts)
    return TypedProgram(program=S.Program(stmts=stmts),
                        var_types=typed.var_types, filename=typed.filename)
