"""Type checker: annotates the AST and enforces the DSL's typing discipline.

Checks performed:
  * every expression gets a type; variables keep one type for the whole program
  * use before assignment on any control path is rejected
  * bag nesting is rejected (bag elements are scalars or flat tuples of scalars)
  * loop and if conditions must be scalar bool
  * lambdas are closed over their single parameter (no captures, no bag ops)
  * tuple values exist only as bag elements (inside lambdas and singletonBag)
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import LabyTypeError
from . import syntax as S
from .syntax import INT, BOOL, STRING, BagType, ScalarType, TupleType


@dataclass
class TypedProgram:
    """An AST whose expression nodes carry types, plus the variable type table."""

    program: S.Program
    var_types: dict = field(default_factory=dict)
    filename: str = "<input>"


def _key_type(elem):
    return elem.items[0] if isinstance(elem, TupleType) else elem


def _value_widths(elem):
    return len(elem.items) - 1 if isinstance(elem, TupleType) else 0


def _concat_elements(key, left_elem, right_elem):
    """Element type of a join output: key, then left values, then right values."""
    comps = [key]
    for e in (left_elem, right_elem):
        if isinstance(e, TupleType):
            comps.extend(e.items[1:])
    if len(comps) == 1:
        return comps[0]
    return TupleType(items=tuple(comps))


def _cross_element(left_elem, right_elem):
    comps = []
    for e in (left_elem, right_elem):
        comps.extend(e.items if isinstance(e, TupleType) else (e,))
    return TupleType(items=tuple(comps))


class TypeChecker:
    def __init__(self, filename="<input>"):
        self.filename = filename
        self.var_types = {}

    def _fail(self, msg, node):
        line, col = node.pos
        raise LabyTypeError(msg, line, col, self.filename)

    # -- statements ------------------------------------------------------

    def check_program(self, program):
        self._check_stmts(program.stmts, set())
        return TypedProgram(program=program, var_types=self.var_types, filename=self.filename)

    def _check_stmts(self, stmts, defined):
        d = set(defined)
        for stmt in stmts:
            d = self._check_stmt(stmt, d)
        return d

    def _check_stmt(self, stmt, defined):
        if isinstance(stmt, S.Assign):
            t = self._expr(stmt.expr, defined)
            if t is None:
                self._fail("writeFile has no value; use it as a statement", stmt)
            if isinstance(t, TupleType):
                self._fail("variables hold scalars or bags, not bare tuples", stmt)
            prev = self.var_types.get(stmt.name)
            if prev is not None and prev != t:
                self._fail(
                    f"variable '{stmt.name}' was {prev!r} and is reassigned as {t!r}", stmt)
            self.var_types[stmt.name] = t
            return defined | {stmt.name}
        if isinstance(stmt, S.ExprStmt):
            t = self._expr(stmt.expr, defined)
            if t is not None:
                self._fail("expression statement has an unused value; assign it", stmt)
            return defined
        if isinstance(stmt, S.If):
            self._condition(stmt.cond, defined)
            d_then = self._check_stmts(stmt.then, defined)
            d_else = self._check_stmts(stmt.orelse, defined)
            return d_then & d_else
        if isinstance(stmt, S.While):
            self._condition(stmt.cond, defined)
            self._check_stmts(stmt.body, defined)
            return defined
        if isinstance(stmt, S.DoWhile):
            d_body = self._check_stmts(stmt.body, defined)
            self._condition(stmt.cond, d_body)
            return d_body
        raise AssertionError(f"unknown statement {stmt!r}")

    def _condition(self, expr, defined):
        t = self._expr(expr, defined)
        if t != BOOL:
            self._fail(f"condition must be bool, found {t!r}", expr)

    # -- expressions -----------------------------------------------------

    def _expr(self, e, defined):
        t = self._infer(e, defined)
        e.type = t
        return t

    def _infer(self, e, defined):
        if isinstance(e, S.IntLit):
            return INT
        if isinstance(e, S.BoolLit):
            return BOOL
        if isinstance(e, S.StrLit):
            return STRING
        if isinstance(e, S.VarRef):
            if e.name not in self.var_types:
                self._fail(f"variable '{e.name}' is not defined", e)
            if e.name not in defined:
                self._fail(f"variable '{e.name}' may be used before assignment here", e)
            return self.var_types[e.name]
        if isinstance(e, S.BinOp):
            lt = self._expr(e.left, defined)
            rt = self._expr(e.right, defined)
            return self._binop_type(e, lt, rt)
        if isinstance(e, S.TupleExpr):
            comps = []
            for item in e.items:
                t = self._expr(item, defined)
                if not isinstance(t, ScalarType):
                    self._fail("tuple components must be scalars", item)
                comps.append(t)
            return TupleType(items=tuple(comps))
        if isinstance(e, S.FieldAccess):
            bt = self._expr(e.base, defined)
            if not isinstance(bt, TupleType):
                self._fail(f"tuple index on non-tuple value of type {bt!r}", e)
            if not 0 <= e.index < len(bt.items):
                self._fail(f"tuple index .{e.index} out of range for {bt!r}", e)
            return bt.items[e.index]
        if isinstance(e, (S.Lambda, S.CombinerLit)):
            self._fail("lambdas may appear only as operator arguments", e)
        if isinstance(e, S.MethodCall):
            return self._method(e, defined)
        if isinstance(e, S.BuiltinCall):
            return self._builtin(e, defined)
        if isinstance(e, S.TypeLit):
            self._fail("type literal is not a value", e)
        raise AssertionError(f"unknown expression {e!r}")

    def _binop_type(self, e, lt, rt):
        if isinstance(lt, BagType) or isinstance(rt, BagType):
            self._fail(f"operator '{e.op}' does not apply to bags", e)
        if isinstance(lt, TupleType) or isinstance(rt, TupleType):
            self._fail(f"operator '{e.op}' does not apply to tuples", e)
        if e.op == "+":
            if (lt, rt) == (INT, INT):
                return INT
            if lt == STRING and rt in (STRING, INT):
                return STRING
            self._fail(f"'+' does not apply to {lt!r} and {rt!r}", e)
        if e.op in ("-", "*", "/", "%"):
            if (lt, rt) == (INT, INT):
                return INT
            self._fail(f"'{e.op}' needs int operands, found {lt!r} and {rt!r}", e)
        if e.op in ("<", "<=", ">", ">="):
            if (lt, rt) == (INT, INT):
                return BOOL
            self._fail(f"'{e.op}' needs int operands, found {lt!r} and {rt!r}", e)
        if e.op in ("==", "!="):
            if lt == rt:
                return BOOL
            self._fail(f"'{e.op}' needs matching scalar types, found {lt!r} and {rt!r}", e)
        raise AssertionError(f"unknown operator {e.op}")

    # -- lambdas and combiners --------------------------------------------

    def _lambda_result(self, lam, param_type):
        lam.type = None
        return self._lambda_body(lam.body, lam.param, param_type)

    def _lambda_body(self, e, param, param_type):
        if isinstance(e, S.VarRef):
            if e.name != param:
                self._fail(
                    f"lambda may reference only its parameter '{param}', found '{e.name}'", e)
            e.type = param_type
            return param_type
        if isinstance(e, S.IntLit):
            e.type = INT
            return INT
        if isinstance(e, S.BoolLit):
            e.type = BOOL
            return BOOL
        if isinstance(e, S.StrLit):
            e.type = STRING
            return STRING
        if isinstance(e, S.BinOp):
            lt = self._lambda_body(e.left, param, param_type)
            rt = self._lambda_body(e.right, param, param_type)
            t = self._binop_type(e, lt, rt)
            e.type = t
            return t
        if isinstance(e, S.TupleExpr):
            comps = []
            for item in e.items:
                t = self._lambda_body(item, param, param_type)
                if not isinstance(t, ScalarType):
                    self._fail("tuple components must be scalars", item)
                comps.append(t)
            t = TupleType(items=tuple(comps))
            e.type = t
            return t
        if isinstance(e, S.FieldAccess):
            bt = self._lambda_body(e.base, param, param_type)
            if not isinstance(bt, TupleType):
                self._fail(f"tuple index on non-tuple value of type {bt!r}", e)
            if not 0 <= e.index < len(bt.items):
                self._fail(f"tuple index .{e.index} out of range for {bt!r}", e)
            e.type = bt.items[e.index]
            return e.type
        if isinstance(e, S.BuiltinCall) and e.name == "abs":
            if len(e.args) != 1:
                self._fail("abs takes one argument", e)
            at = self._lambda_body(e.args[0], param, param_type)
            if at != INT:
                self._fail(f"abs needs an int, found {at!r}", e)
            e.type = INT
            return INT
        self._fail("lambda bodies allow only arithmetic, comparison and tuple expressions", e)

    def _combiner_check(self, comb, value_type):
        if comb.op in ("-", "*", "/", "%") and value_type != INT:
            self._fail(f"combiner '_ {comb.op} _' needs int values, found {value_type!r}", comb)
        if comb.op == "+" and value_type not in (INT, STRING):
            self._fail(f"combiner '_ + _' needs int or string values, found {value_type!r}", comb)
        comb.type = None

    # -- operators ---------------------------------------------------------

    def _bag_recv(self, call, defined):
        rt = self._expr(call.recv, defined)
        if not isinstance(rt, BagType):
            self._fail(f".{call.method}() needs a bag receiver, found {rt!r}", call)
        return rt

    def _method(self, call, defined):
        m = call.method
        if m in ("map", "filter"):
            rt = self._bag_recv(call, defined)
            if len(call.args) != 1 or not isinstance(call.args[0], S.Lambda):
                self._fail(f".{m}() takes a single lambda argument", call)
            out = self._lambda_result(call.args[0], rt.element)
            if m == "filter":
                if out != BOOL:
                    self._fail(f"filter lambda must return bool, found {out!r}", call)
                return rt
            if not S.is_flat_element(out):
                self._fail(f"map lambda must return a scalar or flat tuple, found {out!r}", call)
            return BagType(element=out)
        if m in ("join", "cross"):
            rt = self._bag_recv(call, defined)
            if len(call.args) != 1:
                self._fail(f".{m}() takes one bag argument", call)
            at = self._expr(call.args[0], defined)
            if not isinstance(at, BagType):
                self._fail(f".{m}() argument must be a bag, found {at!r}", call)
            if m == "cross":
                elem = _cross_element(rt.element, at.element)
                if not S.is_flat_element(elem):
                    self._fail("cross output element is not flat", call)
                return BagType(element=elem)
            lk, rk = _key_type(rt.element), _key_type(at.element)
            if lk != rk:
                self._fail(f"join keys differ: {lk!r} vs {rk!r}", call)
            return BagType(element=_concat_elements(lk, rt.element, at.element))
        if m == "reduceByKey":
            rt = self._bag_recv(call, defined)
            elem = rt.element
            if not (isinstance(elem, TupleType) and len(elem.items) == 2):
                self._fail(
                    f"reduceByKey needs (key, value) pair elements, found {elem!r}", call)
            if len(call.args) != 1 or not isinstance(call.args[0], S.CombinerLit):
                self._fail("reduceByKey takes a combiner like _ + _", call)
            self._combiner_check(call.args[0], elem.items[1])
            return rt
        if m == "reduce":
            rt = self._bag_recv(call, defined)
            if not isinstance(rt.element, ScalarType):
                self._fail(f"reduce needs scalar elements, found {rt.element!r}", call)
            if len(call.args) != 1 or not isinstance(call.args[0], S.CombinerLit):
                self._fail("reduce takes a combiner like _ + _", call)
            self._combiner_check(call.args[0], rt.element)
            return BagType(element=rt.element)
        if m == "writeFile":
            self._bag_recv(call, defined)
            if len(call.args) != 1:
                self._fail("writeFile takes the file name", call)
            nt = self._expr(call.args[0], defined)
            if nt != STRING:
                self._fail(f"writeFile name must be a string, found {nt!r}", call)
            return None  # statement-only
        raise AssertionError(f"unknown method {m}")

    def _builtin(self, call, defined):
        name = call.name
        if name == "abs":
            if len(call.args) != 1:
                self._fail("abs takes one argument", call)
            at = self._expr(call.args[0], defined)
            if at != INT:
                self._fail(f"abs needs an int, found {at!r}", call)
            return INT
        if name == "readFile":
            if not call.args:
                self._fail("readFile needs a file name", call)
            nt = self._expr(call.args[0], defined)
            if nt != STRING:
                self._fail(f"readFile name must be a string, found {nt!r}", call)
            elem = INT
            if len(call.args) == 2:
                if not isinstance(call.args[1], S.TypeLit):
                    self._fail("readFile second argument must be a type", call)
                elem = call.args[1].value
            elif len(call.args) > 2:
                self._fail("readFile takes a name and an optional element type", call)
            return BagType(element=elem)
        if name == "singletonBag":
            if len(call.args) != 1:
                self._fail("singletonBag takes one value", call)
            at = self._expr(call.args[0], defined)
            if isinstance(at, BagType):
                self._fail("bags cannot nest: singletonBag of a bag", call)
            if not S.is_flat_element(at):
                self._fail(f"singletonBag element must be flat, found {at!r}", call)
            return BagType(element=at)
        if name == "emptyBag":
            if len(call.args) != 1 or not isinstance(call.args[0], S.TypeLit):
                self._fail("emptyBag takes an element type", call)
            return BagType(element=call.args[0].value)
        raise AssertionError(f"unknown builtin {name}")


def typecheck(program, filename="<input>"):
    """Check and annotate a parsed program; returns a TypedProgram."""
    return TypeChecker(filename).check_program(program)


def all_identifiers(program):
    """Every identifier appearing in the program (vars and lambda params)."""
    names = set()

    def walk_expr(e):
        if isinstance(e, S.VarRef):
            names.add(e.name)
        elif isinstance(e, S.BinOp):
            walk_expr(e.left)
            walk_expr(e.right)
        elif isinstance(e, S.TupleExpr):
            for i in e.items:
                walk_expr(i)
        elif isinstance(e, S.FieldAccess):
            walk_expr(e.base)
        elif isinstance(e, S.Lambda):
            names.add(e.param)
            walk_expr(e.body)
        elif isinstance(e, S.MethodCall):
            walk_expr(e.recv)
            for a in e.args:
                walk_expr(a)
        elif isinstance(e, S.BuiltinCall):
            for a in e.args:
                walk_expr(a)

    def walk(stmts):
        for s in stmts:
            if isinstance(s, S.Assign):
                names.add(s.name)
                walk_expr(s.expr)
            elif isinstance(s, S.ExprStmt):
                walk_expr(s.expr)
            elif isinstance(s, S.If):
                walk_expr(s.cond)
                walk(s.then)
                walk(s.orelse)
            elif isinstance(s, S.While):
                walk_expr(s.cond)
                walk(s.body)
            elif isinstance(s, S.DoWhile):
                walk(s.body)
                walk_expr(s.cond)

    walk(program.stmts)
    return names
