"""AST node types, value types, and the canonical pretty-printer.

Positions (`pos`) are (line, col) pairs carried for diagnostics; they are
excluded from structural equality so that pretty-print/re-parse round trips
compare equal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union


# ---------------------------------------------------------------------------
# Value types

@dataclass(frozen=True)
class ScalarType:
    name: str  # "int" | "bool" | "string"

    def __repr__(self):
        return self.name


INT = ScalarType("int")
BOOL = ScalarType("bool")
STRING = ScalarType("string")


@dataclass(frozen=True)
class TupleType:
    """A flat tuple of scalars; tuple components may not nest."""

    items: tuple

    def __repr__(self):
        return "(" + ", ".join(repr(i) for i in self.items) + ")"


@dataclass(frozen=True)
class BagType:
    """Bag of a scalar or flat-tuple element type. Bags never nest."""

    element: Union[ScalarType, TupleType]

    def __repr__(self):
        return f"bag[{self.element!r}]"


ValueType = Union[ScalarType, TupleType, BagType]


def is_scalar(t) -> bool:
    return isinstance(t, ScalarType)


def is_flat_element(t) -> bool:
    """True for types allowed as bag elements: scalars and flat tuples."""
    if isinstance(t, ScalarType):
        return True
    if isinstance(t, TupleType):
        return all(isinstance(i, ScalarType) for i in t.items)
    return False


def element_width(t) -> int:
    """Number of scalar components of a bag element type."""
    return len(t.items) if isinstance(t, TupleType) else 1


def element_key_type(t):
    """Key of an element for join/reduceByKey: first component or the scalar itself."""
    return t.items[0] if isinstance(t, TupleType) else t


# ---------------------------------------------------------------------------
# Expressions

@dataclass
class Expr:
    pos: tuple = field(default=(0, 0), compare=False, repr=False)
    # Filled by the typechecker.
    type: Optional[ValueType] = field(default=None, compare=False, repr=False)


@dataclass
class IntLit(Expr):
    value: int = 0


@dataclass
class BoolLit(Expr):
    value: bool = False


@dataclass
class StrLit(Expr):
    value: str = ""


@dataclass
class VarRef(Expr):
    name: str = ""


@dataclass
class BinOp(Expr):
    op: str = "+"
    left: Expr = None
    right: Expr = None


@dataclass
class TupleExpr(Expr):
    items: list = field(default_factory=list)


@dataclass
class FieldAccess(Expr):
    base: Expr = None
    index: int = 0


@dataclass
class Lambda(Expr):
    """Single-parameter lambda; body may reference only the parameter."""

    param: str = ""
    body: Expr = None


@dataclass
class CombinerLit(Expr):
    """Underscore-section combiner literal such as `_ + _`."""

    op: str = "+"


@dataclass
class MethodCall(Expr):
    recv: Expr = None
    method: str = ""
    args: list = field(default_factory=list)


@dataclass
class BuiltinCall(Expr):
    name: str = ""
    args: list = field(default_factory=list)


@dataclass
class TypeLit(Expr):
    """A type literal argument (readFile element type, emptyBag element type)."""

    value: ValueType = None


# ---------------------------------------------------------------------------
# Statements

@dataclass
class Stmt:
    pos: tuple = field(default=(0, 0), compare=False, repr=False)


@dataclass
class Assign(Stmt):
    name: str = ""
    expr: Expr = None


@dataclass
class ExprStmt(Stmt):
    expr: Expr = None


@dataclass
class If(Stmt):
    cond: Expr = None
    then: list = field(default_factory=list)
    orelse: list = field(default_factory=list)


@dataclass
class While(Stmt):
    cond: Expr = None
    body: list = field(default_factory=list)


@dataclass
class DoWhile(Stmt):
    body: list = field(default_factory=list)
    cond: Expr = None


@dataclass
class Program:
    stmts: list = field(default_factory=list)


BAG_METHODS = ("map", "filter", "join", "reduceByKey", "reduce", "cross", "writeFile")
BUILTINS = ("readFile", "singletonBag", "emptyBag")


def count_statements(program) -> int:
    """Total statement nodes, counting nested bodies."""

    def count(stmts):
        n = 0
        for s in stmts:
            n += 1
            if isinstance(s, If):
                n += count(s.then) + count(s.orelse)
            elif isinstance(s, (While, DoWhile)):
                n += count(s.body)
        return n

    return count(program.stmts)


# ---------------------------------------------------------------------------
# Pretty-printer

def pretty_type(t) -> str:
    if isinstance(t, ScalarType):
        return t.name
    if isinstance(t, TupleType):
        return "(" + ", ".join(pretty_type(i) for i in t.items) + ")"
    raise ValueError(f"not a printable type literal: {t!r}")


_PRECEDENCE = {
    "==": 1, "!=": 1, "<": 1, "<=": 1, ">": 1, ">=": 1,
    "+": 2, "-": 2,
    "*": 3, "/": 3, "%": 3,
}


def pretty_expr(e, parent_prec=0) -> str:
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, StrLit):
        out = e.value.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
        return f'"{out}"'
    if isinstance(e, VarRef):
        return e.name
    if isinstance(e, BinOp):
        prec = _PRECEDENCE[e.op]
        # Left associative: the right child needs parens at equal precedence.
        s = f"{pretty_expr(e.left, prec)} {e.op} {pretty_expr(e.right, prec + 1)}"
        return f"({s})" if prec < parent_prec else s
    if isinstance(e, TupleExpr):
        return "(" + ", ".join(pretty_expr(i) for i in e.items) + ")"
    if isinstance(e, FieldAccess):
        return f"{pretty_expr(e.base, 99)}.{e.index}"
    if isinstance(e, Lambda):
        return f"{e.param} => {pretty_expr(e.body)}"
    if isinstance(e, CombinerLit):
        return f"_ {e.op} _"
    if isinstance(e, MethodCall):
        args = ", ".join(pretty_expr(a) for a in e.args)
        return f"{pretty_expr(e.recv, 99)}.{e.method}({args})"
    if isinstance(e, BuiltinCall):
        args = ", ".join(pretty_expr(a) for a in e.args)
        return f"{e.name}({args})"
    if isinstance(e, TypeLit):
        return pretty_type(e.value)
    raise ValueError(f"unknown expression node: {e!r}")


def pretty_stmts(stmts, indent=0) -> list:
    pad = "  " * indent
    lines = []
    for s in stmts:
        if isinstance(s, Assign):
            lines.append(f"{pad}{s.name} = {pretty_expr(s.expr)}")
        elif isinstance(s, ExprStmt):
            lines.append(f"{pad}{pretty_expr(s.expr)}")
        elif isinstance(s, If):
            lines.append(f"{pad}if ({pretty_expr(s.cond)}) {{")
            lines += pretty_stmts(s.then, indent + 1)
            if s.orelse:
                lines.append(f"{pad}}} else {{")
                lines += pretty_stmts(s.orelse, indent + 1)
            lines.append(f"{pad}}}")
        elif isinstance(s, While):
            lines.append(f"{pad}while ({pretty_expr(s.cond)}) {{")
            lines += pretty_stmts(s.body, indent + 1)
            lines.append(f"{pad}}}")
        elif isinstance(s, DoWhile):
            lines.append(f"{pad}do {{")
            lines += pretty_stmts(s.body, indent + 1)
            lines.append(f"{pad}}} while ({pretty_expr(s.cond)})")
        else:
            raise ValueError(f"unknown statement node: {s!r}")
    return lines


def pretty_program(program) -> str:
    return "\n".join(pretty_stmts(program.stmts)) + "\n"
