"""Scanner and recursive-descent parser for `.laby` sources.

Grammar:

    program  := stmt*
    stmt     := ident "=" expr
              | "while" "(" expr ")" block
              | "do" block "while" "(" expr ")"
              | "if" "(" expr ")" block ("else" block)?
              | expr
    block    := "{" stmt* "}"
    expr     := cmp (("=="|"!="|"<="|"<"|">="|">") cmp)?
    cmp      := term (("+"|"-") term)*
    term     := postfix (("*"|"/"|"%") postfix)*
    postfix  := primary ("." method "(" args ")" | "." INT)*
    primary  := INT | STRING | "true" | "false" | ident
              | builtin "(" args ")" | "(" expr ("," expr)* ")"

Lambdas (`x => expr`) and combiner sections (`_ + _`) are accepted only in
operator argument position; readFile/emptyBag accept a type literal argument.
Statements are newline- or `;`-separated; comments run from `//` to end of line.
"""

from __future__ import annotations

from .errors import LabyParseError
from . import syntax as S

KEYWORDS = {"while", "do", "if", "else", "true", "false"}

_TWO_CHAR = ("==", "!=", "<=", ">=", "=>")
_ONE_CHAR = "(){},.;=<>+-*/%_"

_CMP_OPS = ("==", "!=", "<=", "<", ">=", ">")
_COMBINER_OPS = ("+", "-", "*", "/", "%")


class Token:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind, text, line, col):
        self.kind = kind
        self.text = text
        self.line = line
        self.col = col

    def __repr__(self):
        return f"Token({self.kind}, {self.text!r}, {self.line}:{self.col})"


def tokenize(src, filename="<input>"):
    tokens = []
    i, line, col = 0, 1, 1
    n = len(src)
    while i < n:
        c = src[i]
        if c == "\n":
            tokens.append(Token("NEWLINE", "\n", line, col))
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if src.startswith("//", i):
            while i < n and src[i] != "\n":
                i += 1
                col += 1
            continue
        if c.isdigit():
            start = i
            while i < n and src[i].isdigit():
                i += 1
            text = src[start:i]
            tokens.append(Token("INT", text, line, col))
            col += len(text)
            continue
        if c.isalpha() or c == "_" and i + 1 < n and (src[i + 1].isalnum() or src[i + 1] == "_"):
            # A bare `_` is the combiner-hole token; `_x` style names are idents.
            start = i
            while i < n and (src[i].isalnum() or src[i] == "_"):
                i += 1
            text = src[start:i]
            kind = text.upper() if text in KEYWORDS else "IDENT"
            tokens.append(Token(kind, text, line, col))
            col += len(text)
            continue
        if c == '"':
            start_line, start_col = line, col
            i += 1
            col += 1
            out = []
            while True:
                if i >= n or src[i] == "\n":
                    raise LabyParseError("unterminated string literal", start_line, start_col, filename)
                ch = src[i]
                if ch == '"':
                    i += 1
                    col += 1
                    break
                if ch == "\\":
                    if i + 1 >= n:
                        raise LabyParseError("unterminated escape", line, col, filename)
                    esc = src[i + 1]
                    mapped = {"n": "\n", "t": "\t", '"': '"', "\\": "\\"}.get(esc)
                    if mapped is None:
                        raise LabyParseError(f"unknown escape \\{esc}", line, col, filename)
                    out.append(mapped)
                    i += 2
                    col += 2
                    continue
                out.append(ch)
                i += 1
                col += 1
            tokens.append(Token("STRING", "".join(out), start_line, start_col))
            continue
        two = src[i:i + 2]
        if two in _TWO_CHAR:
            tokens.append(Token(two, two, line, col))
            i += 2
            col += 2
            continue
        if c in _ONE_CHAR:
            tokens.append(Token(c, c, line, col))
            i += 1
            col += 1
            continue
        raise LabyParseError(f"unexpected character {c!r}", line, col, filename)
    tokens.append(Token("EOF", "", line, col))
    return tokens


class Parser:
    def __init__(self, src, filename="<input>"):
        self.filename = filename
        self.tokens = tokenize(src, filename)
        self.pos = 0

    # -- token plumbing ------------------------------------------------

    def _peek(self, skip_newlines=False):
        i = self.pos
        if skip_newlines:
            while self.tokens[i].kind == "NEWLINE":
                i += 1
        return self.tokens[i]

    def _advance(self):
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def _skip_newlines(self):
        while self.tokens[self.pos].kind == "NEWLINE":
            self.pos += 1

    def _check(self, kind):
        return self._peek().kind == kind

    def _match(self, kind):
        if self._check(kind):
            return self._advance()
        return None

    def _consume(self, kind, what):
        tok = self._peek()
        if tok.kind != kind:
            shown = tok.text if tok.kind != "EOF" else "end of input"
            raise LabyParseError(f"expected {what}, found {shown!r}", tok.line, tok.col, self.filename)
        return self._advance()

    def _error(self, msg, tok=None):
        tok = tok or self._peek()
        raise LabyParseError(msg, tok.line, tok.col, self.filename)

    # -- statements ----------------------------------------------------

    def parse_program(self):
        stmts = self._stmt_list(("EOF",))
        self._consume("EOF", "end of input")
        return S.Program(stmts=stmts)

    def _stmt_list(self, stop_kinds):
        stmts = []
        self._skip_newlines()
        while self._peek().kind not in stop_kinds:
            stmts.append(self._statement())
            self._end_statement()
        return stmts

    def _end_statement(self):
        # Statements end at a newline, `;`, `}` or EOF.
        tok = self._peek()
        if tok.kind in ("NEWLINE", ";"):
            self._advance()
        elif tok.kind not in ("}", "EOF"):
            self._error(f"expected end of statement, found {tok.text!r}", tok)
        self._skip_newlines()

    def _statement(self):
        tok = self._peek()
        if tok.kind == "WHILE":
            self._advance()
            self._consume("(", "'('")
            cond = self._expression()
            self._consume(")", "')'")
            body = self._block()
            return S.While(cond=cond, body=body, pos=(tok.line, tok.col))
        if tok.kind == "DO":
            self._advance()
            body = self._block()
            self._skip_newlines()
            self._consume("WHILE", "'while'")
            self._consume("(", "'('")
            cond = self._expression()
            self._consume(")", "')'")
            return S.DoWhile(body=body, cond=cond, pos=(tok.line, tok.col))
        if tok.kind == "IF":
            self._advance()
            self._consume("(", "'('")
            cond = self._expression()
            self._consume(")", "')'")
            then = self._block()
            orelse = []
            save = self.pos
            self._skip_newlines()
            if self._check("ELSE"):
                self._advance()
                orelse = self._block()
            else:
                self.pos = save
            return S.If(cond=cond, then=then, orelse=orelse, pos=(tok.line, tok.col))
        if tok.kind == "IDENT" and self.tokens[self.pos + 1].kind == "=":
            name = self._advance()
            self._advance()  # '='
            expr = self._expression()
            return S.Assign(name=name.text, expr=expr, pos=(name.line, name.col))
        expr = self._expression()
        return S.ExprStmt(expr=expr, pos=(tok.line, tok.col))

    def _block(self):
        self._skip_newlines()
        self._consume("{", "'{'")
        stmts = self._stmt_list(("}", "EOF"))
        self._consume("}", "'}'")
        return stmts

    # -- expressions ---------------------------------------------------

    def _expression(self):
        left = self._additive()
        tok = self._peek()
        if tok.kind in _CMP_OPS:
            self._advance()
            right = self._additive()
            return S.BinOp(op=tok.kind, left=left, right=right, pos=(tok.line, tok.col))
        return left

    def _additive(self):
        left = self._term()
        while self._peek().kind in ("+", "-"):
            tok = self._advance()
            right = self._term()
            left = S.BinOp(op=tok.kind, left=left, right=right, pos=(tok.line, tok.col))
        return left

    def _term(self):
        left = self._postfix()
        while self._peek().kind in ("*", "/", "%"):
            tok = self._advance()
            right = self._postfix()
            left = S.BinOp(op=tok.kind, left=left, right=right, pos=(tok.line, tok.col))
        return left

    def _postfix(self):
        expr = self._primary()
        while self._check("."):
            dot = self._advance()
            tok = self._peek()
            if tok.kind == "INT":
                self._advance()
                expr = S.FieldAccess(base=expr, index=int(tok.text), pos=(dot.line, dot.col))
            elif tok.kind == "IDENT":
                name = self._advance()
                if name.text not in S.BAG_METHODS:
                    self._error(f"unknown method {name.text!r}", name)
                self._consume("(", "'('")
                args = self._call_args()
                self._consume(")", "')'")
                expr = S.MethodCall(recv=expr, method=name.text, args=args,
                                    pos=(name.line, name.col))
            else:
                self._error("expected method name or tuple index after '.'", tok)
        return expr

    def _primary(self):
        tok = self._peek()
        if tok.kind == "INT":
            self._advance()
            return S.IntLit(value=int(tok.text), pos=(tok.line, tok.col))
        if tok.kind == "STRING":
            self._advance()
            return S.StrLit(value=tok.text, pos=(tok.line, tok.col))
        if tok.kind in ("TRUE", "FALSE"):
            self._advance()
            return S.BoolLit(value=tok.kind == "TRUE", pos=(tok.line, tok.col))
        if tok.kind == "IDENT":
            if tok.text in S.BUILTINS + ("abs",) and self.tokens[self.pos + 1].kind == "(":
                self._advance()
                self._advance()  # '('
                args = self._builtin_args(tok)
                self._consume(")", "')'")
                return S.BuiltinCall(name=tok.text, args=args, pos=(tok.line, tok.col))
            self._advance()
            return S.VarRef(name=tok.text, pos=(tok.line, tok.col))
        if tok.kind == "(":
            self._advance()
            items = [self._expression()]
            while self._match(","):
                items.append(self._expression())
            self._consume(")", "')'")
            if len(items) == 1:
                return items[0]
            return S.TupleExpr(items=items, pos=(tok.line, tok.col))
        self._error(f"expected an expression, found {tok.text or tok.kind!r}", tok)

    # -- arguments -----------------------------------------------------

    def _call_args(self):
        if self._check(")"):
            return []
        args = [self._operator_arg()]
        while self._match(","):
            args.append(self._operator_arg())
        return args

    def _operator_arg(self):
        tok = self._peek()
        if tok.kind == "_":
            self._advance()
            op = self._peek()
            if op.kind not in _COMBINER_OPS:
                self._error("expected a binary operator in combiner", op)
            self._advance()
            self._consume("_", "'_'")
            return S.CombinerLit(op=op.kind, pos=(tok.line, tok.col))
        if tok.kind == "IDENT" and self.tokens[self.pos + 1].kind == "=>":
            param = self._advance()
            self._advance()  # '=>'
            body = self._lambda_body()
            return S.Lambda(param=param.text, body=body, pos=(param.line, param.col))
        return self._expression()

    def _lambda_body(self):
        # Lambda bodies are plain expressions (arithmetic/comparison/tuple);
        # builtin calls inside are limited to abs(), checked by the typechecker.
        return self._expression()

    def _builtin_args(self, nametok):
        name = nametok.text
        if self._check(")"):
            return []
        args = []
        if name == "abs":
            args.append(self._expression())
        elif name == "emptyBag":
            args.append(self._type_arg())
        elif name == "readFile":
            args.append(self._expression())
            while self._match(","):
                args.append(self._type_arg())
        else:
            args.append(self._expression())
            while self._match(","):
                args.append(self._expression())
        return args

    def _type_arg(self):
        tok = self._peek()
        t = self._parse_type()
        return S.TypeLit(value=t, pos=(tok.line, tok.col))

    def _parse_type(self):
        tok = self._peek()
        if tok.kind == "IDENT" and tok.text in ("int", "bool", "string"):
            self._advance()
            return {"int": S.INT, "bool": S.BOOL, "string": S.STRING}[tok.text]
        if tok.kind == "(":
            self._advance()
            items = [self._parse_type()]
            while self._match(","):
                items.append(self._parse_type())
            self._consume(")", "')'")
            if len(items) < 2:
                self._error("tuple type needs at least two components", tok)
            return S.TupleType(items=tuple(items))
        self._error("expected a type (int, bool, string, or tuple)", tok)


def parse(src, filename="<input>"):
    """Parse a program source string into an AST."""
    return Parser(src, filename).parse_program()


def parse_file(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse(fh.read(), filename=str(path))
