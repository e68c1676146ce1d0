"""Execution traces and their canonical text form.

A trace captures everything the runtime semantics promise: the control
path, the multiset contents of every produced bag, the per-node
production order, which input bags each output bag consumed, and the
multiset written to each output file.  Two runs are equivalent exactly
when their traces are equal; `diff_traces` reports every aspect that
differs.
"""

from collections import Counter
from dataclasses import dataclass, field
from typing import NamedTuple

from .errors import LabyParseError


class BagId(NamedTuple):
    node: str
    pos: int                      # 1-based position in the execution path

    def __str__(self):
        return f"{self.node}@{self.pos}"


@dataclass
class ExecutionTrace:
    path: list = field(default_factory=list)
    bags: dict = field(default_factory=dict)           # BagId -> Counter
    node_order: dict = field(default_factory=dict)     # node -> [pos]
    input_choices: dict = field(default_factory=dict)  # BagId -> [(slot, BagId)]
    side_effects: dict = field(default_factory=dict)   # file name -> Counter


def fmt_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, tuple):
        return "(" + ", ".join(fmt_value(x) for x in v) + ")"
    raise TypeError(f"unexpected trace value {v!r}")


def _fmt_multiset(counter):
    parts = []
    for v in sorted(counter, key=fmt_value):
        parts.extend([fmt_value(v)] * counter[v])
    return "{" + ", ".join(parts) + "}"


def serialize_trace(t):
    lines = ["laby-trace v1"]
    lines.append("path: " + " ".join(str(b) for b in t.path))
    for node in sorted(t.node_order):
        lines.append(f"node {node}: " +
                     " ".join(str(p) for p in t.node_order[node]))
    for bid in sorted(t.bags):
        lines.append(f"bag {bid} = " + _fmt_multiset(t.bags[bid]))
    for bid in sorted(t.input_choices):
        picks = ", ".join(f"{slot} <- {src}"
                          for slot, src in t.input_choices[bid])
        lines.append(f"choices {bid}: {picks}")
    for name in sorted(t.side_effects):
        lines.append(f"file {name} = " + _fmt_multiset(t.side_effects[name]))
    lines.append("end")
    return "\n".join(lines) + "\n"


class _Scanner:
    def __init__(self, text, where):
        self.text = text
        self.i = 0
        self.where = where

    def error(self, msg):
        raise LabyParseError(f"{self.where}: bad trace: {msg}")

    def skip_ws(self):
        while self.i < len(self.text) and self.text[self.i] == " ":
            self.i += 1

    def peek(self):
        self.skip_ws()
        return self.text[self.i] if self.i < len(self.text) else ""

    def expect(self, ch):
        if self.peek() != ch:
            self.error(f"expected {ch!r} at column {self.i}")
        self.i += 1

    def value(self):
        c = self.peek()
        if c == "(":
            self.i += 1
            items = []
            while self.peek() != ")":
                if items:
                    self.expect(",")
                items.append(self.value())
            self.i += 1
            return tuple(items)
        if c == '"':
            self.i += 1
            out = []
            while self.i < len(self.text) and self.text[self.i] != '"':
                ch = self.text[self.i]
                if ch == "\\":
                    self.i += 1
                    ch = self.text[self.i]
                out.append(ch)
                self.i += 1
            if self.i >= len(self.text):
                self.error("unterminated string")
            self.i += 1
            return "".join(out)
        start = self.i
        while self.i < len(self.text) and \
                self.text[self.i] not in ",){} ":
            self.i += 1
        tok = self.text[start:self.i]
        if tok == "true":
            return True
        if tok == "false":
            return False
        try:
            return int(tok)
        except ValueError:
            self.error(f"unexpected token {tok!r}")


def _parse_multiset(text, where):
    s = _Scanner(text, where)
    s.expect("{")
    out = Counter()
    first = True
    while s.peek() != "}":
        if not first:
            s.expect(",")
        out[s.value()] += 1
        first = False
    return out


def _parse_bagid(text, where):
    node, _, pos = text.rpartition("@")
    if not node:
        raise LabyParseError(f"{where}: bad trace: bag id {text!r}")
    return BagId(node, int(pos))


def parse_trace(text, where="<trace>"):
    t = ExecutionTrace()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != "laby-trace v1":
        raise LabyParseError(f"{where}: bad trace: missing header")
    for ln in lines[1:]:
        if ln == "end":
            break
        head, _, rest = ln.partition(" ")
        if head == "path:":
            t.path = [int(x) for x in rest.split()]
        elif head == "node":
            name, _, posns = rest.partition(": ")
            t.node_order[name.rstrip(":")] = [int(x) for x in posns.split()]
        elif head == "bag":
            bid, _, body = rest.partition(" = ")
            t.bags[_parse_bagid(bid, where)] = _parse_multiset(body, where)
        elif head == "choices":
            bid, _, body = rest.partition(": ")
            picks = []
            if body:
                for part in body.split(", "):
                    slot, _, src = part.partition(" <- ")
                    picks.append((int(slot), _parse_bagid(src, where)))
            t.input_choices[_parse_bagid(bid.rstrip(":"), where)] = picks
        elif head == "file":
            name, _, body = rest.partition(" = ")
            t.side_effects[name] = _parse_multiset(body, where)
        else:
            raise LabyParseError(f"{where}: bad trace: line {ln!r}")
    return t


def _diff_maps(kind, a, b, render, out):
    for key in sorted(set(a) | set(b), key=str):
        if key not in a:
            out.append(f"{kind} {key}: only in second")
        elif key not in b:
            out.append(f"{kind} {key}: only in first")
        elif a[key] != b[key]:
            out.append(f"{kind} {key}: {render(a[key])} != {render(b[key])}")


def diff_traces(a, b):
    """All observable differences between two traces, empty if equivalent."""
    out = []
    if a.path != b.path:
        out.append(f"path: {a.path} != {b.path}")
    _diff_maps("bag", a.bags, b.bags, _fmt_multiset, out)
    _diff_maps("node", a.node_order, b.node_order,
               lambda v: " ".join(map(str, v)), out)
    _diff_maps("choices", a.input_choices, b.input_choices,
               lambda v: ", ".join(f"{s} <- {x}" for s, x in v), out)
    _diff_maps("file", a.side_effects, b.side_effects, _fmt_multiset, out)
    return out
