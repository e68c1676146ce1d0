"""Bag transformations and the open/push/close protocol.

Every operator implements the same life cycle per output bag:

    open_bag() ; push(elem, slot)* ; close_in(slot) per input slot

and signals completion by calling `collector.close()` exactly once.
Map-like kinds emit as elements arrive; pipeline breakers (reduce,
reduceByKey) emit on close; binary kinds treat slot 0 as the build side
and slot 1 as the probe/stream side.  Join and cross keep their slot-0
state across output bags until `drop_state` is called, which is how
loop-invariant build sides are reused.

Functions passed to map/filter are closed expression trees; they are
compiled once per instance into Python closures.
"""

import zlib

from . import syntax as S
from .errors import ExecutionError, ProtocolError
from .files import read_shards, write_part


# ---------------------------------------------------------------------------
# Value helpers

def key_of(elem):
    return elem[0] if isinstance(elem, tuple) else elem


def vals_of(elem):
    return tuple(elem[1:]) if isinstance(elem, tuple) else ()


def row_of(elem):
    return elem if isinstance(elem, tuple) else (elem,)


def collapse(row):
    return row[0] if len(row) == 1 else row


def hash_key(k):
    """Schedule- and process-stable hash for partitioning."""
    if isinstance(k, bool):
        return int(k)
    if isinstance(k, int):
        return k
    return zlib.crc32(k.encode("utf-8"))


def _dsl_add(a, b):
    if isinstance(a, str) or isinstance(b, str):
        def s(x):
            return x if isinstance(x, str) else str(x)
        return s(a) + s(b)
    return a + b


def _dsl_div(a, b):
    if b == 0:
        raise ExecutionError("division by zero")
    return a // b


def _dsl_mod(a, b):
    if b == 0:
        raise ExecutionError("modulo by zero")
    return a % b


# Fold functions for reduce/reduceByKey; applied in arrival order, so
# only + and * on ints are order-independent under parallel execution.
COMBINERS = {
    "+": _dsl_add,
    "*": lambda a, b: a * b,
    "-": lambda a, b: a - b,
    "/": _dsl_div,
    "%": _dsl_mod,
}


def udf_source(lam):
    """Render a single-parameter lambda expression tree as a Python expression."""
    param = lam.param

    def render(e):
        if isinstance(e, S.VarRef):
            if e.name != param:
                raise AssertionError(f"free variable {e.name} in function")
            return "v"
        if isinstance(e, (S.IntLit, S.BoolLit, S.StrLit)):
            return repr(e.value)
        if isinstance(e, S.BinOp):
            left, right = render(e.left), render(e.right)
            if e.op == "+":
                # Native addition unless '+' might be string concatenation.
                if e.left.type == S.INT and e.right.type == S.INT:
                    return f"({left} + {right})"
                return f"_add({left}, {right})"
            if e.op == "/":
                return f"_div({left}, {right})"
            if e.op == "%":
                return f"_mod({left}, {right})"
            return f"({left} {e.op} {right})"
        if isinstance(e, S.TupleExpr):
            items = ", ".join(render(i) for i in e.items)
            return f"({items},)" if len(e.items) == 1 else f"({items})"
        if isinstance(e, S.FieldAccess):
            return f"{render(e.base)}[{e.index}]"
        if isinstance(e, S.BuiltinCall) and e.name == "abs":
            return f"abs({render(e.args[0])})"
        raise AssertionError(f"cannot compile {e!r}")

    return f"lambda v: {render(lam.body)}"


def compile_udf(lam):
    """Compile a single-parameter lambda expression tree to a closure."""
    env = {"_add": _dsl_add, "_div": _dsl_div, "_mod": _dsl_mod, "abs": abs}
    return eval(udf_source(lam), env)


# ---------------------------------------------------------------------------
# Run context shared by the oracle and the parallel runtime

class RunContext:
    """File access, side-effect recording, and counters for one run."""

    def __init__(self, data_dir=".", write_files=True):
        self.data_dir = data_dir
        self.write_files = write_files
        self.written = set()            # (name, part) collision tracking
        self.side_effects = {}          # name -> list of elements
        self.counters = {}

    def count(self, name, key=None, by=1):
        self.counters[(name, key)] = self.counters.get((name, key), 0) + by

    def counter(self, name, key=None):
        return self.counters.get((name, key), 0)

    def read_input(self, name, instance_idx, parallelism, etype):
        return read_shards(self.data_dir, name, instance_idx,
                           parallelism, etype)

    def write_output(self, name, instance_idx, elements):
        if (name, instance_idx) in self.written:
            raise ExecutionError(
                f"writeFile collision: {name}.part{instance_idx} "
                f"written twice in one run")
        self.written.add((name, instance_idx))
        self.side_effects.setdefault(name, []).extend(elements)
        if self.write_files:
            write_part(self.data_dir, name, instance_idx, elements)


# ---------------------------------------------------------------------------
# Transformations

class Transformation:
    """Base life cycle: tracks bag-open state and per-slot closes."""

    slots = 1

    def __init__(self, op, ctx, node_id, instance_idx, parallelism, out):
        self.op = op
        self.ctx = ctx
        self.node_id = node_id
        self.instance_idx = instance_idx
        self.parallelism = parallelism
        self.out = out                  # collector: emit(elem), close()
        self.bag_open = False
        self.closed_slots = set()

    def open_bag(self):
        if self.bag_open:
            raise ProtocolError(f"{self.node_id}: open before previous close")
        self.bag_open = True
        self.closed_slots = set()
        self.on_open()

    def push(self, elem, slot):
        if not self.bag_open:
            raise ProtocolError(f"{self.node_id}: push outside an open bag")
        if slot in self.closed_slots:
            raise ProtocolError(f"{self.node_id}: push on closed slot {slot}")
        self.on_push(elem, slot)

    def push_batch(self, elems, slot):
        if not self.bag_open:
            raise ProtocolError(f"{self.node_id}: push outside an open bag")
        if slot in self.closed_slots:
            raise ProtocolError(f"{self.node_id}: push on closed slot {slot}")
        self.on_push_batch(elems, slot)

    def on_push_batch(self, elems, slot):
        on = self.on_push
        for v in elems:
            on(v, slot)

    def close_in(self, slot):
        if not self.bag_open:
            raise ProtocolError(f"{self.node_id}: close outside an open bag")
        if slot in self.closed_slots:
            raise ProtocolError(f"{self.node_id}: slot {slot} closed twice")
        self.closed_slots.add(slot)
        self.on_close_in(slot)
        if len(self.closed_slots) == self.slots:
            self.bag_open = False
            self.out.close()

    def drop_state(self):
        if self.bag_open:
            raise ProtocolError(f"{self.node_id}: dropState inside a bag")
        self.on_drop_state()

    # Kind-specific hooks.
    def on_open(self):
        pass

    def on_push(self, elem, slot):
        raise AssertionError("input pushed to a source")

    def on_close_in(self, slot):
        pass

    def on_drop_state(self):
        pass

    # True when the build side must be re-fed for the next bag.
    def needs_build(self):
        return True


class SourceT(Transformation):
    slots = 0

    def open_bag(self):
        if self.bag_open:
            raise ProtocolError(f"{self.node_id}: open before previous close")
        if self.instance_idx == 0:
            self.out.emit_many(self.op.values)
        self.out.close()


class MapT(Transformation):
    def __init__(self, *a):
        super().__init__(*a)
        self.fn = compile_udf(self.op.udf)

    def on_push(self, elem, slot):
        self.out.emit(self.fn(elem))

    def on_push_batch(self, elems, slot):
        self.out.emit_many(map(self.fn, elems))


class FilterT(Transformation):
    def __init__(self, *a):
        super().__init__(*a)
        self.fn = compile_udf(self.op.udf)

    def on_push(self, elem, slot):
        if self.fn(elem):
            self.out.emit(elem)

    def on_push_batch(self, elems, slot):
        self.out.emit_many(filter(self.fn, elems))


class PhiT(Transformation):
    def on_push(self, elem, slot):
        self.out.emit(elem)

    def on_push_batch(self, elems, slot):
        self.out.emit_many(elems)


class ReduceByKeyT(Transformation):
    def __init__(self, *a):
        super().__init__(*a)
        self.fn = COMBINERS[self.op.combine_op]
        self.table = {}

    def on_open(self):
        self.table = {}

    def on_push(self, elem, slot):
        k, v = elem
        if k in self.table:
            self.table[k] = self.fn(self.table[k], v)
        else:
            self.table[k] = v

    def on_push_batch(self, elems, slot):
        table, fn = self.table, self.fn
        for k, v in elems:
            if k in table:
                table[k] = fn(table[k], v)
            else:
                table[k] = v

    def on_close_in(self, slot):
        for k, v in self.table.items():
            self.out.emit((k, v))
        self.table = {}


class ReduceT(Transformation):
    _EMPTY = object()

    def __init__(self, *a):
        super().__init__(*a)
        self.fn = COMBINERS[self.op.combine_op]
        self.acc = self._EMPTY

    def on_open(self):
        self.acc = self._EMPTY

    def on_push(self, elem, slot):
        if self.acc is self._EMPTY:
            self.acc = elem
        else:
            self.acc = self.fn(self.acc, elem)

    def on_close_in(self, slot):
        # An empty input yields an empty output bag, not an error.
        if self.acc is not self._EMPTY:
            self.out.emit(self.acc)
        self.acc = self._EMPTY


class JoinT(Transformation):
    slots = 2

    def __init__(self, *a):
        super().__init__(*a)
        self.table = {}
        self.built = False

    def on_push(self, elem, slot):
        if slot == 0:
            if self.built:
                raise ProtocolError(
                    f"{self.node_id}: build elements while state retained")
            self.table.setdefault(key_of(elem), []).append(vals_of(elem))
        else:
            if not self.built:
                raise ProtocolError(f"{self.node_id}: probe before build")
            k = key_of(elem)
            pv = vals_of(elem)
            for bv in self.table.get(k, ()):
                if self.op.swap:
                    self.out.emit(collapse((k,) + pv + bv))
                else:
                    self.out.emit(collapse((k,) + bv + pv))

    def on_close_in(self, slot):
        if slot == 0 and not self.built:
            self.built = True
            self.ctx.count("build", (self.node_id, self.instance_idx))

    def on_drop_state(self):
        self.table = {}
        self.built = False

    def needs_build(self):
        return not self.built


class CrossT(Transformation):
    slots = 2

    def __init__(self, *a):
        super().__init__(*a)
        self.rows = []
        self.built = False

    def on_push(self, elem, slot):
        if slot == 0:
            if self.built:
                raise ProtocolError(
                    f"{self.node_id}: build elements while state retained")
            self.rows.append(row_of(elem))
        else:
            if not self.built:
                raise ProtocolError(f"{self.node_id}: stream before build")
            r = row_of(elem)
            for b in self.rows:
                if self.op.swap:
                    self.out.emit(collapse(r + b))
                else:
                    self.out.emit(collapse(b + r))

    def on_close_in(self, slot):
        if slot == 0 and not self.built:
            self.built = True
            self.ctx.count("build", (self.node_id, self.instance_idx))

    def on_drop_state(self):
        self.rows = []
        self.built = False

    def needs_build(self):
        return not self.built


class ReadFileT(Transformation):
    def __init__(self, *a):
        super().__init__(*a)
        self.name = None

    def on_open(self):
        self.name = None

    def on_push(self, elem, slot):
        self.name = elem

    def on_close_in(self, slot):
        if self.name is None:
            raise ExecutionError(f"{self.node_id}: no file name received")
        self.out.emit_many(self.ctx.read_input(
            self.name, self.instance_idx, self.parallelism,
            self.op.elem_type))


class WriteFileT(Transformation):
    slots = 2

    def __init__(self, *a):
        super().__init__(*a)
        self.name = None
        self.buf = []

    def on_open(self):
        self.name = None
        self.buf = []

    def on_push(self, elem, slot):
        if slot == 0:
            self.name = elem
        else:
            self.buf.append(elem)

    def on_close_in(self, slot):
        if slot == 1:
            if self.name is None:
                raise ExecutionError(f"{self.node_id}: no file name received")
            self.ctx.write_output(self.name, self.instance_idx, self.buf)
            self.buf = []


_KINDS = {
    "source": SourceT,
    "map": MapT,
    "filter": FilterT,
    "phi": PhiT,
    "reduceByKey": ReduceByKeyT,
    "reduce": ReduceT,
    "join": JoinT,
    "cross": CrossT,
    "readFile": ReadFileT,
    "writeFile": WriteFileT,
}


def make_transformation(op, ctx, node_id, instance_idx, parallelism, out):
    return _KINDS[op.kind](op, ctx, node_id, instance_idx, parallelism, out)


class ListCollector:
    """Collector that materializes emissions; used by tests and the oracle."""

    def __init__(self):
        self.elements = []
        self.closed = False

    def emit(self, elem):
        if self.closed:
            raise ProtocolError("emit after close")
        self.elements.append(elem)

    def emit_many(self, elems):
        if self.closed:
            raise ProtocolError("emit after close")
        self.elements.extend(elems)

    def close(self):
        if self.closed:
            raise ProtocolError("output closed twice")
        self.closed = True
