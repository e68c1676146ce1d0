"""Random structured programs for oracle-equivalence testing.

Programs are generated well-typed by construction: the generator tracks
variable types and only emits operations its environment can satisfy.
Loop and branch conditions are driven by integer counters, never by bag
contents, so every generated program has one deterministic execution path;
combiners on bags that can hold more than one element stick to + and * on
ints, which are insensitive to the arrival order of a parallel fold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .seeding import derive_rng

INT = "int"
PAIR = "pair"
MAX_SOURCE_ELEMS = 8
MAX_BAG_OPS = 12
MAX_LOOP_DEPTH = 2
MAX_BAG_BOUND = 20_000
SMALL = (0, 1, 2, 3, 5, 7)


@dataclass
class FuzzCase:
    seed: int
    source: str
    datasets: dict = field(default_factory=dict)   # name -> elements


class _Gen:
    def __init__(self, seed):
        self.rng = derive_rng("fuzz", seed)
        self.lines = []
        self.indent = 0
        self.bags = {}        # name -> INT | PAIR
        self.bound = {}       # name -> worst-case element count
        self.loop_iters = []  # iteration counts of enclosing loops
        self.scalars = []     # int-typed counter/scalar names
        self.active = []      # counters of loops still being generated;
        self.datasets = {}    # reassigning one could break termination
        self.n_ops = 0
        self.n_names = 0

    def fresh(self, prefix):
        self.n_names += 1
        return f"{prefix}{self.n_names}"

    def emit(self, text):
        self.lines.append("  " * self.indent + text)

    # -- expressions -------------------------------------------------------

    def scalar_expr(self):
        rng = self.rng
        atoms = [str(rng.choice(SMALL))]
        atoms += rng.sample(self.scalars, k=min(len(self.scalars), 2))
        rng.shuffle(atoms)
        expr = atoms[0]
        for a in atoms[1:]:
            expr = f"{expr} {rng.choice('+-*')} {a}"
        return expr

    def int_lambda(self, var="x"):
        c = self.rng.choice(SMALL)
        body = self.rng.choice([
            f"{var} + {c}", f"{var} * {1 + c}", f"{var} - {c}",
            f"abs({var} - {c})", f"{var} % {2 + c}",
            f"({var} % {2 + c}, {var})",
        ])
        return f"{var} => {body}", PAIR if body.startswith("(") else INT

    def pair_lambda(self, var="p"):
        c = self.rng.choice(SMALL)
        body = self.rng.choice([
            f"({var}.0, {var}.1 + {c})", f"({var}.1 % {2 + c}, {var}.0)",
            f"{var}.0 + {var}.1", f"abs({var}.0 - {var}.1)",
        ])
        return f"{var} => {body}", INT if "," not in body else PAIR

    def predicate(self, etype):
        c = self.rng.choice(SMALL)
        if etype == INT:
            return self.rng.choice([
                f"x => x % 2 == 0", f"x => x < {c + 3}", f"x => x != {c}",
            ])
        return self.rng.choice([
            f"p => p.0 % 2 == 0", f"p => p.1 >= {c}", f"p => p.0 != {c}",
        ])

    def _grown(self, src, other):
        """Worst-case size of src x other compounded over enclosing loops."""
        reps = 1
        for it in self.loop_iters:
            reps *= it
        if other == src:
            r = self.bound[src]
            for _ in range(reps):
                r *= r
            return r
        return self.bound[src] * self.bound[other] ** reps

    # -- statements ----------------------------------------------------------

    def add_source(self):
        rng = self.rng
        name = self.fresh("ds")
        etype = rng.choice((INT, PAIR))
        n = rng.randrange(1, MAX_SOURCE_ELEMS + 1)
        if etype == INT:
            elems = [rng.randrange(-9, 10) for _ in range(n)]
            tylit = "int"
        else:
            elems = [(rng.randrange(0, 5), rng.randrange(-9, 10))
                     for _ in range(n)]
            tylit = "(int, int)"
        self.datasets[name] = elems
        var = self.fresh("b")
        self.emit(f'{var} = readFile("{name}", {tylit})')
        self.bags[var] = etype
        self.bound[var] = n
        return var

    def bag_stmt(self, reassign_only=False):
        """One bag operation; inside control flow it only reassigns."""
        rng = self.rng
        self.n_ops += 1
        names = sorted(self.bags)
        src = rng.choice(names)
        etype = self.bags[src]
        ops = ["map", "filter"]
        join_others = []
        if etype == PAIR:
            ops.append("reduceByKey")
            join_others = [n for n in names if self.bags[n] == PAIR
                           and self._grown(src, n) <= MAX_BAG_BOUND]
            if join_others:
                ops.append("join")
        else:
            ops.append("reduce")
        cross_others = [n for n in names if n != src
                        and self._grown(src, n) <= MAX_BAG_BOUND]
        if cross_others:
            ops.append("cross")
        op = rng.choice(ops)
        if op == "map":
            lam, out = (self.int_lambda() if etype == INT
                        else self.pair_lambda())
            rhs, rtype, nb = f"{src}.map({lam})", out, self.bound[src]
        elif op == "filter":
            rhs, rtype = f"{src}.filter({self.predicate(etype)})", etype
            nb = self.bound[src]
        elif op == "reduce":
            rhs, rtype, nb = f"{src}.reduce(_ {rng.choice('+*')} _)", INT, 1
        elif op == "reduceByKey":
            rhs, rtype = f"{src}.reduceByKey(_ {rng.choice('+*')} _)", PAIR
            nb = self.bound[src]
        elif op == "join":
            other = rng.choice(join_others)
            joined = f"{src}.join({other})"
            # joining two pair bags makes triples; fold back to a pair
            rhs = f"{joined}.map(t => (t.0, t.1 * t.2))"
            rtype = PAIR
            nb = self._grown(src, other)
            self.n_ops += 1
        else:
            other = rng.choice(cross_others)
            both_int = etype == INT and self.bags[other] == INT
            cross = f"{src}.cross({other})"
            nb = self._grown(src, other)
            if both_int:
                rhs, rtype = cross, PAIR
            else:
                rhs = f"{cross}.map(t => (t.0 % 4, t.1))"
                rtype = PAIR
                self.n_ops += 1
        if reassign_only:
            candidates = [n for n in names if self.bags[n] == rtype]
            if not candidates:
                # keep the shape: map the source onto itself instead
                lam, out = (self.int_lambda() if etype == INT
                            else self.pair_lambda())
                while out != etype:
                    lam, out = (self.int_lambda() if etype == INT
                                else self.pair_lambda())
                self.emit(f"{src} = {src}.map({lam})")
                return
            var = rng.choice(candidates)
        else:
            var = self.fresh("b")
        self.emit(f"{var} = {rhs}")
        self.bags[var] = rtype
        self.bound[var] = nb

    def loop(self, depth):
        rng = self.rng
        n = self.fresh("n")
        self.scalars.append(n)
        self.active.append(n)
        bound = rng.randrange(2, 4)
        inverted = rng.random() < 0.25
        self.emit(f"{n} = 0")
        if inverted:
            self.emit(f"while ({n} < {bound}) {{")
        else:
            self.emit("do {")
        self.indent += 1
        self.loop_iters.append(bound)
        self.emit(f"{n} = {n} + 1")
        self.body(depth + 1, in_loop=True)
        self.loop_iters.pop()
        self.indent -= 1
        if inverted:
            self.emit("}")
        else:
            self.emit(f"}} while ({n} < {bound})")
        self.active.pop()

    def branch(self, depth):
        rng = self.rng
        cond = rng.choice(self.scalars)
        rel = rng.choice([f"{cond} % 2 == 0", f"{cond} < {rng.choice(SMALL)}",
                          f"{cond} != {rng.choice(SMALL)}"])
        self.emit(f"if ({rel}) {{")
        self.indent += 1
        for _ in range(rng.randrange(1, 3)):
            self.bag_stmt(reassign_only=True)
        self.indent -= 1
        if rng.random() < 0.7:
            self.emit("} else {")
            self.indent += 1
            for _ in range(rng.randrange(1, 3)):
                self.bag_stmt(reassign_only=True)
            self.indent -= 1
        self.emit("}")

    def body(self, depth, in_loop):
        rng = self.rng
        for _ in range(rng.randrange(1, 4)):
            if self.n_ops >= MAX_BAG_OPS:
                break
            roll = rng.random()
            settled = [s for s in self.scalars if s not in self.active]
            if roll < 0.15 and depth < MAX_LOOP_DEPTH:
                self.loop(depth)
            elif roll < 0.35 and self.scalars:
                self.branch(depth)
            elif roll < 0.45 and settled:
                s = rng.choice(settled)
                self.emit(f"{s} = {self.scalar_expr()}")
            else:
                self.bag_stmt(reassign_only=in_loop)

    def run(self):
        rng = self.rng
        for _ in range(rng.randrange(1, 4)):
            self.add_source()
        self.body(0, in_loop=False)
        outs = rng.sample(sorted(self.bags), k=min(len(self.bags), 2))
        for i, var in enumerate(outs):
            self.emit(f'{var}.writeFile("out{i}")')
        return "\n".join(self.lines) + "\n"


def gen_case(seed):
    """A deterministic random program plus its input datasets."""
    g = _Gen(seed)
    source = g.run()
    return FuzzCase(seed=seed, source=source, datasets=g.datasets)
