"""Single-process parallel runtime for dataflow graphs.

Every logical node runs as `parallelism` physical instances exchanging
messages through a seeded scheduler that delivers one message per turn,
picking uniformly among deliverable envelopes — interleavings are
adversarial but reproducible, and delay plans can hold back chosen
messages for extra turns without breaking per-channel FIFO order.

Coordination follows the execution path.  Condition instances broadcast
each branch decision as control messages carrying at most two block ids
with a gap-free position numbering; instances apply them through a
reorder buffer.  Bags are named (node, path position).  Consumers pick
input bags by position: a non-phi input takes the producer's latest bag
at or before the output position, a phi takes the input whose producer
block was visited most recently before the merge.  Producers hold bags
on conditional edges until the path shows whether the consumer's block
is reached before the bag is superseded.  Received partitions are
buffered per (edge, position) and discarded once no future walk can
choose them; join and cross instances keep their slot-0 state across
bags and dropState fires whenever the path revisits the build-side
producer's block.
"""

import time
from collections import Counter, deque
from dataclasses import dataclass, field
from bisect import bisect_left, bisect_right

from .cfg import EXIT_BLOCK
from .dataflow import FORWARD, HASH
from .errors import (BudgetExceededError, DeadlockError, ExecutionError,
                     ProtocolError)
from .seeding import derive_rng
from .trace import BagId, ExecutionTrace
from .transforms import hash_key, key_of, make_transformation

CTRL_BLOCK_LIMIT = 2          # block ids per control message
ELEMENT_BUDGET = 10_000_000
PATH_BUDGET = 100_000


class ControlMsg:
    __slots__ = ("first_pos", "blocks")

    def __init__(self, first_pos, blocks):
        self.first_pos = first_pos
        self.blocks = blocks


class DataMsg:
    """One sender's whole partition of one bag on one edge.

    Bags are computed atomically, so the partition-closed marker is the
    message itself: receiving it means this sender is done with this
    (edge, position) — which also makes delivery order across messages
    irrelevant and lets delay plans reorder freely.
    """

    __slots__ = ("edge", "sender", "pos", "elems")

    def __init__(self, edge, sender, pos, elems):
        self.edge = edge
        self.sender = sender
        self.pos = pos
        self.elems = elems


class TimerMsg:
    __slots__ = ()


# ---------------------------------------------------------------------------
# Delay plans: extra scheduler turns per message.

class ZeroDelay:
    def delay(self, kind, edge, sender, receiver):
        return 0


class RandomDelay:
    """Seeded per-message delays, consumed in send order."""

    def __init__(self, seed, max_delay=8):
        self.rng = derive_rng("delay", seed)
        self.max_delay = max_delay

    def delay(self, kind, edge, sender, receiver):
        return self.rng.randint(0, self.max_delay)


class TargetedDelay:
    """Fixed delays for control per receiver node and data per edge."""

    def __init__(self, ctrl_to=None, edges=None):
        self.ctrl_to = ctrl_to or {}
        self.edges = edges or {}

    def delay(self, kind, edge, sender, receiver):
        if kind == "ctrl":
            return self.ctrl_to.get(receiver[0], 0)
        return self.edges.get(edge, 0)


@dataclass
class RunStats:
    instances: int = 0
    decisions: int = 0
    ctrl_msgs: int = 0
    max_ctrl_blocks: int = 0
    data_msgs: int = 0
    overlap_events: int = 0
    turns: int = 0
    wallclock_ns: int = 0
    events: list = field(default_factory=list)   # (ns, label, kind, pos)
    close_stamps: list = field(default_factory=list)  # (pos, ns), stamped nodes


@dataclass
class RunResult:
    trace: ExecutionTrace
    stats: RunStats
    ctx: object


class _Out:
    __slots__ = ("sink", "closed")

    def __init__(self):
        self.sink = []
        self.closed = False

    def emit(self, elem):
        self.sink.append(elem)

    def emit_many(self, elems):
        self.sink.extend(elems)

    def close(self):
        self.closed = True


class PhysicalInstance:
    def __init__(self, sched, node, idx):
        self.sched = sched
        self.node = node
        self.idx = idx
        self.key = (node.id, idx)
        self.label = f"{node.id}[{idx}]"
        self.graph = sched.graph
        self.in_edges = sched.graph.in_edges.get(node.id, [])
        self.out_edges = sched.graph.out_edges.get(node.id, [])
        self.out = _Out()
        self.trans = make_transformation(node.op, sched.ctx, node.id, idx,
                                         node.parallelism, self.out)
        sched.ctx.count("instantiate", node.id)
        self.path = []
        self.pos_by_block = {}       # block -> [positions], ascending
        self.ctrl_buf = {}           # first_pos -> blocks
        self.buf = {}                # (edge index, pos) -> [elements]
        self.markers = {}            # (edge index, pos) -> closed senders
        self.pending = deque()       # ("out" | "drop", pos)
        self.watchers = []           # held bags: [edge, pos, elements, next_i]
        self.deferred = None         # (pos, choice bids, elements) on a timer
        self.undecided = deque()     # branch positions this instance decides
        self.own_bags = {}           # pos -> elements (condition nodes)
        self.built_for = None        # BagId loaded into retained slot-0 state
        self._choices = {}           # pos -> input choices, until output done
        self.last_out = 0
        retains = node.kind in ("join", "cross")
        self.build_home = (self.graph.nodes[node.inputs[0]].home_block
                           if retains else None)

    # -- message handling ---------------------------------------------------

    def handle(self, msg):
        if isinstance(msg, ControlMsg):
            self.sched.note_event(self, "control", msg.first_pos)
            self.ctrl_buf[msg.first_pos] = msg.blocks
            while len(self.path) + 1 in self.ctrl_buf:
                for b in self.ctrl_buf.pop(len(self.path) + 1):
                    self.append_block(b)
        elif isinstance(msg, DataMsg):
            k = (msg.edge, msg.pos)
            if msg.elems:
                self.sched.note_event(self, "push-batch", msg.pos)
                self.buf.setdefault(k, []).extend(msg.elems)
            self.sched.note_event(self, "close-in", msg.pos)
            self.markers[k] = self.markers.get(k, 0) + 1
        elif isinstance(msg, TimerMsg):
            self._finish_output(*self.deferred)
            self.deferred = None
        self._progress()

    def append_block(self, block):
        self.path.append(block)
        pos = len(self.path)
        self.pos_by_block.setdefault(block, []).append(pos)
        if self.sched.hoist and block == self.build_home:
            self.pending.append(("drop", pos))
        if block == self.node.home_block:
            self.pending.append(("out", pos))
        if self.idx == 0 and \
                self.graph.cond_vars.get(block) == self.node.id:
            self.undecided.append(pos)
        self._advance_watchers()
        if self.sched.discard:
            self.discard_sweep()

    # -- input choice ---------------------------------------------------------

    def _latest(self, block, pos, strict):
        """Largest own-path position at `block`, ≤ pos (or < pos if strict)."""
        lst = self.pos_by_block.get(block)
        if not lst:
            return None
        i = (bisect_left if strict else bisect_right)(lst, pos) - 1
        return lst[i] if i >= 0 else None

    def choose_inputs(self, pos):
        """Physical-slot choices [(slot, edge, producer position)]."""
        if self.node.kind == "phi":
            best = None
            for slot, e in enumerate(self.in_edges):
                p = self._latest(e.src_home, pos, strict=True)
                if p is not None and (best is None or p > best[2]):
                    best = (slot, e, p)
            assert best is not None, f"{self.label}: phi has no input at {pos}"
            return [best]
        out = []
        for slot, e in enumerate(self.in_edges):
            p = self._latest(e.src_home, pos, strict=False)
            assert p is not None, \
                f"{self.label}: no bag for slot {slot} at {pos}"
            out.append((slot, e, p))
        return out

    def _inputs(self, pos):
        """choose_inputs, cached while the output at `pos` is pending.

        The choice reads only the local path prefix up to `pos`, which is
        final by the time the output is enqueued.
        """
        c = self._choices.get(pos)
        if c is None:
            c = self._choices[pos] = self.choose_inputs(pos)
        return c

    def _complete(self, edge, pos):
        have = self.markers.get((edge.index, pos), 0)
        return have >= self.sched.expected_markers(edge, self.idx)

    # -- output processing ----------------------------------------------------

    def _progress(self):
        if self.deferred is not None:
            return
        while self.pending:
            kind, pos = self.pending[0]
            if kind == "drop":
                self.trans.drop_state()
                self.built_for = None
                self.sched.ctx.count("dropState",
                                     (self.node.id, self.idx, pos))
                self.sched.note_event(self, "drop-state", pos)
                self.pending.popleft()
                continue
            if not self._try_output(pos):
                break
            self.pending.popleft()
            if self.deferred is not None:
                break
        self._maybe_decide()

    def _try_output(self, pos):
        node = self.node
        sched = self.sched
        if node.kind == "source":
            choices = []
        else:
            choices = self._inputs(pos)
        retained = False
        if node.kind in ("join", "cross") and sched.hoist \
                and not self.trans.needs_build():
            slot0 = choices[0]
            bid0 = BagId(slot0[1].src, slot0[2])
            if self.built_for != bid0:
                raise ProtocolError(
                    f"{self.label}: retained state for {self.built_for} "
                    f"but slot 0 chose {bid0}")
            retained = True
        for slot, e, p in choices:
            if retained and slot == 0:
                continue
            if not self._complete(e, p):
                return False
        if sched.barrier and not sched.barrier_ok(pos):
            return False
        if node.kind in ("join", "cross") and not sched.hoist:
            self.trans.drop_state()
            sched.ctx.count("dropState", (node.id, self.idx, pos))
            sched.note_event(self, "drop-state", pos)
        assert pos > self.last_out, f"{self.label}: out of order at {pos}"
        self.last_out = pos
        sched.note_open(self, pos)
        self.out.sink = []
        self.out.closed = False
        self.trans.open_bag()
        bids = []
        for slot, e, p in choices:
            sched.ctx.count("consume", (node.id, self.idx, slot, e.src, p))
            bids.append((slot, BagId(e.src, p)))
            feed_slot = 0 if node.kind == "phi" else slot
            if not (retained and slot == 0):
                batch = self.buf.get((e.index, p))
                if batch:
                    self.trans.push_batch(batch, feed_slot)
            self.trans.close_in(feed_slot)
        if node.kind in ("join", "cross") and not retained:
            self.built_for = bids[0][1]
        assert self.out.closed, f"{self.label}: bag not closed"
        elements = self.out.sink
        sched.budget_spend(len(elements))
        delay = sched.node_delays_ns.get(node.id)
        if delay:
            sched.add_timer(time.monotonic_ns() + delay, self.key)
            self.deferred = (pos, bids, elements)
        else:
            self._finish_output(pos, bids, elements)
        self._choices.pop(pos, None)
        return True

    def _finish_output(self, pos, bids, elements):
        sched = self.sched
        sched.note_close(self, pos)
        sched.record_bag(self.node.id, self.idx, pos, elements, bids)
        for e in self.out_edges:
            if e.conditional:
                self.watchers.append([e, pos, elements, pos + 1])
            else:
                self._send(e, pos, elements)
        self._advance_watchers()
        if self.node.is_condition:
            self.own_bags[pos] = elements

    def _send(self, e, pos, elements):
        sched = self.sched
        receivers = sched.routes[(e.index, self.idx)]
        parts = None                       # broadcast/forward share the list
        if e.partitioning == HASH:
            dst_p = len(receivers)
            parts = {}
            for v in elements:
                parts.setdefault(hash_key(key_of(v)) % dst_p, []).append(v)
        for r in receivers:
            batch = elements if parts is None else parts.get(r, ())
            sched.post((e.dst, r), DataMsg(e.index, self.idx, pos, batch),
                       "data", e.index, self.key)
            sched.stats.data_msgs += 1

    # -- conditional-edge routing ---------------------------------------------

    def _advance_watchers(self):
        if not self.watchers:
            return
        path = self.path
        alive = []
        for w in self.watchers:
            e, pos, elements, i = w
            verdict = None
            while i <= len(path):
                b = path[i - 1]
                if b == e.dst_home:
                    verdict = True
                    break
                if b == e.src_home or b == EXIT_BLOCK or b in e.other_homes:
                    verdict = False
                    break
                i += 1
            if verdict is None:
                w[3] = i
                alive.append(w)
            elif verdict:
                self._send(e, pos, elements)
        self.watchers = alive

    # -- buffered-input discarding ----------------------------------------------

    def discard_sweep(self):
        if not self.buf:
            return
        tail = self.path[-1]
        protected = set()
        for kind, pos in self.pending:
            if kind == "out" and self.node.kind != "source":
                for slot, e, p in self._inputs(pos):
                    protected.add((e.index, p))
        g = self.graph
        for bkey in list(self.buf):
            if bkey in protected:
                continue
            # A bag can arrive before the control stream reaches its
            # position; retention is only decidable once the producing
            # visit is part of the local past.
            if bkey[1] > len(self.path):
                continue
            e = g.edges[bkey[0]]
            newer = self._latest(e.src_home, len(self.path), strict=False)
            if newer > bkey[1]:
                # Input choice always takes the producer's latest visit, so
                # a shadowed bag is dead no matter where the path goes next.
                del self.buf[bkey]
                self.markers.pop(bkey, None)
            elif not g.keep(tail, e.src_home, e.dst_home):
                del self.buf[bkey]
                self.markers.pop(bkey, None)

    # -- branch decisions --------------------------------------------------------

    def _maybe_decide(self):
        while self.undecided:
            pos = self.undecided[0]
            p = self._latest(self.node.home_block, pos, strict=False)
            assert p is not None, f"{self.label}: no condition bag for {pos}"
            if p not in self.own_bags:
                return
            elems = self.own_bags[p]
            if len(elems) != 1 or not isinstance(elems[0], bool):
                raise ExecutionError(
                    f"condition {self.node.id} must hold exactly one "
                    f"boolean, got {len(elems)} element(s)")
            blk = self.graph.cfg.blocks[self.path[pos - 1]]
            nxt = blk.true_succ if elems[0] else blk.false_succ
            self.undecided.popleft()
            self.sched.decide(pos, nxt)

    def finalize(self):
        self.watchers = []
        if self.sched.discard and self.path and \
                self.path[-1] == EXIT_BLOCK:
            self.discard_sweep()
            if self.buf:
                leftover = sorted(self.buf)
                raise ProtocolError(
                    f"{self.label}: {len(leftover)} buffered partitions "
                    f"not discarded at exit: {leftover[:5]}")


class Scheduler:
    def __init__(self, graph, ctx, seed=0, barrier=False, hoist=True,
                 discard=True, delay_plan=None, node_delays_ms=None,
                 budget=ELEMENT_BUDGET, max_path=PATH_BUDGET,
                 record_events=False, stamp_nodes=(), trace_nodes=None):
        self.graph = graph
        self.ctx = ctx
        self.rng = derive_rng("sched", seed)
        self.barrier = barrier
        self.hoist = hoist
        self.discard = discard
        self.record_events = record_events
        self.stamp_nodes = frozenset(stamp_nodes)
        self.trace_nodes = None if trace_nodes is None \
            else frozenset(trace_nodes)
        self._no_delay = delay_plan is None
        self.plan = delay_plan or ZeroDelay()
        self.node_delays_ns = {k: int(v * 1e6)
                               for k, v in (node_delays_ms or {}).items()}
        self.budget = budget
        self.max_path = max_path
        self.stats = RunStats()
        self.path = []
        self.expected = [0]          # bags expected per position (1-based)
        self.closed = [0]
        self.opened = [0]
        self._closed_prefix = 0      # all positions <= this are fully closed
        self._open_positions = Counter()
        self.turn = 0
        self.arrived = []            # deliverable (receiver, msg) envelopes
        self.buckets = {}            # turn -> [(receiver, msg)]
        self.timers = []             # sorted [(wake_ns, seq, receiver)]
        self._spent = 0
        self.trace_bags = {}
        self.trace_choices = {}
        self.instances = {}
        for node in graph.nodes.values():
            ctx.count("deploy", node.id)
            for i in range(node.parallelism):
                self.instances[(node.id, i)] = PhysicalInstance(self, node, i)
        self.stats.instances = len(self.instances)
        # Deployment materializes the routing plan: receiver lists per
        # (edge, sender), per-receiver marker counts, and per-block
        # instance totals for close accounting.
        self.routes = {}
        self.expected_cache = {}
        for e in graph.edges:
            src_p = graph.nodes[e.src].parallelism
            dst_p = graph.nodes[e.dst].parallelism
            for s in range(src_p):
                if e.partitioning == FORWARD:
                    self.routes[(e.index, s)] = (s % dst_p,)
                else:
                    self.routes[(e.index, s)] = tuple(range(dst_p))
            for r in range(dst_p):
                if e.partitioning == FORWARD:
                    exp = sum(1 for s in range(src_p) if s % dst_p == r)
                else:
                    exp = src_p
                self.expected_cache[(e.index, r)] = exp
        self.block_expected = {}
        for nd in graph.nodes.values():
            self.block_expected[nd.home_block] = \
                self.block_expected.get(nd.home_block, 0) + nd.parallelism

    # -- global path --------------------------------------------------------

    def _append_global(self, block):
        self.path.append(block)
        if len(self.path) > self.max_path:
            raise BudgetExceededError(
                f"execution path exceeded {self.max_path} blocks")
        self.expected.append(self.block_expected.get(block, 0))
        self.closed.append(0)
        self.opened.append(0)
        self._advance_prefix()

    def decide(self, pos, next_block):
        assert pos == len(self.path), "decision not at the path frontier"
        self.stats.decisions += 1
        blocks = [next_block]
        if next_block != EXIT_BLOCK:
            blocks.extend(self.graph.cfg.auto_append_chain(next_block))
        for b in blocks:
            self._append_global(b)
        first = pos + 1
        for i in range(0, len(blocks), CTRL_BLOCK_LIMIT):
            chunk = tuple(blocks[i:i + CTRL_BLOCK_LIMIT])
            self.stats.max_ctrl_blocks = max(self.stats.max_ctrl_blocks,
                                             len(chunk))
            for key in self.instances:
                self.post(key, ControlMsg(first + i, chunk), "ctrl")
                self.stats.ctrl_msgs += 1

    # -- messaging ------------------------------------------------------------

    def post(self, receiver, msg, kind, edge=None, sender=None):
        at = self.turn + self.plan.delay(kind, edge, sender, receiver)
        if at <= self.turn:
            self.arrived.append((receiver, msg))
        else:
            self.buckets.setdefault(at, []).append((receiver, msg))

    def add_timer(self, wake_ns, receiver):
        self.timers.append((wake_ns, len(self.timers), receiver))
        self.timers.sort()

    def _promote_timers(self, block_for=None):
        if not self.timers:
            return
        now = time.monotonic_ns()
        if block_for and self.timers[0][0] > now:
            time.sleep((self.timers[0][0] - now) / 1e9)
            now = time.monotonic_ns()
        while self.timers and self.timers[0][0] <= now:
            _, _, receiver = self.timers.pop(0)
            self.arrived.append((receiver, TimerMsg()))

    # -- barrier and overlap accounting -----------------------------------------

    def _advance_prefix(self):
        while self._closed_prefix + 1 < len(self.expected) and \
                self.closed[self._closed_prefix + 1] >= \
                self.expected[self._closed_prefix + 1]:
            self._closed_prefix += 1

    def barrier_ok(self, pos):
        return self._closed_prefix >= pos - 1

    def note_event(self, inst, kind, pos):
        if self.record_events:
            self.stats.events.append((time.monotonic_ns(), inst.label,
                                      kind, pos))

    def note_open(self, inst, pos):
        if self._open_positions and min(self._open_positions) < pos:
            self.stats.overlap_events += 1
        self._open_positions[pos] += 1
        self.opened[pos] += 1
        self.note_event(inst, "open", pos)

    def note_close(self, inst, pos):
        self._open_positions[pos] -= 1
        if not self._open_positions[pos]:
            del self._open_positions[pos]
        self.closed[pos] += 1
        self._advance_prefix()
        if inst.node.id in self.stamp_nodes:
            self.stats.close_stamps.append((pos, time.monotonic_ns()))
        self.note_event(inst, "close-out", pos)

    # -- trace collection ---------------------------------------------------------

    def record_bag(self, node_id, idx, pos, elements, bids):
        bid = BagId(node_id, pos)
        bucket = self.trace_bags.get(bid)
        if bucket is None:
            bucket = self.trace_bags[bid] = Counter()
        bucket.update(elements)
        prior = self.trace_choices.get(bid)
        if prior is None:
            self.trace_choices[bid] = bids
        elif prior != bids:
            raise ProtocolError(
                f"{node_id}[{idx}]: instances disagree on inputs of {bid}: "
                f"{prior} vs {bids}")

    def budget_spend(self, n):
        self._spent += n
        if self._spent > self.budget:
            raise BudgetExceededError(
                f"run exceeded {self.budget} bag elements")

    # -- main loop -------------------------------------------------------------

    def run(self):
        t0 = time.monotonic_ns()
        boot = [self.graph.cfg.entry] + \
            self.graph.cfg.auto_append_chain(self.graph.cfg.entry)
        for b in boot:
            self._append_global(b)
        for inst in self.instances.values():
            for b in boot:
                inst.append_block(b)
        for inst in self.instances.values():
            inst._progress()
        while True:
            self._promote_timers()
            if not self.arrived:
                if self.buckets:
                    t = min(self.buckets)
                    self.turn = max(self.turn, t)
                    self.arrived.extend(self.buckets.pop(t))
                    continue
                if self.timers:
                    self._promote_timers(block_for=True)
                    continue
                # A barrier clears when the closed prefix advances, which
                # happens without any message to the blocked instance.  Before
                # declaring quiescence, re-drive every instance until a full
                # sweep neither posts messages nor completes work.
                if self._sweep():
                    continue
                break
            i = int(self.rng.random() * len(self.arrived))
            self.arrived[i], self.arrived[-1] = \
                self.arrived[-1], self.arrived[i]
            receiver, msg = self.arrived.pop()
            self.turn += 1
            self.stats.turns += 1
            if self.turn in self.buckets:
                self.arrived.extend(self.buckets.pop(self.turn))
            self.instances[receiver].handle(msg)
        self._check_done()
        for inst in self.instances.values():
            inst.finalize()
        self.stats.wallclock_ns = time.monotonic_ns() - t0
        return self._build_trace()

    def _sweep(self):
        """Progress all instances; True if any message is now queued."""
        while True:
            mark = tuple((len(i.pending), i.deferred is None,
                          len(i.undecided)) for i in self.instances.values())
            for inst in self.instances.values():
                inst._progress()
            if self.arrived or self.buckets or self.timers:
                return True
            after = tuple((len(i.pending), i.deferred is None,
                           len(i.undecided)) for i in self.instances.values())
            if after == mark:
                return False

    def _check_done(self):
        tail = self.path[-1]
        terminal = tail == EXIT_BLOCK or \
            not self.graph.cfg.blocks[tail].successors()
        stuck = []
        for inst in self.instances.values():
            if inst.pending or inst.deferred or inst.undecided:
                head = inst.pending[0] if inst.pending else \
                    ("deferred" if inst.deferred else
                     ("decision", inst.undecided[0]))
                stuck.append(f"{inst.label} at {head}")
        if not terminal or stuck:
            detail = "; ".join(stuck[:8]) or "no runnable instance"
            raise DeadlockError(
                f"quiescent with unfinished work (path tail {tail}): "
                f"{detail}")

    def _build_trace(self):
        t = ExecutionTrace(path=list(self.path))
        t.bags = self.trace_bags
        t.input_choices = self.trace_choices
        for bid in sorted(self.trace_bags):
            t.node_order.setdefault(bid.node, []).append(bid.pos)
        t.side_effects = {name: Counter(elems)
                          for name, elems in self.ctx.side_effects.items()}
        return t

    def expected_markers(self, edge, ridx):
        return self.expected_cache[(edge.index, ridx)]


def run_parallel(graph, ctx, seed=0, barrier=False, hoist=True, discard=True,
                 delay_plan=None, node_delays_ms=None,
                 budget=ELEMENT_BUDGET, max_path=PATH_BUDGET,
                 record_events=False, stamp_nodes=()):
    sched = Scheduler(graph, ctx, seed=seed, barrier=barrier, hoist=hoist,
                      discard=discard, delay_plan=delay_plan,
                      node_delays_ms=node_delays_ms, budget=budget,
                      max_path=max_path, record_events=record_events,
                      stamp_nodes=stamp_nodes)
    trace = sched.run()
    return RunResult(trace=trace, stats=sched.stats, ctx=ctx)
