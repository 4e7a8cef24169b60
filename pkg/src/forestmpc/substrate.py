"""Deterministic lockstep simulation of the low-space MPC model.

Machines with a bounded word budget host blocks of nodes (sorted by node id).
Algorithms advance in synchronous rounds: all messages produced in round t are
delivered at the t/t+1 boundary.  The simulator keeps a memory ledger (stored
words per machine, transient message volume, peaks) and a round counter so the
higher-level algorithms can be checked against their round/memory budgets.

Two execution styles are supported and may be mixed:

* routed rounds (`run_round` / `exchange`): real per-node messages, charged
  word by word, delivered next round;
* bulk rounds (`tick`): the algorithm computes the effect of a round centrally
  and charges the aggregate message volume arithmetically.  Used for fixed
  O(1)-word-per-node control waves where object routing adds nothing.

Both styles are deterministic: nodes are always processed in sorted id order
and inboxes are sorted by sender.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field


class MemoryExceeded(RuntimeError):
    """A machine exceeded a word cap while strict_mode is on."""

    def __init__(self, round_no, machine, kind):
        super().__init__(f"round {round_no}: machine {machine} exceeded {kind} cap")
        self.round_no = round_no
        self.machine = machine
        self.kind = kind


class RoutingError(RuntimeError):
    """A message was addressed to a node the simulator does not host."""


@dataclass
class MachineConfig:
    """Static description of the simulated machine cluster.

    local_words is the per-machine storage cap S = ceil(c_loc * n**delta);
    bandwidth_words caps per-round send and receive volume per machine and
    defaults to local_words.  With strict_mode off, cap breaches are recorded
    in the ledger instead of raised.
    """

    n: int
    delta: float = 0.5
    c_loc: float = 4.0
    machine_count: int | None = None
    bandwidth_words: int | None = None
    strict_mode: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if not (0.0 < self.delta < 1.0):
            raise ValueError("delta must lie in (0,1)")
        self.local_words = max(1, math.ceil(self.c_loc * self.n ** self.delta))
        if self.machine_count is None:
            # enough machines to hold the densest forest input (m <= n-1)
            self.machine_count = max(1, math.ceil(2 * self.n / self.local_words))
        if self.machine_count < 1:
            raise ValueError("machine_count must be positive")
        if self.bandwidth_words is None:
            self.bandwidth_words = self.local_words

    def validate_for_input(self, n_nodes, m_edges):
        """Reject configurations that cannot even store the input graph."""
        if self.machine_count * self.local_words < n_nodes + m_edges:
            raise ValueError(
                f"machine_count*local_words={self.machine_count * self.local_words} "
                f"cannot hold input of {n_nodes + m_edges} words"
            )

    @property
    def fanout(self):
        return max(2, math.ceil(self.n ** (self.delta / 2)))


@dataclass
class MemoryLedger:
    """Word counts per machine plus running peaks and cap violations."""

    machine_count: int
    per_machine_used: list = field(default_factory=list)
    global_used: int = 0
    peak_local: int = 0
    peak_global: int = 0
    message_words_this_round: list = field(default_factory=list)
    violations: list = field(default_factory=list)

    def __post_init__(self):
        if not self.per_machine_used:
            self.per_machine_used = [0] * self.machine_count
        if not self.message_words_this_round:
            self.message_words_this_round = [0] * self.machine_count

    def snapshot(self):
        return {
            "peak_local_words": self.peak_local,
            "peak_global_words": self.peak_global,
            "global_words": self.global_used,
            "violations": list(self.violations),
        }


@dataclass
class RoundStats:
    rounds_elapsed: int = 0
    phase_markers: list = field(default_factory=list)
    messages_total: int = 0

    def mark(self, label):
        self.phase_markers.append((label, self.rounds_elapsed))

    def snapshot(self):
        return {
            "rounds": self.rounds_elapsed,
            "phases": [{"label": l, "round": r} for l, r in self.phase_markers],
            "messages_total": self.messages_total,
        }


def payload_words(obj):
    """Word count of a message payload: atoms are one word, containers sum."""
    if obj is None:
        return 0
    if isinstance(obj, (int, float, bool, str, bytes)):
        return 1
    if isinstance(obj, dict):
        return sum(payload_words(k) + payload_words(v) for k, v in obj.items())
    try:
        return sum(payload_words(x) for x in obj)
    except TypeError:
        return 1


class AggTree:
    """Constant-depth machine tree over lexicographically sorted set elements.

    The collection A_1..A_k is flattened in (set index, element) order, cut
    into machine-sized leaf blocks, and covered by a tree of fanout at most
    ceil(n**(delta/2)).  Reduce folds leaf summaries to the root, broadcast
    pushes a value back to every leaf; each costs at most depth+1 rounds.
    """

    def __init__(self, sets, fanout, capacity):
        self.fanout = fanout
        flat = []
        for i, s in enumerate(sets):
            for x in sorted(s):
                flat.append((i, x))
        flat.sort()
        self.elements = flat
        blocks = max(1, math.ceil(len(flat) / max(1, capacity)))
        self.leaf_blocks = [flat[b * capacity:(b + 1) * capacity] for b in range(blocks)] if flat else [[]]
        self.leaf_assignment = list(range(len(self.leaf_blocks)))
        depth = 0
        width = len(self.leaf_blocks)
        while width > 1:
            width = math.ceil(width / fanout)
            depth += 1
        self.depth = depth

    def in_order_elements(self):
        out = []
        for block in self.leaf_blocks:
            out.extend(block)
        return out


class MpcSim:
    """Round/ledger bookkeeping shared by every distributed routine."""

    def __init__(self, config: MachineConfig, node_ids):
        self.config = config
        self.ledger = MemoryLedger(config.machine_count)
        self.stats = RoundStats()
        ids = sorted(node_ids)
        self._machine_of = {}
        block = max(1, math.ceil(len(ids) / config.machine_count)) if ids else 1
        for idx, v in enumerate(ids):
            self._machine_of[v] = idx // block
        self._stored = {v: 0 for v in ids}
        self._pending = {}

    # -- hosting ---------------------------------------------------------

    def machine_of(self, v):
        try:
            return self._machine_of[v]
        except KeyError:
            raise RoutingError(f"unknown node {v}")

    def add_node(self, v):
        if v not in self._machine_of:
            self._machine_of[v] = hash(v) % self.config.machine_count
            self._stored[v] = 0

    # -- storage ledger ---------------------------------------------------

    def set_words(self, v, words):
        """Set node v's stored word count; deltas are charged to its machine."""
        m = self.machine_of(v)
        delta = words - self._stored[v]
        if delta:
            self._stored[v] = words
            self.ledger.per_machine_used[m] += delta
            self.ledger.global_used += delta

    def add_words(self, v, delta):
        self.set_words(v, self._stored[v] + delta)

    def stored_words(self, v):
        return self._stored[v]

    def _roll_peaks(self, transient_per_machine=None):
        led = self.ledger
        peak_l = max(led.per_machine_used) if led.per_machine_used else 0
        trans_total = 0
        if transient_per_machine:
            for m, w in transient_per_machine.items():
                peak_l = max(peak_l, led.per_machine_used[m] + w)
                trans_total += w
        led.peak_local = max(led.peak_local, peak_l)
        led.peak_global = max(led.peak_global, led.global_used + trans_total)

    def _check_cap(self, machine, used, cap, kind):
        if used > cap:
            self.ledger.violations.append((self.stats.rounds_elapsed, machine, kind))
            if self.config.strict_mode:
                raise MemoryExceeded(self.stats.rounds_elapsed, machine, kind)

    # -- rounds -----------------------------------------------------------

    def run_round(self, step, participants=None):
        """Execute one synchronous round.

        ``step(v, inbox)`` is a pure function of node v's prior state and its
        delivered messages; it returns an iterable of (dest, payload) sends.
        Sends are delivered at the round boundary (i.e. visible to the *next*
        round's inboxes).  The result is independent of evaluation order
        because inboxes are frozen before any step runs.
        """
        inboxes = self._pending
        self._pending = {}
        if participants is None:
            nodes = sorted(set(self._stored) | set(inboxes))
        else:
            nodes = sorted(set(participants) | set(inboxes))
        send_w = {}
        recv_w = {}
        out_total = 0
        for v in nodes:
            inbox = inboxes.get(v, ())
            sends = step(v, inbox) or ()
            mv = self.machine_of(v)
            for dest, payload in sends:
                if dest not in self._machine_of:
                    raise RoutingError(f"message from {v} to unknown node {dest}")
                w = payload_words(payload)
                out_total += w
                send_w[mv] = send_w.get(mv, 0) + w
                md = self.machine_of(dest)
                recv_w[md] = recv_w.get(md, 0) + w
                self._pending.setdefault(dest, []).append((v, payload))
        for box in self._pending.values():
            box.sort(key=lambda t: t[0])
        self.stats.messages_total += out_total
        self.stats.rounds_elapsed += 1
        led = self.ledger
        led.message_words_this_round = [0] * self.config.machine_count
        for m, w in send_w.items():
            led.message_words_this_round[m] += w
            self._check_cap(m, w, self.config.bandwidth_words, "bandwidth_send")
        for m, w in recv_w.items():
            self._check_cap(m, w, self.config.bandwidth_words, "bandwidth_recv")
        for m, used in enumerate(led.per_machine_used):
            self._check_cap(m, used, self.config.local_words, "local_memory")
        self._roll_peaks(recv_w)
        return out_total

    def exchange(self, sends_by_node):
        """One routed round from precomputed sends; returns delivered inboxes."""
        def step(v, inbox):
            return sends_by_node.get(v, ())
        self.run_round(step, participants=sends_by_node.keys())
        delivered = self._pending
        self._pending = {}
        return delivered

    def tick(self, rounds=1, message_words=0, transient_words=0):
        """Advance rounds with aggregate (bulk) message charging."""
        for _ in range(rounds):
            self.stats.rounds_elapsed += 1
        self.stats.messages_total += message_words
        if transient_words:
            self.ledger.peak_global = max(
                self.ledger.peak_global, self.ledger.global_used + transient_words
            )
        for m, used in enumerate(self.ledger.per_machine_used):
            self._check_cap(m, used, self.config.local_words, "local_memory")
        self._roll_peaks()

    # -- aggregation tree primitives --------------------------------------

    def build_aggregation_tree(self, sets):
        total = sum(len(s) for s in sets)
        cap = self.config.machine_count * self.config.local_words
        if total > cap:
            self.ledger.violations.append((self.stats.rounds_elapsed, -1, "global_memory"))
            if self.config.strict_mode:
                raise MemoryExceeded(self.stats.rounds_elapsed, -1, "global_memory")
        tree = AggTree(sets, self.config.fanout, self.config.local_words)
        if tree.depth > math.ceil(2 / self.config.delta) + 1:
            raise AssertionError("aggregation tree deeper than ceil(2/delta)+1")
        self.tick(rounds=2 * tree.depth, message_words=total if tree.depth else 0)
        return tree

    def agg_reduce(self, tree, values, combine):
        """Fold ``values`` (one per leaf block or flat list) to the root."""
        flat = list(values)
        if not flat:
            self.tick(rounds=tree.depth + 1)
            return None
        acc = flat[0]
        for x in flat[1:]:
            acc = combine(acc, x)
        self.tick(rounds=tree.depth + 1, message_words=len(flat))
        return acc

    def agg_broadcast(self, tree, value):
        self.tick(rounds=tree.depth + 1, message_words=max(1, len(tree.leaf_blocks)))
        return [value for _ in tree.leaf_blocks]

    # -- reporting ---------------------------------------------------------

    def stats_json(self):
        out = self.stats.snapshot()
        led = self.ledger.snapshot()
        out["peak_local_words"] = led["peak_local_words"]
        out["peak_global_words"] = led["peak_global_words"]
        out["violations"] = [list(v) for v in led["violations"]]
        return out

    def dump_stats(self, path):
        with open(path, "w") as fh:
            json.dump(self.stats_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")
