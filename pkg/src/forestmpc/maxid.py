"""Max-identifier spreading on trees via balanced exponentiation.

The pipeline alternates two compression steps until each component is a
single node, then unwinds them in reverse to broadcast the surviving id:

* ``compress_light_subtrees``: every node grows a direction-partitioned view
  of the tree by exponentiating in all but the (probed) largest direction;
  nodes that verify a small complete side become *happy* and their subtrees
  are folded into the adjacent *unhappy* node.
* ``compress_paths``: maximal degree-2 runs learn themselves by uniform
  exponentiation and collapse into a single replacement edge.

Per-node views are genuinely local: a node only ever incorporates what
arrived in messages, and every wave is two-pass (collect responses from the
pre-wave state, then merge) so results are independent of evaluation order.
The one simulator-supplied shortcut is direction lookup
(``PhaseGraph.direction``), standing in for in-band routing metadata that
would pin down which neighbor a message travelled through.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

ACTIVE = "active"
HAPPY = "happy"
FULL = "full"
SAD = "sad"


class PhaseFailure(RuntimeError):
    """A phase could not finish within its budget (diameter guess too small)."""


class NotATree(ValueError):
    pass


class CorruptLog(RuntimeError):
    pass


@dataclass
class CompressEvent:
    """One compression: ``absorbed`` (and its incident edges) left the graph,
    ``absorber`` kept the set until the matching decompression.

    For path events ``absorbed`` is listed in path order starting next to the
    absorber, and ``added_edges`` holds the replacement edge."""

    phase: int
    step: str  # subtree | pair_merge | path
    absorber: int
    absorbed: list
    removed_edges: list = field(default_factory=list)
    added_edges: list = field(default_factory=list)


class PhaseGraph:
    """Mutable forest under compression.

    Alive nodes keep live-only adjacency sets; a dying node's set is frozen
    at death, so decompression can restore interior edges without a separate
    topology log.
    """

    def __init__(self, forest):
        self.adj = {v: set(forest.adj[v]) for v in forest.adj}
        self.alive = dict.fromkeys(self.adj, True)
        self.idval = {v: v for v in self.adj}
        self.retained_words = {}
        self._index = None

    def degree(self, v):
        return len(self.adj[v])

    def alive_nodes(self):
        return [v for v, a in self.alive.items() if a]

    def components(self):
        seen = set()
        comps = []
        for s in sorted(self.adj):
            if not self.alive[s] or s in seen:
                continue
            comp = []
            q = deque([s])
            seen.add(s)
            while q:
                v = q.popleft()
                comp.append(v)
                for u in self.adj[v]:
                    if u not in seen:
                        seen.add(u)
                        q.append(u)
            comps.append(comp)
        return comps

    # -- surgery -----------------------------------------------------------

    def apply_event(self, ev: CompressEvent):
        gone = set(ev.absorbed)
        for x in ev.absorbed:
            self.alive[x] = False
        for x in ev.absorbed:
            for u in self.adj[x]:
                if u not in gone and self.alive.get(u, False):
                    self.adj[u].discard(x)
        for a, b in ev.added_edges:
            self.adj[a].add(b)
            self.adj[b].add(a)
        best = self.idval[ev.absorber]
        for x in ev.absorbed:
            if self.idval[x] > best:
                best = self.idval[x]
        self.idval[ev.absorber] = best
        self._index = None

    def undo_event(self, ev: CompressEvent, spread_id=True):
        if not self.alive.get(ev.absorber, False):
            raise CorruptLog(f"absorber {ev.absorber} dead during decompression")
        for a, b in ev.added_edges:
            self.adj[a].discard(b)
            self.adj[b].discard(a)
        for x in ev.absorbed:
            self.alive[x] = True
        for x in ev.absorbed:
            for u in self.adj[x]:
                self.adj[u].add(x)
        if spread_id:
            label = self.idval[ev.absorber]
            for x in ev.absorbed:
                self.idval[x] = label
        self._index = None

    # -- direction lookup ---------------------------------------------------

    def _build_index(self):
        parent, tin, tout = {}, {}, {}
        t = 0
        for comp_root in sorted(self.adj):
            if not self.alive[comp_root] or comp_root in tin:
                continue
            stack = [(comp_root, None, False)]
            while stack:
                v, par, processed = stack.pop()
                if processed:
                    tout[v] = t
                    continue
                if v in tin:
                    continue
                parent[v] = par
                tin[v] = t
                t += 1
                stack.append((v, par, True))
                for u in sorted(self.adj[v], reverse=True):
                    if u != par:
                        stack.append((u, v, False))
        children = {}
        for v, par in parent.items():
            if par is not None:
                children.setdefault(par, []).append(v)
        for v in children:
            children[v].sort(key=lambda c: tin[c])
        self._index = (parent, tin, tout, children)

    def direction(self, w, v):
        """The neighbor of w on the unique alive path from w to v."""
        if self._index is None:
            self._build_index()
        parent, tin, tout, children = self._index
        if tin[w] < tin[v] < tout[w]:
            kids = children.get(w, ())
            lo, hi = 0, len(kids) - 1
            while lo < hi:
                mid = (lo + hi + 1) // 2
                if tin[kids[mid]] <= tin[v]:
                    lo = mid
                else:
                    hi = mid - 1
            return kids[lo]
        return parent[w]


def _record_words(nbrs):
    return 1 + (len(nbrs) if nbrs is not None else 1)


class KnowledgeSets:
    """Direction-partitioned views S_v for every node of a phase graph.

    Per node: ``info[x] = (direction, neighbor-tuple-or-None)`` for every
    known node x (owner excluded), per-direction counters, and open-half-edge
    bookkeeping used to verify that a side is completely known.  Nodes whose
    degree exceeds light+1 are sad from the start and never advertise their
    neighbor list; records about them stay permanently open, which is sound
    because any side containing them is too large to be a happy side anyway.
    """

    def __init__(self, pg: PhaseGraph, light, full, sim=None, skip=None):
        self.pg = pg
        self.light = light
        self.full = full
        self.sim = sim
        skip = skip or ()
        nodes = [v for v in pg.alive_nodes() if v not in skip]
        self.role = {}
        self.info = {}
        self.dsize = {}
        self.dopen = {}
        self.waiters = {}
        self.happy_dirs = {}
        self.pending_sym = {}
        self.happy_set = set()
        self._share = {}
        sorted_adj = {}
        for v in nodes:
            self.role[v] = SAD if pg.degree(v) > light + 1 else ACTIVE
            self.info[v] = {}
            self.dsize[v] = {}
            self.dopen[v] = {}
            self.waiters[v] = {}
            self.happy_dirs[v] = set()
            self.pending_sym[v] = {}
            sorted_adj[v] = tuple(sorted(pg.adj[v]))
            self._share[v] = None if self.role[v] == SAD else sorted_adj[v]
        for v in nodes:
            for u in sorted_adj[v]:
                self._add_record(v, u, u, self._share.get(u))

    def shared_nbrs(self, u):
        """The neighbor list u advertises (None once it is sad-by-degree)."""
        try:
            return self._share[u]
        except KeyError:
            val = None if self.role.get(u) == SAD else tuple(sorted(self.pg.adj[u]))
            self._share[u] = val
            return val

    # -- view bookkeeping ---------------------------------------------------

    def _add_record(self, v, x, direction, nbrs):
        info = self.info[v]
        if x in info or x == v:
            return 0
        info[x] = (direction, nbrs)
        self.dsize[v][direction] = self.dsize[v].get(direction, 0) + 1
        if self.role[v] != SAD:
            # open-half-edge bookkeeping feeds happiness checks only, which
            # sad nodes never run
            dopen = self.dopen[v]
            waiting = self.waiters[v].pop(x, None)
            if waiting:
                for d, c in waiting.items():
                    dopen[d] -= c
            if nbrs is None:
                dopen[direction] = dopen.get(direction, 0) + 1
            else:
                for y in nbrs:
                    if y == v or y in info:
                        continue
                    dopen[direction] = dopen.get(direction, 0) + 1
                    wy = self.waiters[v].setdefault(y, {})
                    wy[direction] = wy.get(direction, 0) + 1
        if self.sim is not None:
            self.sim.add_words(v, _record_words(nbrs))
        return 1

    def size(self, v):
        return len(self.info[v])

    def members(self, v):
        return set(self.info[v])

    def side(self, v, u):
        """S_{v->u}: known nodes filed under direction u (u included)."""
        return {x for x, (d, _) in self.info[v].items() if d == u}

    def side_away(self, v, u):
        """S_{v not-> u} as stored (owner excluded)."""
        return {x for x, (d, _) in self.info[v].items() if d != u}

    def away_size(self, v, u):
        return len(self.info[v]) - self.dsize[v].get(u, 0)

    def complete_dirs(self, v):
        """Directions u whose away-side is fully known and at most light-sized."""
        out = []
        total_open = sum(self.dopen[v].values())
        for u in sorted(self.pg.adj[v]):
            if 1 + self.away_size(v, u) > self.light:
                continue
            if total_open - self.dopen[v].get(u, 0) == 0:
                out.append(u)
        return out

    def content(self, w, away_from):
        """Records w transmits for a query arriving from ``away_from``."""
        return [(x, nbrs) for x, (d, nbrs) in sorted(self.info[w].items())
                if d != away_from]

    def _check_full(self, v):
        if self.role[v] == ACTIVE and self.size(v) >= self.full:
            self.role[v] = FULL

    # -- Exp and probing ----------------------------------------------------

    def collect_exp(self, v, dirs):
        """Pass 1 of Exp(dirs): gather every responder's away-view without
        touching any state.  Returns [(direction, records)] per responder."""
        if not dirs:
            return []
        out = []
        for w, (d, _) in sorted(self.info[v].items()):
            if d in dirs and w in self.info:
                out.append((d, self.content(w, self.pg.direction(w, v))))
        return out

    def apply_exp(self, v, payload):
        """Pass 2 of Exp: merge collected responses into v's view.  Newly
        learned nodes are filed under the query direction and a symmetry
        notification is queued toward each of them."""
        gained = 0
        share = tuple(sorted(self.pg.adj[v]))
        for d, records in payload:
            for x, nbrs in records:
                if self._add_record(v, x, d, nbrs):
                    gained += 1
                    if x in self.pending_sym:
                        self.pending_sym[x][v] = share
        self._check_full(v)
        return gained

    def exp(self, v, dirs):
        """The Exp primitive against the current state (unit-level API)."""
        gained = self.apply_exp(v, self.collect_exp(v, dirs))
        return gained

    def drain_symmetry(self, v):
        """Step 1(d)ii: absorb every queued "I know you" notification."""
        pending = self.pending_sym[v]
        self.pending_sym[v] = {}
        for w in sorted(pending):
            if w in self.info[v] or not self.pg.alive.get(w, False):
                continue
            self._add_record(v, w, self.pg.direction(v, w), pending[w])
        self._check_full(v)

    def probe_scores(self, v):
        """B_{v->u} per neighbor: overcounting estimates of what a full
        exponentiation would bring in from each direction."""
        b = {u: 0 for u in sorted(self.pg.adj[v])}
        for w, (d, _) in self.info[v].items():
            if w in self.info:
                b[d] += self.size(w) - self.dsize[w].get(self.pg.direction(w, v), 0)
        return b

    def probe_directions(self, v, dhat):
        """Probe all directions; may run the sanctioned full exponentiation
        when no direction dominates.  Returns (full_dirs, largest_dir)."""
        b = self.probe_scores(v)
        full_dirs, needs_exp, largest = classify_probe(b, self.light, dhat)
        if needs_exp:
            self.exp(v, set(self.pg.adj[v]))
            largest = self.largest_known_dir(v)
        return full_dirs, largest

    def largest_known_dir(self, v):
        best, arg = -1, None
        for u in sorted(self.pg.adj[v]):
            s = self.dsize[v].get(u, 0)
            if s > best:
                best, arg = s, u
        return arg


def classify_probe(b, light, dhat):
    """fullDirs / largestDir decision from probe scores.

    Returns (full_dirs, needs_full_exp, largest_dir); largest_dir is None
    when full_dirs is nonempty or when the full exponentiation must decide."""
    nbrs = sorted(b)
    threshold = light * dhat
    full_dirs = [u for u in nbrs if b[u] >= threshold]
    if full_dirs:
        return full_dirs, False, None
    u_max = nbrs[0]
    for u in nbrs:
        if b[u] > b[u_max]:
            u_max = u
    if all(b[u_max] >= dhat * b[u] for u in nbrs if u != u_max):
        return [], False, u_max
    return [], True, None


def bootstrap_knowledge(forest_or_pg, light, full):
    """Fresh knowledge sets over a forest (unit-level entry point)."""
    pg = forest_or_pg if isinstance(forest_or_pg, PhaseGraph) else PhaseGraph(forest_or_pg)
    return KnowledgeSets(pg, light, full)


# -- CompressLightSubTrees ----------------------------------------------------


def iteration_budget(dhat, c_iter=4):
    return c_iter * (math.ceil(math.log2(max(dhat, 2))) + 1)


def path_iteration_budget(dhat, c_iter=4):
    return max(1, c_iter * math.ceil(math.log2(max(dhat, 2))))


def phase_budget(n, light):
    """Phases until a forest must be down to singletons: the per-phase shrink
    factor is at least 1 + light/2 while at least two heavy nodes remain,
    plus two closing phases."""
    if n <= 1:
        return 1
    return math.ceil(math.log(n) / math.log(1 + light / 2)) + 2


def compress_light_subtrees(pg, dhat, light, full, sim=None, phase=0,
                            c_iter=4, checks=None, skip=None):
    """One light-subtree compression pass over every alive component.

    Returns the CompressEvents applied (empty when nothing was compressible,
    which the caller interprets as failure of the current dhat guess)."""
    ks = KnowledgeSets(pg, light, full, sim=sim, skip=skip)
    if sim is not None:
        words = sum(_record_words(nb) for v in ks.info
                    for (_, nb) in ks.info[v].values())
        sim.tick(rounds=1, message_words=words)
    iters = iteration_budget(dhat, c_iter)
    if checks:
        checks.phase_start(pg, phase, ks)
    active = sorted(v for v, r in ks.role.items()
                    if r == ACTIVE and pg.degree(v) > 0)
    for it in range(iters):
        active = _cls_iteration(ks, dhat, active, sim, checks)
        if checks:
            checks.iteration_end(ks, it)
    events = _cls_compress_happy(ks, phase, sim)
    if sim is not None:
        sim.tick(rounds=4, message_words=2 * sum(len(e.absorbed) for e in events))
        for v in ks.role:
            sim.set_words(v, pg.retained_words.get(v, 0))
    if checks:
        checks.phase_end(pg, phase, events)
    return events


def _cls_iteration(ks, dhat, active, sim, checks):
    pg = ks.pg
    msg = 0
    # probe wave: scores from the pre-wave state
    decisions = {}
    for v in active:
        b = ks.probe_scores(v)
        msg += 2 * ks.size(v)
        decisions[v] = (b,) + classify_probe(b, ks.light, dhat)
    for v in active:
        b, full_dirs, needs_exp, largest = decisions[v]
        if len(full_dirs) >= 2:
            ks.role[v] = SAD
    # sanctioned full exponentiation inside probing (step 3(b)), two-pass
    exp3b = [v for v in active if ks.role[v] == ACTIVE and decisions[v][2]]
    payloads = {v: ks.collect_exp(v, set(pg.adj[v])) for v in exp3b}
    for v in exp3b:
        if checks:
            received = {}
            for d, records in payloads[v]:
                received.setdefault(d, set()).update(x for x, _ in records)
            received = {d: len(s - {v}) for d, s in received.items()}
        msg += ks.apply_exp(v, payloads[v]) * 2 + len(payloads[v])
        b = decisions[v][0]
        decisions[v] = (b, [], False, ks.largest_known_dir(v))
        if checks:
            checks.probe_sandwich(ks, v, b, received=received)
    # main exponentiation wave, two-pass
    mainexp = []
    for v in active:
        if ks.role[v] != ACTIVE:
            continue
        b, full_dirs, _, largest = decisions[v]
        spared = set(full_dirs) if full_dirs else {largest}
        dirs = set(pg.adj[v]) - spared
        mainexp.append((v, dirs, not full_dirs))
    payloads = {v: ks.collect_exp(v, dirs) for v, dirs, _ in mainexp}
    for v, dirs, repair in mainexp:
        msg += ks.apply_exp(v, payloads[v]) * 2 + len(payloads[v])
        if repair:
            ks.drain_symmetry(v)
    # happiness wave: roles snapshotted before anyone flips
    happy_before = set(ks.happy_set)
    newly_happy = []
    for v in active:
        if ks.role[v] != ACTIVE:
            continue
        msg += ks.size(v)
        done = ks.complete_dirs(v)
        if not done:
            offers = {}
            for w, (d, _) in sorted(ks.info[v].items()):
                if w not in happy_before:
                    continue
                toward_me = pg.direction(w, v)
                if toward_me not in ks.happy_dirs[w]:
                    continue
                recs = ks.content(w, toward_me) + [(w, tuple(sorted(pg.adj[w])))]
                offers.setdefault(d, []).extend(recs)
                msg += 1 + len(recs)
            if offers:
                trial = _trial_completion(ks, v, offers)
                if trial is not None:
                    _, commit_dirs = trial
                    for d in commit_dirs:
                        for x, nb in offers.get(d, ()):
                            ks._add_record(v, x, d, nb)
                    ks._check_full(v)
                    done = ks.complete_dirs(v)
        if done and ks.role[v] == ACTIVE:
            ks.role[v] = HAPPY
            ks.happy_dirs[v] = set(done)
            newly_happy.append(v)
    ks.happy_set.update(newly_happy)
    if sim is not None:
        sim.tick(rounds=9, message_words=msg, transient_words=msg)
    return [v for v in active if ks.role[v] == ACTIVE]


def _trial_completion(ks, v, offers):
    """Would absorbing the offered happy subtrees complete some side of v?
    Returns (completing direction, offer directions to commit) or None."""
    base = ks.info[v]
    for u in sorted(ks.pg.adj[v]):
        extra = {}
        for d, recs in offers.items():
            if d == u:
                continue
            for x, nb in recs:
                if x != v and x not in base and x not in extra:
                    extra[x] = (d, nb)
        size = 1 + ks.away_size(v, u) + len(extra)
        if size > ks.light:
            continue
        known = set(base) | set(extra)
        open_edges = 0
        verifiable = True
        for x in known:
            d, nb = base.get(x) or extra[x]
            if d == u:
                continue
            if nb is None:
                verifiable = False
                break
            for y in nb:
                if y != v and y not in known:
                    open_edges += 1
        if verifiable and open_edges == 0:
            return u, sorted(d for d in offers if d != u)
    return None


def _cls_compress_happy(ks, phase, sim):
    """Steps 2 and 3: fold happy subtrees into unhappy neighbors, then merge
    mutually happy pairs (the all-light case)."""
    pg = ks.pg
    events = []
    handled = set()
    happy_nodes = sorted(ks.happy_set)
    for v in happy_nodes:
        if v in handled:
            continue
        for u in sorted(ks.happy_dirs[v]):
            if ks.role.get(u) == HAPPY:
                continue
            away = sorted(ks.side_away(v, u) | {v})
            ev = CompressEvent(phase=phase, step="subtree", absorber=u,
                               absorbed=away, removed_edges=[(v, u)])
            pg.apply_event(ev)
            events.append(ev)
            handled.update(away)
            _charge_absorb(pg, sim, u, away)
            break
    merged = set()
    for v in happy_nodes:
        if v in merged or not pg.alive[v]:
            continue
        for u in sorted(ks.happy_dirs[v]):
            if ks.role.get(u) != HAPPY or not pg.alive.get(u, False):
                continue
            if v not in ks.happy_dirs[u]:
                continue
            whole = ks.side_away(v, u) | ks.side_away(u, v) | {v, u}
            winner = max(whole)
            absorbed = sorted(whole - {winner})
            ev = CompressEvent(phase=phase, step="pair_merge", absorber=winner,
                               absorbed=absorbed)
            pg.apply_event(ev)
            events.append(ev)
            merged.update(whole)
            _charge_absorb(pg, sim, winner, absorbed)
            break
    return events


def _charge_absorb(pg, sim, absorber, absorbed):
    pg.retained_words[absorber] = pg.retained_words.get(absorber, 0) + 2 * len(absorbed)
    if sim is not None:
        sim.add_words(absorber, 2 * len(absorbed))
        for x in absorbed:
            sim.set_words(x, pg.retained_words.get(x, 0))


# -- CompressPaths -------------------------------------------------------------


def _interval_sum(length, r):
    """sum over positions p of the interval [p-r, p+r] clipped to the run,
    minus the node itself: total stored ids at radius r."""
    total = 0
    for p in range(length):
        total += min(length - 1, p + r) - max(0, p - r)
    return total


def find_paths(pg):
    """Maximal runs of alive degree-2 nodes with their anchor endpoints.
    Returns a list of (endpoint_x, [run nodes in order], endpoint_y)."""
    runs = []
    seen = set()
    for v in sorted(pg.adj):
        if not pg.alive[v] or pg.degree(v) != 2 or v in seen:
            continue
        seen.add(v)
        run = deque([v])
        ends = []
        first_dir = sorted(pg.adj[v])[0]
        for direction in sorted(pg.adj[v]):
            prev, cur = v, direction
            while pg.degree(cur) == 2 and cur not in seen:
                seen.add(cur)
                if direction == first_dir:
                    run.appendleft(cur)
                else:
                    run.append(cur)
                nxt = [x for x in pg.adj[cur] if x != prev][0]
                prev, cur = cur, nxt
            ends.append(cur)
        runs.append((ends[0], list(run), ends[1]))
    return runs


def compress_paths(pg, dhat, sim=None, phase=0, c_iter=4, skip=None):
    """Collapse every maximal degree-2 run into a single replacement edge.

    Run members learn their run by uniform exponentiation; a member seeing
    more than dhat+2 run nodes knows the diameter guess is wrong and flags
    failure (stopping its growth, so a wrong guess costs no extra memory).
    Returns (events, failed_nodes)."""
    iters = path_iteration_budget(dhat, c_iter)
    skip = skip or ()
    runs = []
    for x, run, y in find_paths(pg):
        if run[0] in skip:
            continue
        n_run = len(run)
        done_at = 0 if n_run <= 2 else math.ceil(math.log2(n_run - 1)) + 1
        fail_at = None
        if n_run - 1 > dhat + 2:
            r, k = 1, 1
            while min(n_run - 1, 2 * r) <= dhat + 2:
                r *= 2
                k += 1
            fail_at = k
        runs.append({"x": x, "y": y, "run": run, "fail_at": fail_at,
                     "done_at": done_at, "n": n_run})
    failed_nodes = set()
    stop_of = lambda rec: rec["fail_at"] if rec["fail_at"] is not None else rec["done_at"]
    last_iter = min(iters, max((stop_of(r) for r in runs), default=0))
    if sim is not None:
        for k in range(1, last_iter + 1):
            words = 0
            r_prev, r_now = 2 ** (k - 1), 2 ** k
            for rec in runs:
                if k <= min(stop_of(rec), iters) and rec["n"] > 1:
                    cap = rec["n"]
                    words += _interval_sum(rec["n"], min(r_now, cap)) - \
                        _interval_sum(rec["n"], min(r_prev, cap))
            sim.tick(rounds=3, message_words=max(0, words),
                     transient_words=max(0, words))
    events = []
    for rec in runs:
        if (rec["fail_at"] is not None and rec["fail_at"] <= iters) or \
                rec["done_at"] > iters:
            failed_nodes.update(rec["run"])
            continue
        x, y, run = rec["x"], rec["y"], rec["run"]
        absorber = max(x, y)
        ordered = run if absorber == x else list(reversed(run))
        ev = CompressEvent(phase=phase, step="path", absorber=absorber,
                           absorbed=ordered,
                           removed_edges=[(absorber, ordered[0])],
                           added_edges=[(x, y)])
        pg.apply_event(ev)
        events.append(ev)
        _charge_absorb(pg, sim, absorber, run)
    if sim is not None:
        sim.tick(rounds=2, message_words=2 * len(events))
    return events, failed_nodes


# -- decompression -------------------------------------------------------------


def decompress_paths(pg, events, sim=None, orient=None):
    """Reverse the path compressions of one phase.  With ``orient`` given
    (a parent map), spreads edge orientations instead of ids."""
    for ev in reversed(events):
        if ev.step != "path":
            raise CorruptLog("decompress_paths fed a non-path event")
        if orient is not None:
            _orient_path(pg, ev, orient)
        pg.undo_event(ev, spread_id=orient is None)
    if sim is not None:
        sim.tick(rounds=1, message_words=sum(len(e.absorbed) for e in events))


def decompress_light_subtrees(pg, events, sim=None, orient=None):
    for ev in reversed(events):
        if ev.step not in ("subtree", "pair_merge"):
            raise CorruptLog("decompress_light_subtrees fed a path event")
        if orient is not None:
            _orient_subtree(pg, ev, orient)
        pg.undo_event(ev, spread_id=orient is None)
    if sim is not None:
        sim.tick(rounds=1, message_words=sum(len(e.absorbed) for e in events))


def _orient_path(pg, ev, orient):
    x, y = ev.added_edges[0]
    other = y if ev.absorber == x else x
    chain = [ev.absorber] + list(ev.absorbed) + [other]
    if orient.get(chain[0]) == chain[-1]:
        seq = chain
    elif orient.get(chain[-1]) == chain[0]:
        seq = list(reversed(chain))
    else:
        raise CorruptLog("replacement edge carries no orientation to extend")
    for a, b in zip(seq, seq[1:]):
        orient[a] = b


def _orient_subtree(pg, ev, orient):
    members = set(ev.absorbed)
    q = deque()
    seen = set()
    for x in sorted(members):
        if ev.absorber in pg.adj[x]:
            orient[x] = ev.absorber
            seen.add(x)
            q.append(x)
    while q:
        v = q.popleft()
        for u in sorted(pg.adj[v]):
            if u in members and u not in seen:
                orient[u] = v
                seen.add(u)
                q.append(u)
    if seen != members:
        raise CorruptLog("absorbed subtree not connected to its absorber")


# -- full solver ---------------------------------------------------------------


def run_phases(pg, dhat, light, full, sim=None, c_iter=4, checks=None,
               max_phases=None):
    """Compression phases until every component is a singleton or the phase
    budget runs out.  Returns (events in applied order, failed_nodes):
    failed components are detected per component (zero progress, a path that
    cannot be learned under dhat, or budget exhaustion)."""
    n0 = len(pg.alive_nodes())
    budget = max_phases if max_phases is not None else phase_budget(n0, light)
    all_events = []
    failed = set()
    for phase in range(budget):
        comps = [c for c in pg.components()
                 if len(c) > 1 and not failed.intersection(c)]
        if not comps:
            break
        if sim is not None:
            sim.stats.mark(f"maxid:dhat{dhat}:phase{phase}")
        ev1 = compress_light_subtrees(pg, dhat, light, full, sim=sim,
                                      phase=phase, c_iter=c_iter,
                                      checks=checks, skip=failed)
        ev2, path_failed = compress_paths(pg, dhat, sim=sim, phase=phase,
                                          c_iter=c_iter, skip=failed)
        failed |= _closure_of(pg, path_failed)
        all_events.extend(ev1)
        all_events.extend(ev2)
        if checks:
            checks.after_phase(pg, phase, ev1 + ev2)
        touched = set()
        for ev in ev1:
            touched.add(ev.absorber)
            touched.update(ev.absorbed)
        for ev in ev2:
            touched.add(ev.absorber)
            touched.update(ev.absorbed)
        for c in pg.components():
            if len(c) <= 1 or failed.intersection(c):
                continue
            if not touched.intersection(c):
                # a rerun would stall identically: fail this component now
                failed |= set(c)
    for c in pg.components():
        if len(c) > 1 and not failed.intersection(c):
            failed |= set(c)
    return all_events, failed


def _closure_of(pg, nodes):
    out = set()
    todo = [v for v in nodes if pg.alive.get(v, False)]
    seen = set(todo)
    while todo:
        v = todo.pop()
        out.add(v)
        for u in pg.adj[v]:
            if u not in seen and pg.alive.get(u, False):
                seen.add(u)
                todo.append(u)
    return out


def revert_failed(pg, events, failed_alive):
    """Undo, newest first, every event belonging to a failed component; the
    failed set grows as absorbed nodes resurface.  Returns (kept events,
    full failed node set)."""
    failed = set(failed_alive)
    kept = []
    for ev in reversed(events):
        if ev.absorber in failed:
            pg.undo_event(ev, spread_id=False)
            failed.update(ev.absorbed)
        else:
            kept.append(ev)
    kept.reverse()
    return kept, failed


def unwind(pg, events, sim=None, orient=None):
    """Run the reversal phases: newest phase first, paths before subtrees."""
    for ph in sorted({ev.phase for ev in events}, reverse=True):
        decompress_paths(pg, [e for e in events if e.phase == ph and e.step == "path"],
                         sim=sim, orient=orient)
        decompress_light_subtrees(
            pg, [e for e in events if e.phase == ph and e.step != "path"],
            sim=sim, orient=orient)


def maxid_solver(forest, dhat, light=None, full=None, sim=None, c_iter=4,
                 checks=None):
    """Every node of a single input tree outputs the tree's maximum id.

    Raises NotATree on multi-component input, ValueError for dhat < 2, and
    PhaseFailure when dhat was too small for the run to finish."""
    if len(forest.component_lists()) != 1:
        raise NotATree("maxid_solver expects a single tree")
    if dhat < 2:
        raise ValueError("dhat must be at least 2")
    from .forest import default_thresholds, full_threshold_for

    if light is None:
        light, _, _ = default_thresholds(forest.n, 0.5)
    if full is None:
        full = full_threshold_for(light, dhat)
    pg = PhaseGraph(forest)
    events, failed = run_phases(pg, dhat, light, full, sim=sim, c_iter=c_iter,
                                checks=checks)
    if failed:
        revert_failed(pg, events, failed)
        raise PhaseFailure(f"tree not reduced to a singleton under dhat={dhat}")
    unwind(pg, events, sim=sim)
    return dict(pg.idval)
