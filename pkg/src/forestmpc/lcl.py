"""Generic solver for node-edge-checkable labeling problems on rooted forests.

A problem lists allowed multisets of (input, output) pairs per node and per
edge.  The solver keeps, for every node, the set of output tuples it can
still use (ordered by port) and, for every edge, the set of ordered label
pairs; compression steps only ever discard options that cannot be completed.

One phase compresses every small-enough subtree into its lowest heavy
ancestor (updating that node's tuple set through a feasibility sweep over
the gathered subtree) and then every degree-2 run into a single replacement
edge (layer by layer along an independent set defined by distances to the
run's head).  After the surviving node picks any remaining tuple, the
compressions unwind in reverse, committing concrete tuples as they go.
"""

from __future__ import annotations

import math
from collections import Counter, deque
from dataclasses import dataclass, field

BOT = "_"
UNSOLVABLE = "UNSOLVABLE"


class InvalidInput(ValueError):
    pass


class Incomplete(ValueError):
    def __init__(self, where):
        super().__init__(f"missing output label at {where}")
        self.where = where


class CorruptState(RuntimeError):
    pass


@dataclass
class LclProblem:
    """Node-edge-checkable labeling problem.

    ``node_constraints``: multisets (as sorted tuples) of (input, output)
    pairs, one entry per incident half-edge of a node; ``edge_constraints``:
    size-2 multisets for the two half-edges of an edge."""

    sigma_in: list
    sigma_out: list
    node_constraints: list
    edge_constraints: list
    delta_max: int
    name: str = "problem"

    def __post_init__(self):
        self.sigma_in = list(self.sigma_in)
        self.sigma_out = list(self.sigma_out)
        self.node_constraints = [tuple(sorted(map(tuple, m)))
                                 for m in self.node_constraints]
        self.edge_constraints = [tuple(sorted(map(tuple, m)))
                                 for m in self.edge_constraints]
        for m in self.edge_constraints:
            if len(m) != 2:
                raise InvalidInput("edge constraint multisets must have size 2")
        ok = set()
        for m in self.node_constraints + self.edge_constraints:
            ok.update(m)
        for i, o in ok:
            if i not in self.sigma_in or o not in self.sigma_out:
                raise InvalidInput(f"constraint pair ({i},{o}) outside alphabets")
        self.out_rank = {o: r for r, o in enumerate(self.sigma_out)}

    def to_json(self):
        return {
            "name": self.name,
            "inputs": self.sigma_in,
            "outputs": self.sigma_out,
            "node_constraints": [[list(p) for p in m] for m in self.node_constraints],
            "edge_constraints": [[list(p) for p in m] for m in self.edge_constraints],
            "delta_max": self.delta_max,
        }

    @classmethod
    def from_json(cls, obj):
        return cls(
            sigma_in=obj["inputs"], sigma_out=obj["outputs"],
            node_constraints=obj["node_constraints"],
            edge_constraints=obj["edge_constraints"],
            delta_max=int(obj["delta_max"]), name=obj.get("name", "problem"),
        )

    def sort_key(self, tup):
        return tuple(self.out_rank[x] for x in tup)


def expand_tuples(problem, port_inputs):
    """All ordered output tuples consistent with a node's port inputs: every
    multiset in C_V of the right size, laid out in every order that matches
    the inputs."""
    d = len(port_inputs)
    out = set()
    for mset in problem.node_constraints:
        if len(mset) != d:
            continue
        pool = Counter(mset)

        def place(j, acc):
            if j == d:
                out.add(tuple(acc))
                return
            for pair in sorted(pool):
                if pool[pair] and pair[0] == port_inputs[j]:
                    pool[pair] -= 1
                    acc.append(pair[1])
                    place(j + 1, acc)
                    acc.pop()
                    pool[pair] += 1

        place(0, [])
    return out


def expand_edge_pairs(problem, in1, in2):
    """Ordered (port-1 label, port-2 label) pairs consistent with the inputs."""
    out = set()
    for mset in problem.edge_constraints:
        (ia, oa), (ib, ob) = mset
        if ia == in1 and ib == in2:
            out.add((oa, ob))
        if ib == in1 and ia == in2:
            out.add((ob, oa))
    return out


# -- graph with ports and compatibility state -----------------------------------


class Edge:
    """An (original or replacement) edge with node ports and edge ports."""

    __slots__ = ("a", "b", "aport", "bport", "eport_a", "eid")
    _next = [0]

    def __init__(self, a, b, aport, bport, eport_a):
        self.a, self.b = a, b
        self.aport, self.bport = aport, bport
        self.eport_a = eport_a
        self.eid = Edge._next[0]
        Edge._next[0] += 1

    def other(self, v):
        return self.b if v == self.a else self.a

    def port_of(self, v):
        return self.aport if v == self.a else self.bport

    def eport_of(self, v):
        return self.eport_a if v == self.a else 3 - self.eport_a

    def __repr__(self):
        return f"Edge({self.a}:{self.aport}|{self.b}:{self.bport})"


class LclGraph:
    """Forest state for the solver: live edges per node, original degrees,
    the rooted orientation, tuple sets phi and pair sets psi."""

    def __init__(self, forest, problem, parent, inputs=None):
        self.problem = problem
        self.parent = dict(parent)
        self.origdeg = {v: forest.degree(v) for v in forest.adj}
        self.alive = dict.fromkeys(forest.adj, True)
        self.live = {v: {} for v in forest.adj}
        self.inputs = {}
        for v in forest.adj:
            for p, u in enumerate(forest.adj[v], start=1):
                lab = (inputs or forest.half_edge_inputs or {}).get((v, u), BOT)
                if lab not in problem.sigma_in:
                    raise InvalidInput(f"input {lab!r} at ({v},{u}) outside sigma_in")
                self.inputs[(v, p)] = lab
        self.edges = []
        for v, u in forest.edges():
            pa, pb = forest.port_of(v, u), forest.port_of(u, v)
            e = Edge(v, u, pa, pb, eport_a=1)  # lower endpoint takes edge port 1
            self.edges.append(e)
            self.live[v][pa] = e
            self.live[u][pb] = e
        self.phi = {}
        self.psi = {}
        for v in forest.adj:
            port_inputs = [self.inputs[(v, p)] for p in range(1, self.origdeg[v] + 1)]
            self.phi[v] = expand_tuples(problem, port_inputs)
        for e in self.edges:
            i1 = self.inputs[(e.a, e.aport)] if e.eport_a == 1 else self.inputs[(e.b, e.bport)]
            i2 = self.inputs[(e.b, e.bport)] if e.eport_a == 1 else self.inputs[(e.a, e.aport)]
            self.psi[e] = expand_edge_pairs(problem, i1, i2)

    def degree(self, v):
        return len(self.live[v])

    def alive_nodes(self):
        return [v for v, a in self.alive.items() if a]

    def children(self, v):
        return sorted(e.other(v) for e in self.live[v].values()
                      if self.parent.get(e.other(v)) == v)

    def parent_edge(self, v):
        p = self.parent.get(v)
        if p is None:
            return None
        for e in self.live[v].values():
            if e.other(v) == p:
                return e
        return None

    def pair_allowed(self, e, v, lab_v, lab_other):
        """Is (v-side, other-side) = (lab_v, lab_other) allowed on edge e?"""
        if e.eport_of(v) == 1:
            return (lab_v, lab_other) in self.psi[e]
        return (lab_other, lab_v) in self.psi[e]

    def kill(self, v):
        self.alive[v] = False
        for e in list(self.live[v].values()):
            w = e.other(v)
            if self.alive.get(w, False):
                del self.live[w][e.port_of(w)]

    def revive(self, v):
        self.alive[v] = True
        for e in self.live[v].values():
            w = e.other(v)
            self.live[w][e.port_of(w)] = e

    def components(self):
        seen = set()
        comps = []
        for s in sorted(self.alive):
            if not self.alive[s] or s in seen:
                continue
            comp = []
            q = deque([s])
            seen.add(s)
            while q:
                v = q.popleft()
                comp.append(v)
                for e in self.live[v].values():
                    u = e.other(v)
                    if u not in seen:
                        seen.add(u)
                        q.append(u)
            comps.append(comp)
        return comps


# -- CountSubtreeSizes ----------------------------------------------------------


def count_subtree_sizes(g, subtree_cap, sim=None):
    """Mark every alive node light (with its exact subtree size) or heavy.

    Frontier doubling: C(v) holds the depth-2^i descendants, s(v) the count
    of strict descendants within that depth.  A node turns heavy as soon as
    its size passes the cap or any frontier member is heavy."""
    frontier = {}
    s = {}
    active = {}
    for v in g.alive_nodes():
        kids = g.children(v)
        frontier[v] = set(kids)
        s[v] = len(kids)
        active[v] = True
    heavy = set()

    def mark_heavy(v):
        heavy.add(v)
        active[v] = False
        frontier[v] = set()

    for v in list(s):
        if s[v] + 1 > subtree_cap:
            mark_heavy(v)
    rounds = 0
    while any(frontier.values()):
        rounds += 1
        new_s, new_f, to_heavy = {}, {}, []
        for v in g.alive_nodes():
            if not frontier[v]:
                continue
            if not active[v]:
                continue
            if any(not active[u] for u in frontier[v]):
                to_heavy.append(v)
                continue
            new_s[v] = s[v] + sum(s[u] for u in frontier[v])
            new_f[v] = set().union(*(frontier[u] for u in frontier[v]))
        for v, val in new_s.items():
            s[v] = val
            frontier[v] = new_f[v]
        for v in to_heavy:
            mark_heavy(v)
        for v in list(new_s):
            if s[v] + 1 > subtree_cap:
                mark_heavy(v)
        if sim is not None:
            sim.tick(rounds=2, message_words=sum(len(f) + 1 for f in new_f.values()))
        if rounds > 2 * math.ceil(math.log2(max(len(s), 2))) + 4:
            raise CorruptState("subtree counting failed to terminate")
    sizes = {v: s[v] + 1 for v in s if v not in heavy}
    roles = {}
    for v in g.alive_nodes():
        roles[v] = "heavy" if v in heavy else "light"
    for v in g.alive_nodes():
        if roles[v] == "heavy" and any(roles[u] == "light" for u in g.children(v)):
            roles[v] = "local_root"
    for comp in g.components():
        if not any(roles[v] == "local_root" for v in comp):
            root = next(v for v in comp if g.parent.get(v) is None)
            roles[root] = "local_root"
    return roles, sizes


# -- GatherSubtrees -------------------------------------------------------------


def gather_subtrees(g, roles, sim=None):
    """Every local root collects the ids of T(u) for each light child u."""
    carry = {}
    for v in g.alive_nodes():
        carry[v] = {u for u in g.children(v) if roles[u] == "light"}
    gathered = {v: set(carry[v]) for v in g.alive_nodes()
                if roles[v] == "local_root"}
    rounds = 0
    while True:
        rounds += 1
        new_carry = {}
        moved = 0
        for v in g.alive_nodes():
            if roles[v] == "light":
                nxt = set().union(*(carry[u] for u in carry[v])) if carry[v] else set()
                new_carry[v] = nxt
                moved += len(nxt)
        grew = False
        for v in list(gathered):
            add = set().union(*(carry[u] for u in gathered[v] & set(carry))) \
                if gathered[v] else set()
            add -= gathered[v]
            if add:
                gathered[v] |= add
                grew = True
                moved += len(add)
        for v, nxt in new_carry.items():
            if nxt != carry[v]:
                grew = True
            carry[v] = nxt
        if sim is not None:
            sim.tick(rounds=2, message_words=moved)
        if not grew:
            break
        if rounds > 2 * math.ceil(math.log2(max(len(carry), 2))) + 4:
            raise CorruptState("gather failed to terminate")
    return gathered


# -- CompressSubtrees -----------------------------------------------------------


@dataclass
class SubtreeEvent:
    phase: int
    root: int
    child: int
    edge: Edge
    members: list            # T(child) ids, child first, parents before kids
    dp: dict                 # member -> feasible labels on its parent edge
    unsolvable: bool = False


def _subtree_dp(g, u, members):
    """Bottom-up feasibility: for each member x, the labels x may put on its
    half-edge toward its parent such that T(x) below completes validly."""
    order = []
    seen = {u}
    q = deque([u])
    mem = set(members)
    while q:
        x = q.popleft()
        order.append(x)
        for c in g.children(x):
            if c in mem and c not in seen:
                seen.add(c)
                q.append(c)
    dp = {}
    for x in reversed(order):
        pe = g.parent_edge(x)
        pport = pe.port_of(x)
        feasible = set()
        kids = [c for c in g.children(x) if c in mem]
        for t in g.phi[x]:
            ok = True
            for c in kids:
                ce = g.parent_edge(c)
                mine = t[ce.port_of(x) - 1]
                if not any(g.pair_allowed(ce, x, mine, lc) for lc in dp[c]):
                    ok = False
                    break
            if ok:
                feasible.add(t[pport - 1])
        dp[x] = feasible
    return order, dp


def compress_subtrees(g, roles, gathered, phase, sim=None):
    """Fold every gathered light subtree into its local root, filtering the
    root's tuple set down to labels that remain completable below.

    Returns (events, unsolvable_flag)."""
    events = []
    unsolvable = False
    words = 0
    for v in sorted(gathered):
        members_all = gathered[v]
        for u in sorted(x for x in g.children(v) if roles.get(x) == "light"):
            sub = _collect_subtree(g, u, members_all)
            order, dp = _subtree_dp(g, u, sub)
            estar = g.parent_edge(u)
            lset = {a for a in g.problem.sigma_out
                    if any(g.pair_allowed(estar, v, a, b) for b in dp[u])}
            ev = SubtreeEvent(phase=phase, root=v, child=u, edge=estar,
                              members=order, dp=dp)
            events.append(ev)
            words += 2 * len(order)
            port = estar.port_of(v)
            g.phi[v] = {t for t in g.phi[v] if t[port - 1] in lset}
            for x in order:
                g.kill(x)
            if not g.phi[v]:
                unsolvable = True
                ev.unsolvable = True
    if sim is not None:
        sim.tick(rounds=3, message_words=words, transient_words=words)
    return events, unsolvable


def _collect_subtree(g, u, members_all):
    out = [u]
    seen = {u}
    q = deque([u])
    while q:
        x = q.popleft()
        for c in g.children(x):
            if c in members_all and c not in seen:
                seen.add(c)
                out.append(c)
                q.append(c)
    return out


# -- CountDistances -------------------------------------------------------------


def count_distances(run, anchors, sim=None):
    """Distances from every internal node of a degree-2 run to both anchors.

    Pointer halving: each internal node keeps a weighted pointer per side and
    repeatedly splices through its targets until both rest on anchors.
    Returns {node: {anchor: distance}}."""
    seq = [anchors[0]] + list(run) + [anchors[1]]
    pos = {v: i for i, v in enumerate(seq)}
    ends = {anchors[0], anchors[1]}
    ptr = {v: [(seq[pos[v] - 1], 1), (seq[pos[v] + 1], 1)] for v in run}
    rounds = 0
    while True:
        rounds += 1
        changed = False
        nxt = {}
        for v in run:
            sides = []
            for tgt, w in ptr[v]:
                if tgt in ends:
                    sides.append((tgt, w))
                    continue
                # an internal target's toward-us pointer aims exactly at us,
                # so its other pointer is the away side
                (ta, wa), (tb, wb) = ptr[tgt]
                away, aw = (tb, wb) if ta == v else (ta, wa)
                sides.append((away, w + aw))
                changed = True
            nxt[v] = sides
        ptr = nxt
        if sim is not None:
            sim.tick(rounds=2, message_words=2 * len(run))
        if not changed:
            break
        if rounds > 2 * math.ceil(math.log2(len(run) + 2)) + 4:
            raise CorruptState("distance counting failed to terminate")
    out = {}
    for v in run:
        d = {}
        for tgt, w in ptr[v]:
            d[tgt] = w
        out[v] = d
    return out


def path_component_distances(forest, sim=None):
    """Distances for a standalone path component (two degree-1 endpoints,
    internal degree-2); head is the higher-id endpoint."""
    degs = {v: forest.degree(v) for v in forest.adj}
    ends = sorted(v for v, d in degs.items() if d == 1)
    if len(ends) != 2 or any(d not in (1, 2) for d in degs.values()):
        raise InvalidInput("not a path component")
    order = [ends[0]]
    prev, cur = None, ends[0]
    while cur != ends[1]:
        nxt = [u for u in forest.adj[cur] if u != prev][0]
        order.append(nxt)
        prev, cur = cur, nxt
    run = order[1:-1]
    if not run:
        return {}
    return count_distances(run, (ends[0], ends[1]), sim=sim)


# -- AdvancedCompressPaths ------------------------------------------------------


@dataclass
class SpliceEvent:
    phase: int
    layer: int
    v: int
    e_left: Edge
    e_right: Edge
    e_new: Edge
    was_root: bool = False


def find_runs(g):
    """Maximal alive degree-2 runs with their anchors (degree != 2 nodes)."""
    runs = []
    seen = set()
    for v in sorted(g.alive):
        if not g.alive[v] or g.degree(v) != 2 or v in seen:
            continue
        seen.add(v)
        chain = deque([v])
        ends = []
        nbs = sorted(e.other(v) for e in g.live[v].values())
        for i, start in enumerate(nbs):
            prev, cur = v, start
            while g.alive[cur] and g.degree(cur) == 2 and cur not in seen:
                seen.add(cur)
                if i == 0:
                    chain.appendleft(cur)
                else:
                    chain.append(cur)
                nxt = [e.other(cur) for e in g.live[cur].values()
                       if e.other(cur) != prev][0]
                prev, cur = cur, nxt
            ends.append(cur)
        runs.append((ends[0], list(chain), ends[1]))
    return runs


def advanced_compress_paths(g, phase, sim=None, on_layer=None):
    """Compress every degree-2 run into one edge, layer by layer.

    Layer i removes run members whose distance to the run's head is not
    divisible by 2^(i+1) (an independent set on the surviving run); each
    removed node splices its two edges into one whose pair set admits
    exactly the completable label combinations.

    Returns (events, unsolvable_flag)."""
    events = []
    unsolvable = False
    for x, run, y in find_runs(g):
        if not run:
            continue
        head = max(x, y)
        dists = count_distances(run, (x, y), sim=sim)
        d_head = {v: dists[v][head] for v in run}
        alive_run = list(run)
        layer = 0
        while alive_run:
            zset = [v for v in alive_run if d_head[v] % (2 ** (layer + 1)) != 0]
            if on_layer:
                on_layer(g, alive_run, zset, layer)
            for v in zset:
                ev = _splice(g, v, phase, layer)
                events.append(ev)
                if not g.psi[ev.e_new]:
                    unsolvable = True
            alive_run = [v for v in alive_run if v not in zset]
            layer += 1
            if sim is not None:
                sim.tick(rounds=2, message_words=4 * len(zset))
            if layer > math.ceil(math.log2(len(run) + 2)) + 2:
                raise CorruptState("path compression failed to terminate")
    return events, unsolvable


def _splice(g, v, phase, layer):
    ports = sorted(g.live[v])
    e_left, e_right = g.live[v][ports[0]], g.live[v][ports[1]]
    u, w = e_left.other(v), e_right.other(v)
    # replacement edge keeps each endpoint's node port; edge port 1 faces u
    enew = Edge(u, w, e_left.port_of(u), e_right.port_of(w), eport_a=1)
    pairs = set()
    p3, p4 = e_left.port_of(v), e_right.port_of(v)
    vpairs = {(t[p3 - 1], t[p4 - 1]) for t in g.phi[v]}
    for l1 in g.problem.sigma_out:
        for l2 in g.problem.sigma_out:
            for xx, yy in vpairs:
                if g.pair_allowed(e_left, u, l1, xx) and \
                        g.pair_allowed(e_right, w, l2, yy):
                    pairs.add((l1, l2))
                    break
    g.psi[enew] = pairs
    was_root = g.parent.get(v) is None
    ev = SpliceEvent(phase=phase, layer=layer, v=v, e_left=e_left,
                     e_right=e_right, e_new=enew, was_root=was_root)
    g.kill(v)
    g.live[u][enew.port_of(u)] = enew
    g.live[w][enew.port_of(w)] = enew
    if was_root:
        # splicing the component's root away: re-root at the higher-id
        # neighbor (the compatibility bookkeeping is orientation-agnostic)
        nr, other = max(u, w), min(u, w)
        g.parent[nr] = None
        g.parent[other] = nr
    elif g.parent.get(u) == v:
        g.parent[u] = w
    elif g.parent.get(w) == v:
        g.parent[w] = u
    return ev


# -- decompression ---------------------------------------------------------------


def decompress_paths_lcl(g, events, chosen, sim=None):
    """Reverse one phase's splices (newest layer first), committing a tuple
    for every returning node consistent with the labels already fixed."""
    for ev in sorted(events, key=lambda e: (-e.layer,)):
        u, w = ev.e_new.a, ev.e_new.b
        l1 = chosen[u][ev.e_new.port_of(u) - 1]
        l2 = chosen[w][ev.e_new.port_of(w) - 1]
        v = ev.v
        p3, p4 = ev.e_left.port_of(v), ev.e_right.port_of(v)
        pick = None
        for t in sorted(g.phi[v], key=g.problem.sort_key):
            if g.pair_allowed(ev.e_left, u, l1, t[p3 - 1]) and \
                    g.pair_allowed(ev.e_right, w, l2, t[p4 - 1]):
                pick = t
                break
        if pick is None:
            raise CorruptState(f"no witness tuple for spliced node {v}")
        chosen[v] = pick
        del g.live[u][ev.e_new.port_of(u)]
        del g.live[w][ev.e_new.port_of(w)]
        g.revive(v)
    if sim is not None:
        sim.tick(rounds=1, message_words=2 * len(events))


def decompress_subtrees_lcl(g, events, chosen, sim=None):
    """Reverse one phase's subtree compressions, extending the root's chosen
    tuple into each absorbed subtree (top-down, lowest-ranked tuple first)."""
    for ev in reversed(events):
        for x in ev.members:
            g.revive(x)
        for x in ev.members:
            pe = g.parent_edge(x)
            par = pe.other(x)
            plab = chosen[par][pe.port_of(par) - 1]
            kids = [c for c in g.children(x) if c in ev.dp]
            pick = None
            for t in sorted(g.phi[x], key=g.problem.sort_key):
                if not g.pair_allowed(pe, par, plab, t[pe.port_of(x) - 1]):
                    continue
                ok = True
                for c in kids:
                    ce = g.parent_edge(c)
                    if not any(g.pair_allowed(ce, x, t[ce.port_of(x) - 1], lc)
                               for lc in ev.dp[c]):
                        ok = False
                        break
                if ok:
                    pick = t
                    break
            if pick is None:
                raise CorruptState(f"subtree member {x} has no extendable tuple")
            chosen[x] = pick
    if sim is not None:
        sim.tick(rounds=1, message_words=sum(len(e.members) for e in events))


# -- solver ----------------------------------------------------------------------


@dataclass
class HalfEdgeLabeling:
    out: dict                 # (node, port) -> output label
    chosen: dict = field(default_factory=dict)

    def label(self, v, port):
        return self.out.get((v, port))


def lcl_phase_budget(n, subtree_cap):
    if n <= 1:
        return 1
    return math.ceil(math.log(n) / math.log(1 + subtree_cap / 2)) + 2


def lcl_solver(forest, problem, inputs=None, subtree_cap=None, delta=0.5,
               sim=None, orientation=None, on_layer=None):
    """Solve the labeling problem on the forest, or report UNSOLVABLE.

    Roots the forest first (unless an orientation is supplied), then runs
    compression phases until each component is a single node, picks any
    surviving tuple there, and unwinds.  Returns (HalfEdgeLabeling, sim) or
    (UNSOLVABLE, sim)."""
    from .forest import default_thresholds
    from .components import root_forest

    for v in forest.adj:
        if forest.degree(v) > problem.delta_max:
            raise InvalidInput(
                f"node {v} has degree {forest.degree(v)} > delta_max")
    if subtree_cap is None:
        _, _, subtree_cap = default_thresholds(max(forest.n, 2), delta)
    if orientation is None:
        orientation, sim = root_forest(forest, delta=delta, sim=sim)
    if sim is not None:
        sim.stats.mark("lcl:init")
    g = LclGraph(forest, problem, orientation.parent, inputs=inputs)
    if any(not g.phi[v] for v in g.alive) or \
            any(not g.psi[e] for e in g.edges):
        return UNSOLVABLE, sim
    phase_events = []
    budget = lcl_phase_budget(forest.n, subtree_cap)
    phase = 0
    while any(g.degree(v) > 0 for v in g.alive_nodes()):
        if phase >= budget:
            raise CorruptState("phase budget exceeded")
        if sim is not None:
            sim.stats.mark(f"lcl:phase{phase}")
        roles, sizes = count_subtree_sizes(g, subtree_cap, sim=sim)
        gathered = gather_subtrees(g, roles, sim=sim)
        sub_events, bad1 = compress_subtrees(g, roles, gathered, phase, sim=sim)
        path_events, bad2 = advanced_compress_paths(g, phase, sim=sim,
                                                    on_layer=on_layer)
        phase_events.append((sub_events, path_events))
        if bad1 or bad2:
            return UNSOLVABLE, sim
        phase += 1
    chosen = {}
    for v in g.alive_nodes():
        if not g.phi[v]:
            return UNSOLVABLE, sim
        chosen[v] = min(g.phi[v], key=g.problem.sort_key)
    for sub_events, path_events in reversed(phase_events):
        decompress_paths_lcl(g, path_events, chosen, sim=sim)
        decompress_subtrees_lcl(g, sub_events, chosen, sim=sim)
    out = {}
    for v in g.alive:
        for p in range(1, g.origdeg[v] + 1):
            out[(v, p)] = chosen[v][p - 1]
    return HalfEdgeLabeling(out=out, chosen=chosen), sim


def verify_lcl(forest, problem, labeling, inputs=None):
    """Check every node multiset against C_V and edge multiset against C_E.
    Returns (True, None) or (False, offending node or edge)."""
    getlab = labeling.label if isinstance(labeling, HalfEdgeLabeling) else \
        (lambda v, p: labeling.get((v, p)))
    inputs = inputs or forest.half_edge_inputs or {}
    for v in sorted(forest.adj):
        pairs = []
        for p, u in enumerate(forest.adj[v], start=1):
            lab = getlab(v, p)
            if lab is None:
                raise Incomplete((v, p))
            pairs.append((inputs.get((v, u), BOT), lab))
        if tuple(sorted(pairs)) not in problem.node_constraints:
            return False, ("node", v)
    for v, u in forest.edges():
        pv = forest.port_of(v, u)
        pu = forest.port_of(u, v)
        mult = tuple(sorted([
            (inputs.get((v, u), BOT), getlab(v, pv)),
            (inputs.get((u, v), BOT), getlab(u, pu)),
        ]))
        if mult not in problem.edge_constraints:
            return False, ("edge", (v, u))
    return True, None


def brute_force_solve(forest, problem, inputs=None):
    """Exhaustive backtracking oracle, independent of the compression
    machinery: assign each node an allowed tuple, pruning on edge pairs."""
    inputs = inputs or forest.half_edge_inputs or {}
    nodes = sorted(forest.adj)
    cand = {}
    for v in nodes:
        port_inputs = [inputs.get((v, u), BOT) for u in forest.adj[v]]
        cc = sorted(expand_tuples(problem, port_inputs), key=problem.sort_key)
        if not cc:
            return None
        cand[v] = cc
    epairs = {}
    for v, u in forest.edges():
        i1 = inputs.get((v, u), BOT)
        i2 = inputs.get((u, v), BOT)
        epairs[(v, u)] = expand_edge_pairs(problem, i1, i2)
    assign = {}

    def ok_edge(v, u):
        tv, tu = assign[v], assign[u]
        lv = tv[forest.port_of(v, u) - 1]
        lu = tu[forest.port_of(u, v) - 1]
        a, b = (v, u) if v < u else (u, v)
        la = lv if a == v else lu
        lb = lu if a == v else lv
        return (la, lb) in epairs[(a, b)]

    def rec(i):
        if i == len(nodes):
            return True
        v = nodes[i]
        for t in cand[v]:
            assign[v] = t
            if all(ok_edge(v, u) for u in forest.adj[v] if u in assign):
                if rec(i + 1):
                    return True
            del assign[v]
        return False

    if not rec(0):
        return None
    return {(v, p): assign[v][p - 1]
            for v in nodes for p in range(1, forest.degree(v) + 1)}
