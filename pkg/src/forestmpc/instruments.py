"""Oracle-backed runtime assertions for instrumented solver runs.

Attached to a run via the ``checks`` argument, these compare the distributed
state against ground truth recomputed from the current phase graph:

* probe sandwich: the probe score brackets the size a full exponentiation
  actually delivers (within the dhat overcount factor),
* light nodes never turn full or sad, heavy nodes never turn happy,
* virtual distances from light nodes to their subtree leaves shrink by a
  3/4 factor per iteration while they are at least 4,
* per phase: with two or more heavy nodes the node count drops by better
  than 2/light, and every new leaf absorbed at least ``light`` nodes.

All checks presume the diameter guess is valid (dhat >= true diameter);
instrumented runs are only meaningful under that promise.
"""

from __future__ import annotations

import math
from collections import deque

from .maxid import ACTIVE, FULL, HAPPY, SAD


class CheckFailure(AssertionError):
    pass


class _CompView:
    """Oracle view of one alive component of a phase graph."""

    def __init__(self, pg, comp):
        self.members = set(comp)
        self.adj = {v: sorted(pg.adj[v] & self.members) if False else
                    sorted(u for u in pg.adj[v] if u in self.members)
                    for v in comp}
        self.n = len(comp)

    def side_sizes(self):
        root = min(self.members)
        parent = {root: None}
        order = []
        stack = [root]
        while stack:
            v = stack.pop()
            order.append(v)
            for u in self.adj[v]:
                if u != parent[v]:
                    parent[u] = v
                    stack.append(u)
        down = {v: 1 for v in order}
        for v in reversed(order):
            if parent[v] is not None:
                down[parent[v]] += down[v]
        out = {}
        for v in order:
            for u in self.adj[v]:
                if u == parent[v]:
                    out[(v, u)] = down[v]
                else:
                    out[(v, u)] = self.n - down[u]
        return out


class MaxIdChecks:
    """Structural and progress assertions for CompressLightSubTrees runs."""

    def __init__(self, light, dhat):
        self.light = light
        self.dhat = dhat
        self.fired = []
        self._phase_sizes = {}
        self._light_side = {}
        self._heavy = set()
        self._leafy = {}
        self._prev_dist = {}
        self._comp_heavy_count = {}

    # -- phase bookkeeping --------------------------------------------------

    def phase_start(self, pg, phase, ks):
        self.ks = ks
        self._light_side = {}
        self._heavy = set()
        self._comp_of = {}
        self._comp_heavy_count = {}
        self._prev_dist = {}
        comps = [c for c in pg.components() if len(c) > 1]
        self._phase_sizes[phase] = {min(c): len(c) for c in comps}
        for comp in comps:
            view = _CompView(pg, comp)
            sides = view.side_sizes()
            key = min(comp)
            heavy_here = 0
            for v in comp:
                self._comp_of[v] = key
                dirs = [u for u in view.adj[v] if sides[(v, u)] <= self.light]
                if dirs:
                    self._light_side[v] = {
                        u: None for u in dirs}
                    for u in dirs:
                        self._light_side[v][u] = sides[(v, u)]
                else:
                    self._heavy.add(v)
                    heavy_here += 1
            self._comp_heavy_count[key] = heavy_here

    def iteration_end(self, ks, it):
        for v, role in ks.role.items():
            if role in (FULL, SAD) and v in self._light_side:
                self._fail(f"light node {v} became {role}")
            if role == HAPPY and v in self._heavy:
                self._fail(f"heavy node {v} became happy")
        self._check_path_shortening(ks, it)

    def probe_sandwich(self, ks, v, b, received=None):
        """After a sanctioned full exponentiation: per direction, the probe
        score brackets the freshly received union within a dhat factor."""
        if received is None:
            return
        for u, cnt in received.items():
            score = b.get(u, 0)
            if not (cnt <= score <= max(cnt, 1) * self.dhat):
                if score == 0 and cnt == 0:
                    continue
                self._fail(
                    f"probe sandwich at {v} dir {u}: received {cnt}, score {score}")

    def phase_end(self, pg, phase, events):
        self._cls_events = events

    def after_phase(self, pg, phase, all_events):
        absorbed_into = {}
        for ev in all_events:
            if ev.step in ("subtree", "pair_merge"):
                absorbed_into[ev.absorber] = absorbed_into.get(ev.absorber, 0) \
                    + len(ev.absorbed)
        for comp in pg.components():
            if len(comp) <= 1:
                continue
            key_candidates = [k for k in self._phase_sizes.get(phase, {})
                              if any(self._comp_of.get(v) == k for v in comp)]
            if not key_candidates:
                continue
            key = key_candidates[0]
            before = self._phase_sizes[phase][key]
            if self._comp_heavy_count.get(key, 0) >= 2:
                if not (len(comp) < 2 * before / self.light):
                    self._fail(
                        f"phase {phase} shrink: {before} -> {len(comp)} "
                        f"violates < 2n/{self.light}")
                for v in comp:
                    if len([u for u in pg.adj[v]]) == 1:
                        got = absorbed_into.get(v, 0)
                        if got < self.light:
                            self._fail(
                                f"leaf {v} of next phase absorbed {got} < "
                                f"{self.light} nodes")

    # -- progress -------------------------------------------------------------

    def _virtual_adj(self, ks):
        adj = {}
        for v, info in ks.info.items():
            for x in info:
                if x in ks.info:
                    adj.setdefault(v, set()).add(x)
                    adj.setdefault(x, set()).add(v)
        return adj

    def _check_path_shortening(self, ks, it):
        adj = self._virtual_adj(ks)
        cur = {}
        for v in sorted(self._light_side):
            if ks.role.get(v) != ACTIVE:
                continue
            comp_key = self._comp_of.get(v)
            if self._comp_heavy_count.get(comp_key, 0) == 0:
                continue
            side_dir = min(self._light_side[v])
            target_leaves = self._subtree_leaves(ks.pg, v, side_dir)
            if not target_leaves:
                continue
            dist = self._bfs(adj, v)
            vals = [dist[w] for w in target_leaves if w in dist]
            if not vals:
                continue
            cur[v] = max(vals)
        for v, d_now in cur.items():
            d_prev = self._prev_dist.get(v)
            if d_prev is not None and d_prev >= 4:
                if d_now > math.ceil(0.75 * d_prev):
                    self._fail(
                        f"path shortening at {v}: {d_prev} -> {d_now} "
                        f"(> ceil(3/4*{d_prev}))")
        self._prev_dist = cur

    def _subtree_leaves(self, pg, v, away_from):
        # leaves of the current graph inside v's light side (away from its
        # unique outward neighbor)
        out = []
        seen = {v, away_from}
        q = deque(u for u in pg.adj[v] if u != away_from)
        seen.update(q)
        side = [v]
        while q:
            x = q.popleft()
            side.append(x)
            for u in pg.adj[x]:
                if u not in seen:
                    seen.add(u)
                    q.append(u)
        for x in side:
            if len(pg.adj[x]) == 1 and x != v:
                out.append(x)
        if len(pg.adj[v]) == 1:
            out.append(v)
        return out

    def _bfs(self, adj, src):
        dist = {src: 0}
        q = deque([src])
        while q:
            v = q.popleft()
            for u in adj.get(v, ()):
                if u not in dist:
                    dist[u] = dist[v] + 1
                    q.append(u)
        return dist

    def _fail(self, msg):
        self.fired.append(msg)
        raise CheckFailure(msg)


class ZLayerChecks:
    """Independence assertion for the layer sets of path compression."""

    def __init__(self):
        self.layers_seen = 0

    def __call__(self, g, alive_run, zset, layer):
        members = set(zset)
        position = {v: i for i, v in enumerate(alive_run)}
        for v in zset:
            i = position[v]
            for j in (i - 1, i + 1):
                if 0 <= j < len(alive_run) and alive_run[j] in members:
                    raise CheckFailure(
                        f"layer {layer} not independent: {v} next to {alive_run[j]}")
        self.layers_seen += 1
