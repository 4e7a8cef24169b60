"""Forest representation, instance generators, and sequential oracles.

The oracles here are the ground truth every distributed result is checked
against: union-find / BFS component labels, post-order subtree sizes, exact
tree diameters, and the light/heavy classification of nodes against an
explicit threshold (the role played by n**(delta/8) at full scale).
"""

from __future__ import annotations

import json
import math
import random
from collections import deque


class InvalidSpec(ValueError):
    pass


class UnknownNode(KeyError):
    pass


class NotAForest(ValueError):
    pass


class Forest:
    """Undirected simple forest with arbitrary u64 node ids.

    Adjacency lists are kept sorted by neighbor id; the port numbering of a
    node is the 1-based position in that order, so ports are exactly
    {1..deg(v)}.  ``half_edge_inputs`` optionally maps (v, u) to an input
    label for LCL instances, and ``marks`` is a side table for special nodes
    (e.g. the s/t endpoints of the path-connectivity family).
    """

    def __init__(self, adjacency, half_edge_inputs=None, marks=None, validate=True):
        self.adj = {v: sorted(ns) for v, ns in adjacency.items()}
        self.half_edge_inputs = dict(half_edge_inputs or {})
        self.marks = dict(marks or {})
        if validate:
            self.validate()

    # -- construction ------------------------------------------------------

    @classmethod
    def from_edges(cls, nodes, edges, **kw):
        adjacency = {v: [] for v in nodes}
        for u, v in edges:
            adjacency[u].append(v)
            adjacency[v].append(u)
        return cls(adjacency, **kw)

    def validate(self):
        seen = set()
        for v, ns in self.adj.items():
            if v < 0:
                raise NotAForest("node ids must be non-negative")
            for u in ns:
                if u == v:
                    raise NotAForest(f"self-loop at {v}")
                if u not in self.adj:
                    raise NotAForest(f"dangling edge {v}-{u}")
                if ns.count(u) > 1:
                    raise NotAForest(f"parallel edge {v}-{u}")
                if v not in self.adj[u]:
                    raise NotAForest(f"asymmetric edge {v}-{u}")
            seen.add(v)
        n = len(seen)
        m = sum(len(ns) for ns in self.adj.values()) // 2
        if m != n - len(self.component_lists()):
            raise NotAForest("graph contains a cycle")

    # -- basic queries -----------------------------------------------------

    @property
    def n(self):
        return len(self.adj)

    @property
    def m(self):
        return sum(len(ns) for ns in self.adj.values()) // 2

    def nodes(self):
        return sorted(self.adj)

    def edges(self):
        return [(v, u) for v in sorted(self.adj) for u in self.adj[v] if v < u]

    def degree(self, v):
        return len(self.adj[v])

    def neighbors(self, v):
        return self.adj[v]

    def port_of(self, v, u):
        """1-based port of neighbor u at node v."""
        return self.adj[v].index(u) + 1

    def component_lists(self):
        seen = set()
        comps = []
        for s in sorted(self.adj):
            if s in seen:
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

    # -- file formats --------------------------------------------------------

    def to_text(self):
        lines = [f"{self.n} {self.m}"]
        for u, v in self.edges():
            lines.append(f"{u} {v}")
        if self.half_edge_inputs:
            lines.append("# inputs")
            for (v, u), lab in sorted(self.half_edge_inputs.items()):
                lines.append(f"{v} {u} {lab}")
        if self.marks:
            lines.append("# marks")
            for name, v in sorted(self.marks.items()):
                lines.append(f"{name} {v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        lines = [l.strip() for l in text.strip().splitlines() if l.strip()]
        if not lines:
            raise NotAForest("empty forest file")
        first = lines[0].split()
        if first[0].startswith("{"):
            return cls.from_json(json.loads(text))
        n, m = int(first[0]), int(first[1])
        edges = []
        inputs = {}
        marks = {}
        section = "edges"
        nodes = set()
        for line in lines[1:]:
            if line.startswith("#"):
                section = line[1:].strip()
                continue
            parts = line.split()
            if section == "edges":
                u, v = int(parts[0]), int(parts[1])
                edges.append((u, v))
                nodes.add(u)
                nodes.add(v)
            elif section == "inputs":
                inputs[(int(parts[0]), int(parts[1]))] = parts[2]
            elif section == "marks":
                marks[parts[0]] = int(parts[1])
        if len(edges) != m:
            raise NotAForest(f"header says {m} edges, file has {len(edges)}")
        while len(nodes) < n:
            # isolated nodes are listed implicitly: ids dense from 0 unless
            # the json form is used
            raise NotAForest("text format cannot express isolated nodes; use json")
        return cls.from_edges(nodes, edges, half_edge_inputs=inputs, marks=marks)

    def to_json(self):
        return {
            "nodes": self.nodes(),
            "edges": [[u, v] for u, v in self.edges()],
            "inputs": [[v, u, lab] for (v, u), lab in sorted(self.half_edge_inputs.items())],
            "marks": self.marks,
        }

    @classmethod
    def from_json(cls, obj):
        inputs = {(v, u): lab for v, u, lab in obj.get("inputs", [])}
        return cls.from_edges(
            obj["nodes"], [tuple(e) for e in obj["edges"]],
            half_edge_inputs=inputs, marks=obj.get("marks", {}),
        )


# -- generators -------------------------------------------------------------

_KINDS = ("path", "star", "broom", "caterpillar", "balanced_tree",
          "random_forest", "st_path_family")


def generate(kind, seed=0, **params):
    """Build a forest instance; generation randomness is seeded, algorithms
    stay deterministic."""
    if kind not in _KINDS:
        raise InvalidSpec(f"unknown instance kind {kind!r}")
    rng = random.Random(seed)
    if kind == "path":
        length = int(params.get("length", 4))
        if length < 0:
            raise InvalidSpec("path length must be >= 0")
        nodes = list(range(1, length + 2))
        edges = [(i, i + 1) for i in nodes[:-1]]
        return Forest.from_edges(nodes, edges)
    if kind == "star":
        leaves = int(params.get("leaves", 3))
        if leaves < 0:
            raise InvalidSpec("star needs >= 0 leaves")
        center = leaves + 1
        return Forest.from_edges(range(1, leaves + 2), [(center, i) for i in range(1, leaves + 1)])
    if kind == "broom":
        handle = int(params.get("handle", 3))
        bristles = int(params.get("bristles", 3))
        if handle < 1 or bristles < 0:
            raise InvalidSpec("broom needs handle >= 1")
        nodes = list(range(1, handle + bristles + 1))
        edges = [(i, i + 1) for i in range(1, handle)]
        edges += [(handle, handle + j) for j in range(1, bristles + 1)]
        return Forest.from_edges(nodes, edges)
    if kind == "caterpillar":
        spine = int(params.get("spine", 4))
        n_total = params.get("n")
        legs = int(params.get("legs", 2))
        if spine < 1:
            raise InvalidSpec("caterpillar needs spine >= 1")
        nodes = list(range(1, spine + 1))
        edges = [(i, i + 1) for i in range(1, spine)]
        nxt = spine + 1
        if n_total is not None:
            n_total = int(n_total)
            if n_total < spine:
                raise InvalidSpec("caterpillar n smaller than spine")
            extra = n_total - spine
            for j in range(extra):
                host = 1 + (j % spine)
                nodes.append(nxt)
                edges.append((host, nxt))
                nxt += 1
        else:
            for host in range(1, spine + 1):
                for _ in range(legs):
                    nodes.append(nxt)
                    edges.append((host, nxt))
                    nxt += 1
        return Forest.from_edges(nodes, edges)
    if kind == "balanced_tree":
        degree = int(params.get("degree", 2))
        depth = int(params.get("depth", 3))
        if degree < 1 or depth < 0 or (degree == 1 and depth > 1):
            raise InvalidSpec("balanced tree needs degree >= 2 for depth > 1")
        nodes = [1]
        edges = []
        frontier = [1]
        nxt = 2
        for _ in range(depth):
            newf = []
            for v in frontier:
                for _ in range(degree):
                    nodes.append(nxt)
                    edges.append((v, nxt))
                    newf.append(nxt)
                    nxt += 1
            frontier = newf
        return Forest.from_edges(nodes, edges)
    if kind == "random_forest":
        n = int(params.get("n", 100))
        comps = int(params.get("components", 1))
        if n < 1 or comps < 1 or comps > n:
            raise InvalidSpec("random_forest needs 1 <= components <= n")
        # scrambled, non-dense ids
        ids = rng.sample(range(1, max(4 * n, 64)), n)
        sizes = _split_sizes(n, comps, rng)
        adjacency = {}
        idx = 0
        for size in sizes:
            block = ids[idx: idx + size]
            idx += size
            adjacency[block[0]] = []
            for j in range(1, size):
                parent = block[rng.randrange(j)]
                adjacency[block[j]] = [parent]
                adjacency[parent].append(block[j])
        return Forest(adjacency)
    if kind == "st_path_family":
        d = int(params.get("diameter", params.get("D", 16)))
        comps = int(params.get("components", 2))
        if d < 1 or comps < 1:
            raise InvalidSpec("st_path_family needs diameter >= 1, components >= 1")
        nodes, edges = [], []
        endpoints = []
        nxt = 1
        for _ in range(comps):
            length = rng.randint(d, 2 * d)
            chain = list(range(nxt, nxt + length + 1))
            nxt += length + 1
            nodes.extend(chain)
            edges.extend((chain[i], chain[i + 1]) for i in range(length))
            endpoints.append((chain[0], chain[-1]))
        s = endpoints[0][0]
        tcomp = rng.randrange(comps)
        t = endpoints[tcomp][1]
        return Forest.from_edges(nodes, edges, marks={"s": s, "t": t})
    raise InvalidSpec(kind)


def _split_sizes(n, comps, rng):
    cuts = sorted(rng.sample(range(1, n), comps - 1)) if comps > 1 else []
    bounds = [0] + cuts + [n]
    return [bounds[i + 1] - bounds[i] for i in range(comps)]


# -- oracles ---------------------------------------------------------------

class _UnionFind:
    def __init__(self):
        self.parent = {}

    def find(self, x):
        self.parent.setdefault(x, x)
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def oracle_components(forest):
    """Ground truth: node -> max id of its component, via union-find."""
    uf = _UnionFind()
    for v in forest.adj:
        uf.find(v)
    for u, v in forest.edges():
        uf.union(u, v)
    best = {}
    for v in forest.adj:
        r = uf.find(v)
        best[r] = max(best.get(r, v), v)
    return {v: best[uf.find(v)] for v in forest.adj}


def oracle_components_bfs(forest):
    """Second, independent labeling used to cross-check the union-find oracle."""
    return {v: max(comp) for comp in forest.component_lists() for v in comp}


def oracle_subtree_sizes(forest, root):
    """Sizes |T(v, root)| for every v in root's component (iterative post-order).

    Also asserts the structural bound sum_v |T(v,r)| <= (D+1)*n for the
    component, which the global-memory accounting of the solver leans on.
    """
    if root not in forest.adj:
        raise UnknownNode(root)
    order = []
    parent = {root: None}
    stack = [root]
    while stack:
        v = stack.pop()
        order.append(v)
        for u in forest.adj[v]:
            if u != parent[v]:
                parent[u] = v
                stack.append(u)
    sizes = {v: 1 for v in order}
    for v in reversed(order):
        if parent[v] is not None:
            sizes[parent[v]] += sizes[v]
    comp = set(order)
    d = _component_diameter(forest, root)
    assert sum(sizes.values()) <= (d + 1) * len(comp), "subtree size sum bound violated"
    return sizes


def _bfs_far(forest, src, allowed=None):
    dist = {src: 0}
    q = deque([src])
    far = src
    while q:
        v = q.popleft()
        for u in forest.adj[v]:
            if u not in dist and (allowed is None or u in allowed):
                dist[u] = dist[v] + 1
                if dist[u] > dist[far]:
                    far = u
                q.append(u)
    return far, dist


def _component_diameter(forest, member):
    a, _ = _bfs_far(forest, member)
    b, dist = _bfs_far(forest, a)
    return dist[b]


def diameter(forest):
    """(per-component diameters keyed by component max id, overall max)."""
    per = {}
    for comp in forest.component_lists():
        per[max(comp)] = _component_diameter(forest, comp[0])
    return per, (max(per.values()) if per else 0)


def side_sizes(forest):
    """For every ordered pair (v,u) with u adjacent to v, the size of the
    component of v after removing edge {v,u} (i.e. |G_{v not-> u}|)."""
    sizes = {}
    for comp in forest.component_lists():
        root = comp[0]
        total = len(comp)
        parent = {root: None}
        order = []
        stack = [root]
        while stack:
            v = stack.pop()
            order.append(v)
            for u in forest.adj[v]:
                if u != parent[v]:
                    parent[u] = v
                    stack.append(u)
        down = {v: 1 for v in order}
        for v in reversed(order):
            if parent[v] is not None:
                down[parent[v]] += down[v]
        for v in order:
            for u in forest.adj[v]:
                if u == parent[v]:
                    sizes[(v, u)] = down[v]
                else:
                    sizes[(v, u)] = total - down[u]
    return sizes


def classify_light_heavy(forest, threshold):
    """Per-node classification against an explicit threshold.

    A node is light against neighbor u when its side away from u has at most
    ``threshold`` nodes; heavy when no such neighbor exists.  Returns
    {v: sorted list of neighbors v is light against} (empty list = heavy).
    On instances with a heavy node, the structural facts the solver relies on
    are asserted: heavy nodes induce a connected subgraph and every light
    node is light against exactly one neighbor.
    """
    if threshold < 1:
        raise InvalidSpec("light threshold must be >= 1")
    sizes = side_sizes(forest)
    light_against = {}
    for v in forest.adj:
        light_against[v] = sorted(
            u for u in forest.adj[v] if sizes[(v, u)] <= threshold
        )
        if not forest.adj[v]:
            light_against[v] = []
    for comp in forest.component_lists():
        heavy = [v for v in comp if forest.adj[v] and not light_against[v]]
        if not heavy:
            continue
        hs = set(heavy)
        seen = {heavy[0]}
        q = deque([heavy[0]])
        while q:
            v = q.popleft()
            for u in forest.adj[v]:
                if u in hs and u not in seen:
                    seen.add(u)
                    q.append(u)
        assert seen == hs, "heavy nodes do not induce a connected component"
        for v in comp:
            if v not in hs:
                assert len(light_against[v]) == 1, (
                    "light node with ambiguous direction in heavy-containing tree"
                )
    return light_against


def default_thresholds(n, delta):
    """Threshold defaults from the (n, delta) formulas, taken with ceilings:
    light L ~ n**(delta/8), full F = 2 L^2, subtree H ~ n**(delta/2)."""
    light = max(1, math.ceil(n ** (delta / 8)))
    full = 2 * light * light
    subtree = max(1, math.ceil(n ** (delta / 2)))
    return light, full, subtree


def full_threshold_for(light, dhat):
    """Regime-aware full threshold.

    The 2*L^2 formula presumes the diameter guess never exceeds L (at full
    scale dhat <= n**(delta/8)).  With small explicit thresholds a light
    node's outward side can reach ~L*dhat after a sanctioned full
    exponentiation, so the cap scales with the guess instead."""
    return 2 * light * max(light, dhat + 2)
