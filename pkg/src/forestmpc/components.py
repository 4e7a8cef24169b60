"""Connected components and rooting on forests.

Wraps the max-id phase engine with:

* linear-memory preprocessing (independent-set contraction + leaf raking,
  invertible through a process log),
* a doubly exponential diameter-guess ladder with per-component failure
  detection and freezing (a component keeps the outcome of its first
  successful guess, which makes rooting component-stable),
* the rooting variant, where decompression spreads edge orientations
  instead of ids,
* a deterministic O(log n) label-propagation fallback for the case where
  the guess ladder is capped below the true diameter.

The independent-set derandomization draws three-wise independent coins from
a quadratic polynomial over GF(2^20) and fixes the seed chunk by chunk via
exact conditional expectations (computable here because each coin is an
F2-linear form in the seed bits).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .maxid import (CompressEvent, PhaseGraph, run_phases, revert_failed,
                    unwind, _orient_path, _orient_subtree, phase_budget)
from .substrate import MpcSim, MachineConfig


class InvalidInput(ValueError):
    pass


class NotAForest(ValueError):
    pass


# -- GF(2^20) hashing ---------------------------------------------------------

_GF_K = 20
_GF_POLY = (1 << 20) | (1 << 3) | 1  # x^20 + x^3 + 1, irreducible over F2


def _gf_mul(a, b):
    acc = 0
    while b:
        if b & 1:
            acc ^= a
        b >>= 1
        a <<= 1
        if a >> _GF_K:
            a ^= _GF_POLY
    return acc


def _build_tables():
    # SQ[t] = (x^t)^2 in the field; ROW[t][j]-bit j of r(x^t) where
    # r(y)_j = low bit of (x^j * y): both are F2-linear in their argument.
    sq = [_gf_mul(1 << t, 1 << t) for t in range(_GF_K)]
    row = []
    for t in range(_GF_K):
        y = 1 << t
        bits = 0
        m = y
        for j in range(_GF_K):
            if m & 1:
                bits |= 1 << j
            m <<= 1
            if m >> _GF_K:
                m ^= _GF_POLY
        row.append(bits)
    return (np.array(sq, dtype=np.uint64), np.array(row, dtype=np.uint64))


_SQ_TAB, _ROW_TAB = _build_tables()
_SEED_BITS = 2 * _GF_K + 1  # a (20) | b (20) | parity bit of c


def _vec_linear(tab, x):
    """Apply an F2-linear table to every element of x (uint64 array)."""
    acc = np.zeros_like(x)
    for t in range(_GF_K):
        sel = (x >> np.uint64(t)) & np.uint64(1)
        acc ^= sel * tab[t]
    return acc


def _coin_masks(x):
    """Mask of seed bits whose parity gives coin(x) for h(x)=a*x^2+b*x+c."""
    xsq = _vec_linear(_SQ_TAB, x)
    lo = _vec_linear(_ROW_TAB, xsq)
    hi = _vec_linear(_ROW_TAB, x)
    return lo | (hi << np.uint64(_GF_K)) | (np.uint64(1) << np.uint64(2 * _GF_K))


def _parity64(v):
    v = v ^ (v >> np.uint64(32))
    v = v ^ (v >> np.uint64(16))
    v = v ^ (v >> np.uint64(8))
    v = v ^ (v >> np.uint64(4))
    v = v ^ (v >> np.uint64(2))
    v = v ^ (v >> np.uint64(1))
    return (v & np.uint64(1)).astype(np.int64)


def _wht(mat):
    """In-place Walsh-Hadamard transform along the last axis."""
    h = 1
    n = mat.shape[-1]
    while h < n:
        for i in range(0, n, h * 2):
            a = mat[..., i:i + h].copy()
            b = mat[..., i + h:i + 2 * h].copy()
            mat[..., i:i + h] = a + b
            mat[..., i + h:i + 2 * h] = a - b
        h *= 2
    return mat


def deterministic_is(graph, candidates, comp_of=None, sim=None, delta=0.5,
                     chunk_bits=None):
    """Deterministic independent set among degree-2 nodes.

    Every candidate flips a 3-wise independent coin; a candidate joins S when
    it is marked and neither neighbor is.  The seed is fixed chunk by chunk,
    each chunk chosen to maximize the exact conditional expectation of |S|,
    so the returned set always satisfies |S| >= floor(|candidates|/8).

    With ``comp_of`` given, seeds are chosen independently per component
    (each component's set then depends on that component alone).  Groups
    smaller than 8 additionally get a greedy pass guaranteeing one member.
    """
    U = sorted(candidates)
    if not U:
        return set()
    adj = graph.adj
    for u in U:
        deg = len(adj[u]) if not hasattr(graph, "degree") else graph.degree(u)
        if deg != 2:
            raise InvalidInput(f"candidate {u} has degree {deg}, expected 2")
    uset = set(U)
    if comp_of is None:
        group_of = {u: 0 for u in U}
        group_keys = [0]
    else:
        keys = sorted({comp_of[u] for u in U})
        key_ix = {k: i for i, k in enumerate(keys)}
        group_of = {u: key_ix[comp_of[u]] for u in U}
        group_keys = keys
    n_groups = len(group_keys)
    # rank within group = the hashed point; distinct within each group
    counters = [0] * n_groups
    rank = np.empty(len(U), dtype=np.uint64)
    grp = np.empty(len(U), dtype=np.int64)
    for i, u in enumerate(U):
        g = group_of[u]
        grp[i] = g
        rank[i] = counters[g]
        counters[g] += 1
    index_of = {u: i for i, u in enumerate(U)}
    own_mask = _coin_masks(rank)
    # per candidate: up to two candidate neighbors (non-candidates never mark)
    nb_masks = [own_mask]
    nb_valid = [np.ones(len(U), dtype=bool)]
    for slot in range(2):
        col = np.zeros(len(U), dtype=np.uint64)
        valid = np.zeros(len(U), dtype=bool)
        for i, u in enumerate(U):
            others = [w for w in sorted(adj[u]) if w in uset]
            if slot < len(others):
                col[i] = own_mask[index_of[others[slot]]]
                valid[i] = True
        nb_masks.append(col)
        nb_valid.append(valid)
    forms = np.stack(nb_masks)            # 3 x |U|
    present = np.stack(nb_valid)          # 3 x |U|
    f_count = present.sum(axis=0)
    if chunk_bits is None:
        gsize = max(len(adj), 2)
        chunk_bits = max(8, math.ceil(delta * math.log2(gsize) / 100))
    # aggregation tree over the (per-group) candidate sets drives the rounds
    if sim is not None:
        if comp_of is None:
            tree = sim.build_aggregation_tree([U])
        else:
            tree = sim.build_aggregation_tree(
                [[u for u in U if group_of[u] == g] for g in range(n_groups)])
    seeds = np.zeros(n_groups, dtype=np.uint64)
    fixed_mask = np.uint64(0)
    pos = 0
    ncand = 1 << chunk_bits
    while pos < _SEED_BITS:
        width = min(chunk_bits, _SEED_BITS - pos)
        ncand_here = 1 << width
        chunk_mask = np.uint64(((1 << width) - 1) << pos)
        free_after = np.uint64(
            ((1 << _SEED_BITS) - 1) & ~int(fixed_mask) & ~int(chunk_mask))
        w_table = np.zeros((n_groups, ncand_here), dtype=np.float64)
        # every XOR-combination of a candidate's present forms contributes a
        # +-2^-f term when its mask dies on the still-free bits
        for combo in range(1, 8):
            sel = [s for s in range(3) if combo >> s & 1]
            ok = np.ones(len(U), dtype=bool)
            m = np.zeros(len(U), dtype=np.uint64)
            for s in sel:
                ok &= present[s]
                m = m ^ forms[s]
            t_all = 1 if (combo & 1) else 0
            alive = ok & ((m & free_after) == 0)
            if not alive.any():
                continue
            seed_now = seeds[grp]
            signbit = (t_all + _parity64(m & (seed_now & fixed_mask))) % 2
            weight = np.where(signbit == 1, -1.0, 1.0) / (2.0 ** f_count)
            beta = ((m & chunk_mask) >> np.uint64(pos)).astype(np.int64)
            sel_ix = np.nonzero(alive)[0]
            np.add.at(w_table, (grp[sel_ix], beta[sel_ix]), weight[sel_ix])
        base = (1.0 / (2.0 ** f_count))
        const = np.bincount(grp, weights=base, minlength=n_groups)
        scores = _wht(w_table)
        # E(alpha) = const + scores[:, alpha]; pick the maximizing alpha
        best = np.argmax(np.round(scores, 9), axis=1)
        seeds |= best.astype(np.uint64) << np.uint64(pos)
        pos += width
        fixed_mask |= chunk_mask
        if sim is not None:
            sim.agg_reduce(tree, [0] * max(1, len(tree.leaf_blocks)), lambda a, b: a)
            sim.agg_broadcast(tree, 0)
    coins = _parity64(own_mask & seeds[grp])
    chosen = set()
    for i, u in enumerate(U):
        if not coins[i]:
            continue
        if all(coins[index_of[w]] == 0 for w in adj[u] if w in uset):
            chosen.add(u)
    # small groups: greedy rescue so progress never stalls
    sizes = np.bincount(grp, minlength=n_groups)
    for g in range(n_groups):
        if 0 < sizes[g] < 8 and not any(group_of[u] == g for u in chosen):
            for u in U:
                if group_of[u] == g and not any(w in chosen for w in adj[u]):
                    chosen.add(u)
                    break
    total = len(U)
    got = len(chosen)
    assert got >= total // 8, f"independent set too small: {got} < {total}//8"
    return chosen


# -- preprocessing ------------------------------------------------------------


def preprocess(pg, sim, iterations, events, phase_base=0, comp_of=None,
               delta=0.5):
    """Run ``iterations`` more contraction+rake sweeps, appending events.

    Each sweep contracts an independent set of degree-2 nodes into their
    higher-id neighbor, then rakes every remaining leaf (of two adjacent
    leaves, only the higher-id one is raked).  Events are invertible and
    carry the absorbed node so postprocessing can extend the solution.
    """
    for j in range(iterations):
        phase = phase_base + j
        cands = [v for v in pg.alive_nodes() if pg.degree(v) == 2]
        z = deterministic_is(pg, cands, comp_of=comp_of, sim=sim, delta=delta) \
            if cands else set()
        for v in sorted(z):
            u, w = sorted(pg.adj[v])
            absorber = u if pg.idval.get(u, u) > pg.idval.get(w, w) else w
            absorber = max(u, w)
            other = u if absorber == w else w
            ev = CompressEvent(phase=phase, step="contract", absorber=absorber,
                               absorbed=[v],
                               removed_edges=[(v, u), (v, w)],
                               added_edges=[(other, absorber)])
            pg.apply_event(ev)
            events.append(ev)
        if sim is not None:
            sim.tick(rounds=2, message_words=2 * len(z))
        leaves = [v for v in pg.alive_nodes() if pg.degree(v) == 1]
        raked = []
        for v in sorted(leaves):
            if not pg.alive[v] or pg.degree(v) != 1:
                continue
            u = next(iter(pg.adj[v]))
            if pg.degree(u) == 1 and v < u:
                continue  # adjacent leaves: only the higher id rakes
            ev = CompressEvent(phase=phase, step="rake", absorber=u,
                               absorbed=[v], removed_edges=[(v, u)])
            pg.apply_event(ev)
            events.append(ev)
            raked.append(v)
        if sim is not None:
            sim.tick(rounds=2, message_words=len(raked))
    return events


def postprocess(pg, events, sim=None, orient=None):
    """Replay the preprocess log backwards with Insert/Expand, spreading the
    solved labels (or, in rooting mode, edge orientations)."""
    by_phase = {}
    for ev in events:
        by_phase.setdefault(ev.phase, []).append(ev)
    for phase in sorted(by_phase, reverse=True):
        for ev in reversed(by_phase[phase]):
            if orient is not None:
                if ev.step == "contract":
                    _orient_path(pg, ev, orient)
                elif ev.step == "rake":
                    _orient_subtree(pg, ev, orient)
                else:
                    raise InvalidInput(f"unexpected preprocess step {ev.step}")
            pg.undo_event(ev, spread_id=orient is None)
        if sim is not None:
            sim.tick(rounds=2,
                     message_words=sum(len(e.absorbed) for e in by_phase[phase]))


# -- guess schedule ------------------------------------------------------------


@dataclass
class GuessSchedule:
    """Doubly exponential diameter guesses 4, 16, 256, ... up to a cap.

    ``start`` overrides the first guess (it still squares from there)."""

    cap: int
    start: int = 4
    guesses: list = field(default_factory=list)
    fallback: bool = False

    def __post_init__(self):
        g = max(2, self.start)
        while True:
            self.guesses.append(g)
            if g >= self.cap:
                break
            g = g * g

    def __iter__(self):
        return iter(self.guesses)


# -- connected components -------------------------------------------------------


def _fallback_cc(forest, nodes, sim=None):
    """Deterministic max-label propagation with pointer doubling; O(log n)
    rounds on forests.  Used only when the guess ladder is capped too low."""
    nodeset = set(nodes)
    ptr = {v: max([v] + [u for u in forest.adj[v] if u in nodeset])
           for v in nodes}
    budget = 4 * math.ceil(math.log2(max(len(nodes), 2))) + 8
    for _ in range(budget):
        nxt = {}
        for v in nodes:
            best = ptr[v]
            best = max(best, ptr.get(best, best))
            for u in forest.adj[v]:
                if u in nodeset:
                    best = max(best, ptr[u])
            nxt[v] = best
        if sim is not None:
            sim.tick(rounds=2, message_words=2 * len(nodes))
        if nxt == ptr:
            break
        ptr = nxt
    return ptr


def _new_sim(forest, delta, c_loc, strict_mode=False):
    n = max(forest.n, 1)
    config = MachineConfig(n=n, delta=delta, c_loc=c_loc, strict_mode=strict_mode)
    config.validate_for_input(forest.n, forest.m)
    return MpcSim(config, forest.nodes())


def _run_guess_ladder(forest, pg, sim, light, full, delta, c_iter,
                      dhat_start=None, guess_cap=None, comp_of=None,
                      checks=None):
    """Shared core of solve_cc / root_forest: preprocess incrementally, try
    guesses, freeze finished components, revert failed ones.  Returns
    (maxid events kept, preprocess events, fallback node set)."""
    from .forest import full_threshold_for

    cap = guess_cap if guess_cap is not None else max(4, forest.n)
    schedule = list(GuessSchedule(max(cap, dhat_start or 0), start=dhat_start or 4))
    pre_events = []
    kept_events = []
    pre_iters = 0
    phase_counter = 0
    leftover = set()
    for dhat in schedule:
        target = 3 * math.ceil(math.log2(max(dhat, 2)))
        if sim is not None:
            sim.stats.mark(f"preprocess:dhat{dhat}")
        preprocess(pg, sim, target - pre_iters, pre_events,
                   phase_base=pre_iters, comp_of=comp_of, delta=delta)
        pre_iters = max(pre_iters, target)
        budget = phase_budget(len(pg.alive_nodes()), light)
        full_eff = full if full is not None else full_threshold_for(light, dhat)
        events, failed = run_phases(pg, dhat, light, full_eff, sim=sim,
                                    c_iter=c_iter, checks=checks,
                                    max_phases=budget)
        kept, failed_all = revert_failed(pg, events, failed)
        for ev in kept:
            ev.phase += phase_counter
        phase_counter += budget
        kept_events.extend(kept)
        leftover = failed_all
        if not failed_all:
            break
    return kept_events, pre_events, leftover


def solve_cc(forest, delta=0.5, c_loc=4.0, light=None, full=None, dhat=None,
             guess_cap=None, c_iter=4, sim=None, force_fallback=False,
             checks=None):
    """Every node learns the maximum id of its component.

    Returns (labels, sim).  The diameter is never an input: a doubly
    exponential guess ladder with per-component failure detection finds a
    workable guess, and a label-propagation fallback covers components whose
    diameter exceeds the ladder cap (only reachable with an explicit cap)."""
    from .forest import default_thresholds

    if light is None:
        light, _, _ = default_thresholds(max(forest.n, 2), delta)
    if sim is None:
        sim = _new_sim(forest, delta, c_loc)
    if force_fallback:
        labels = _fallback_cc(forest, forest.nodes(), sim=sim)
        return labels, sim
    pg = PhaseGraph(forest)
    kept, pre_events, leftover = _run_guess_ladder(
        forest, pg, sim, light, full, delta, c_iter,
        dhat_start=dhat, guess_cap=guess_cap, checks=checks)
    fallback_labels = {}
    if leftover:
        affected = _original_components(forest, leftover)
        fallback_labels = _fallback_cc(forest, sorted(affected), sim=sim)
    unwind(pg, kept, sim=sim)
    postprocess(pg, pre_events, sim=sim)
    labels = dict(pg.idval)
    labels.update(fallback_labels)
    return labels, sim


def _original_components(forest, seed_nodes):
    seeds = set(seed_nodes)
    out = set()
    for comp in forest.component_lists():
        if seeds.intersection(comp):
            out.update(comp)
    return out


# -- rooting --------------------------------------------------------------------


@dataclass
class Orientation:
    """Parent pointers per node; roots have parent None."""

    parent: dict
    roots: dict  # component label (max id) -> root node

    def validate(self):
        roots = {v for v, p in self.parent.items() if p is None}
        assert roots == set(self.roots.values()), "root set inconsistent"
        for v in self.parent:
            seen = {v}
            cur = v
            while self.parent[cur] is not None:
                cur = self.parent[cur]
                assert cur not in seen, f"parent cycle through {v}"
                seen.add(cur)


def root_forest(forest, delta=0.5, c_loc=4.0, light=None, full=None,
                dhat=None, guess_cap=None, c_iter=4, sim=None):
    """Root every component of the forest; returns (Orientation, sim).

    First pass: solve_cc, so every node knows its component label.  Second
    pass: the same compression cascade, but with per-component seed choices
    in the independent set and decompression spreading orientations toward
    each component's surviving node.  A component's outcome is frozen at its
    first successful guess, so the result matches a solo run of the same
    component (component stability)."""
    from .forest import default_thresholds

    if light is None:
        light, _, _ = default_thresholds(max(forest.n, 2), delta)
    labels, sim = solve_cc(forest, delta=delta, c_loc=c_loc, light=light,
                           full=full, dhat=dhat, guess_cap=guess_cap,
                           c_iter=c_iter, sim=sim)
    sim.stats.mark("rooting:orientation-pass")
    pg = PhaseGraph(forest)
    kept, pre_events, leftover = _run_guess_ladder(
        forest, pg, sim, light, full, delta, c_iter,
        dhat_start=dhat, guess_cap=guess_cap, comp_of=labels)
    orient = {}
    for v in pg.alive_nodes():
        orient[v] = None
    unwind(pg, kept, sim=sim, orient=orient)
    postprocess(pg, pre_events, sim=sim, orient=orient)
    if leftover:
        affected = _original_components(forest, leftover)
        _fallback_root(forest, affected, labels, orient, sim=sim)
    roots = {}
    for v, p in orient.items():
        if p is None:
            roots[labels[v]] = v
    return Orientation(parent=orient, roots=roots), sim


def _fallback_root(forest, nodes, labels, orient, sim=None):
    """BFS orientation toward each component's max-id node (fallback path)."""
    nodes = set(nodes)
    for comp in forest.component_lists():
        if not nodes.intersection(comp):
            continue
        root = max(comp)
        orient[root] = None
        q = deque([root])
        seen = {root}
        depth = 0
        while q:
            nxt = deque()
            for v in q:
                for u in forest.adj[v]:
                    if u not in seen:
                        seen.add(u)
                        orient[u] = v
                        nxt.append(u)
            q = nxt
            depth += 1
        if sim is not None:
            sim.tick(rounds=depth, message_words=len(comp))
