"""Bundled node-edge-checkable problems.

Constraint multisets are enumerated explicitly up to a degree bound, so a
problem instance always names the largest degree it supports.
"""

from .lcl import BOT, LclProblem


def mis_problem(delta_max=4):
    """Maximal independent set: members label every half-edge 1; non-members
    label one half-edge P (pointing at a member) and the rest 0."""
    node = [[]]  # isolated nodes count as members: empty multiset allowed
    for d in range(1, delta_max + 1):
        node.append([(BOT, "1")] * d)
        node.append([(BOT, "P")] + [(BOT, "0")] * (d - 1))
    edge = [
        [(BOT, "1"), (BOT, "0")],
        [(BOT, "1"), (BOT, "P")],
        [(BOT, "0"), (BOT, "0")],
    ]
    return LclProblem(sigma_in=[BOT], sigma_out=["0", "1", "P"],
                      node_constraints=node, edge_constraints=edge,
                      delta_max=delta_max, name="mis")


def two_coloring_problem(delta_max=4):
    """Proper 2-coloring: a node uses one color on all its half-edges, and
    each edge sees both colors."""
    node = [[]]
    for d in range(1, delta_max + 1):
        node.append([(BOT, "A")] * d)
        node.append([(BOT, "B")] * d)
    edge = [[(BOT, "A"), (BOT, "B")]]
    return LclProblem(sigma_in=[BOT], sigma_out=["A", "B"],
                      node_constraints=node, edge_constraints=edge,
                      delta_max=delta_max, name="two_coloring")


def path_orientation_problem():
    """Edge orientation on paths driven by a single marked endpoint.

    Inputs 0/1 per half-edge (a node's input repeated on its half-edges);
    outputs U (unoriented), O (outgoing), I (incoming).  Degree-2 nodes pass
    an orientation through or stay unoriented on both sides; a degree-1 node
    with input 1 must see an oriented edge, with input 0 it must not see an
    outgoing one.  Net effect: exactly the path containing the marked
    endpoint is oriented, consistently away from it."""
    ins = ["0", "1"]
    node = {()}
    # degree 1: marked endpoints orient, unmarked ones never point outward
    node.add((("1", "I"),))
    node.add((("1", "O"),))
    node.add((("0", "U"),))
    node.add((("0", "I"),))
    # degree 2: both sides unoriented, or one incoming and one outgoing
    for i1 in ins:
        for i2 in ins:
            node.add(tuple(sorted([(i1, "U"), (i2, "U")])))
            node.add(tuple(sorted([(i1, "I"), (i2, "O")])))
    edge = set()
    for i1 in ins:
        for i2 in ins:
            edge.add(tuple(sorted([(i1, "U"), (i2, "U")])))
            edge.add(tuple(sorted([(i1, "O"), (i2, "I")])))
    return LclProblem(sigma_in=ins, sigma_out=["I", "O", "U"],
                      node_constraints=sorted(node), edge_constraints=sorted(edge),
                      delta_max=2, name="path_orientation")


BUNDLED = {
    "mis": mis_problem,
    "two_coloring": two_coloring_problem,
    "path_orientation": path_orientation_problem,
}


def bundled_problem(name, delta_max=4):
    if name not in BUNDLED:
        raise KeyError(f"unknown bundled problem {name!r}")
    fn = BUNDLED[name]
    try:
        return fn(delta_max)
    except TypeError:
        return fn()
