"""Districts, closures and densely connected pairs."""

from __future__ import annotations

from networkx.utils import UnionFind

from .graph_core import MDag, GraphError, NodeSet, bits


def _districts_within(g: MDag, s: NodeSet) -> list[NodeSet]:
    """Districts of the sub-mDAG on ``s``, computed without reindexing."""
    uf = UnionFind(bits(s))
    for f in g.facets:
        members = list(bits(f & s))
        if len(members) > 1:
            uf.union(*members)
    return sorted(sum(1 << v for v in block) for block in uf.to_sets())


def districts(g: MDag) -> list[NodeSet]:
    return _districts_within(g, g.nodes)


def _dis(g: MDag, within: NodeSet, a: NodeSet) -> NodeSet:
    return sum(d for d in _districts_within(g, within) if d & a)


def _ancestors_within(g: MDag, within: NodeSet, a: NodeSet) -> NodeSet:
    pa = g.parents_table
    out = a
    frontier = a
    while frontier:
        nxt = 0
        for v in bits(frontier):
            nxt |= pa[v] & within
        frontier = nxt & ~out
        out |= nxt
    return out


def closure_steps(g: MDag, a: NodeSet) -> list[NodeSet]:
    """The sequence A(0), A(1), ... ending with the first repeated set."""
    if a == 0:
        raise GraphError("closure of the empty set")
    steps = [g.nodes]
    district_step = True
    while True:
        cur = steps[-1]
        nxt = _dis(g, cur, a) if district_step else _ancestors_within(g, cur, a)
        steps.append(nxt)
        # each step is idempotent on its own output, so one unchanged step
        # after the first means both operations are at a fixpoint
        if nxt == cur and len(steps) > 2:
            return steps
        district_step = not district_step


def closure(g: MDag, a: NodeSet) -> NodeSet:
    return closure_steps(g, a)[-1]


def is_bidirected_connected(g: MDag, s: NodeSet) -> bool:
    return len(_districts_within(g, s)) == 1


def densely_connected(g: MDag, v: int, w: int) -> bool:
    if v == w:
        raise GraphError("densely_connected needs two distinct nodes")
    pa = g.parents_table

    def pa_of(s: NodeSet) -> NodeSet:
        out = 0
        for u in bits(s):
            out |= pa[u]
        return out

    if pa_of(closure(g, 1 << w)) >> v & 1:
        return True
    if pa_of(closure(g, 1 << v)) >> w & 1:
        return True
    return is_bidirected_connected(g, closure(g, (1 << v) | (1 << w)))


def densely_connected_pairs(g: MDag) -> frozenset[tuple[int, int]]:
    return frozenset(
        (v, w) for v in range(g.n) for w in range(v + 1, g.n) if densely_connected(g, v, w)
    )
