"""d-separation and e-separation over the visible nodes of an mDAG."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

from .graph_core import MDag, GraphError, NodeSet, PDag, bits, canonical_pdag, induced_subgraph, to_mask


@dataclass(frozen=True, order=True)
class SepRelation:
    """``A`` and ``B`` separated by ``C`` after deleting ``D`` (``D`` may be empty)."""

    a: NodeSet
    b: NodeSet
    c: NodeSet = 0
    d: NodeSet = 0

    def __post_init__(self) -> None:
        if not self.a or not self.b:
            raise GraphError("A and B must be nonempty")
        sets = (self.a, self.b, self.c, self.d)
        for i in range(4):
            for j in range(i + 1, 4):
                if sets[i] & sets[j]:
                    raise GraphError("separation sets must be pairwise disjoint")

    @classmethod
    def make(cls, a: NodeSet, b: NodeSet, c: NodeSet = 0, d: NodeSet = 0) -> "SepRelation":
        if b < a:
            a, b = b, a
        return cls(a, b, c, d)

    def serialize(self) -> str:
        def fmt(m: NodeSet) -> str:
            return ",".join(map(str, bits(m)))

        out = f"{fmt(self.a)}|{fmt(self.b)}|{fmt(self.c)}"
        if self.d:
            out += f"!{fmt(self.d)}"
        return out

    @classmethod
    def parse(cls, text: str) -> "SepRelation":
        body, _, dpart = text.partition("!")
        parts = body.split("|")
        if len(parts) != 3:
            raise GraphError(f"bad relation {text!r}")

        def mask(s: str) -> NodeSet:
            return to_mask(int(x) for x in s.split(",") if x.strip())

        return cls.make(mask(parts[0]), mask(parts[1]), mask(parts[2]), mask(dpart))


def pdag_d_separated(p: PDag, a: NodeSet, b: NodeSet, c: NodeSet) -> bool:
    """Moralised ancestral graph test on a pDAG; ``c`` must be visible."""
    pa = [p.parents(v) for v in range(p.total)]
    anc = a | b | c
    frontier = anc
    while frontier:
        nxt = 0
        for v in bits(frontier):
            nxt |= pa[v]
        frontier = nxt & ~anc
        anc |= nxt
    adj = [0] * p.total
    for v in bits(anc):
        ps = pa[v]
        for u in bits(ps):
            adj[u] |= (1 << v) | (ps & ~(1 << u))
            adj[v] |= 1 << u
    reach = a
    frontier = a
    while frontier:
        nxt = 0
        for v in bits(frontier):
            nxt |= adj[v]
        nxt &= ~c & ~reach
        if nxt & b:
            return False
        reach |= nxt
        frontier = nxt
    return not reach & b


def d_separated(g: MDag, a: NodeSet, b: NodeSet, c: NodeSet = 0) -> bool:
    SepRelation(a, b, c)  # validates disjointness
    return pdag_d_separated(canonical_pdag(g), a, b, c)


def e_separated(g: MDag, a: NodeSet, b: NodeSet, c: NodeSet = 0, d: NodeSet = 0) -> bool:
    SepRelation(a, b, c, d)
    if not d:
        return d_separated(g, a, b, c)
    keep = g.nodes & ~d
    sub = induced_subgraph(g, keep)
    pos = {v: i for i, v in enumerate(bits(keep))}

    def squash(m: NodeSet) -> NodeSet:
        return to_mask(pos[v] for v in bits(m))

    return d_separated(sub, squash(a), squash(b), squash(c))


@lru_cache(maxsize=None)
def _triples(n: int, with_deletion: bool) -> tuple[tuple[NodeSet, NodeSet, NodeSet, NodeSet], ...]:
    """All (A, B, C, D) with A < B as masks, pairwise disjoint, A and B nonempty."""
    roles = 5 if with_deletion else 4
    out = set()
    total = roles**n
    for code in range(total):
        sets = [0] * roles
        x = code
        for v in range(n):
            sets[x % roles] |= 1 << v
            x //= roles
        a, b, c = sets[1], sets[2], sets[3]
        d = sets[4] if with_deletion else 0
        if a and b:
            if b < a:
                a, b = b, a
            out.add((a, b, c, d))
    return tuple(sorted(out))


def iter_relations(n: int, with_deletion: bool = False) -> Iterator[SepRelation]:
    for a, b, c, d in _triples(n, with_deletion):
        yield SepRelation(a, b, c, d)


def all_dsep_relations(g: MDag) -> frozenset[SepRelation]:
    p = canonical_pdag(g)
    return frozenset(
        SepRelation(a, b, c) for a, b, c, _ in _triples(g.n, False) if pdag_d_separated(p, a, b, c)
    )


def all_esep_relations(g: MDag) -> frozenset[SepRelation]:
    out = set()
    pdags: dict[NodeSet, tuple[PDag, dict[int, int]]] = {}
    for a, b, c, d in _triples(g.n, True):
        if d not in pdags:
            keep = g.nodes & ~d
            pos = {v: i for i, v in enumerate(bits(keep))}
            pdags[d] = (canonical_pdag(induced_subgraph(g, keep)), pos)
        p, pos = pdags[d]

        def squash(m: NodeSet) -> NodeSet:
            return to_mask(pos[v] for v in bits(m))

        if pdag_d_separated(p, squash(a), squash(b), squash(c)):
            out.add(SepRelation(a, b, c, d))
    return frozenset(out)
