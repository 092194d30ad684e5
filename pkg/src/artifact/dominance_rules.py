"""Dominance-proving rules and the proven-equivalence partition."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Iterator, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .graph_core import MDag, GraphError, NodeSet, antichain, bits, is_subset, popcount

RULE_NAMES = ("sd", "hlp", "weakfm", "moderatefm", "strongfm", "evans")


@dataclass(frozen=True)
class RuleTier:
    rules: frozenset[str] = frozenset()

    @classmethod
    def parse(cls, text: str) -> "RuleTier":
        items = {t.strip().lower() for t in text.split(",") if t.strip()}
        if "none" in items:
            items.discard("none")
        bad = items - set(RULE_NAMES)
        if bad:
            raise GraphError(f"unknown rules: {sorted(bad)}")
        return cls(frozenset(items))

    def __contains__(self, name: str) -> bool:
        return name in self.rules

    def __str__(self) -> str:
        return ",".join(r for r in RULE_NAMES if r in self.rules) or "none"


FULL_TIER = RuleTier(frozenset({"sd", "hlp", "weakfm", "moderatefm", "strongfm"}))


@dataclass(frozen=True)
class RuleApplication:
    rule: str
    source: MDag
    target: MDag
    params: tuple = ()


def face_mask(g: MDag) -> int:
    """Bitmask over subsets: bit ``s`` set iff ``s`` is a nonempty face of ``g``."""
    out = 0
    for f in g.all_facets:
        sub = f
        while sub:
            out |= 1 << sub
            sub = (sub - 1) & f
    return out


def structurally_dominates(g: MDag, h: MDag) -> bool:
    if g.n != h.n:
        raise GraphError("node-count mismatch")
    if h.edge_mask & ~g.edge_mask:
        return False
    return all(g.is_face(f) for f in h.facets)


def _pa_set(pa: Sequence[NodeSet], s: NodeSet) -> NodeSet:
    out = 0
    for v in bits(s):
        out |= pa[v]
    return out


def _with_edge(g: MDag, x: int, y: int) -> MDag:
    ch = list(g.children)
    ch[x] |= 1 << y
    return MDag(g.n, tuple(ch), g.facets)


def _with_faces(g: MDag, new: Iterable[NodeSet]) -> MDag:
    return MDag(g.n, g.children, antichain([f for f in g.facets] + [f for f in new if popcount(f) >= 2]))


# HLP -----------------------------------------------------------------------


def hlp_applicable(g: MDag, x: int, y: int, respect_order: bool = True) -> bool:
    """HLP test for adding ``x -> y``.

    With ``respect_order=False`` the edge may point against the nodal ordering;
    the conditions make ``y`` a non-ancestor of ``x``, so no cycle can arise.
    """
    if x == y or g.children[x] >> y & 1:
        raise GraphError(f"edge {x}->{y} already present or a loop")
    if respect_order and x > y:
        raise GraphError("HLP edge must follow the nodal ordering")
    if g.children[y] >> x & 1:
        return False
    pa = g.parents_table
    if not is_subset(pa[x], pa[y]):
        return False
    return all(f >> y & 1 for f in g.all_facets if f >> x & 1)


def hlp_apply(g: MDag, x: int, y: int, respect_order: bool = True) -> MDag:
    if not hlp_applicable(g, x, y, respect_order):
        raise GraphError("HLP conditions fail")
    return _with_edge(g, x, y)


def hlp_moves(g: MDag, respect_order: bool = True) -> Iterator[tuple[int, int]]:
    for x in range(g.n):
        for y in range(x + 1 if respect_order else 0, g.n):
            if x != y and not g.children[x] >> y & 1 and hlp_applicable(g, x, y, respect_order):
                yield (x, y)


# facet merging ----------------------------------------------------------------


def _parent_condition(g: MDag, c_union: Iterable[NodeSet], d: NodeSet) -> bool:
    pa = g.parents_table
    for c in c_union:
        need = _pa_set(pa, c) | c
        for v in bits(d):
            if not is_subset(need, pa[v]):
                return False
    return True


def _check_facets(g: MDag, cs: Sequence[NodeSet], d: NodeSet, d_facet: bool) -> None:
    facets = g.all_facets
    for c in cs:
        if c not in facets:
            raise GraphError("C must be a facet")
        if c & d:
            raise GraphError("C and D overlap")
    if d == 0:
        raise GraphError("D must be nonempty")
    if d_facet and d not in facets:
        raise GraphError("D must be a facet")
    if not g.is_face(d):
        raise GraphError("D must be a face")


def weak_fm_applicable(g: MDag, c: NodeSet, d: NodeSet) -> bool:
    _check_facets(g, [c], d, d_facet=False)
    if not _parent_condition(g, [c], d):
        return False
    return all(f == c or not f & c for f in g.all_facets)


def _moderate_ok(g: MDag, cs: Sequence[NodeSet], d: NodeSet) -> bool:
    cu = 0
    for c in cs:
        cu |= c
    if not _parent_condition(g, cs, d):
        return False
    # checking facets suffices: a face outside the union lies in such a facet
    for f in g.all_facets:
        if f & cu and not is_subset(f, cu) and not is_subset(d, f):
            return False
    return True


def moderate_fm_applicable(g: MDag, c: NodeSet, d: NodeSet) -> bool:
    _check_facets(g, [c], d, d_facet=False)
    return _moderate_ok(g, [c], d)


def strong_fm_applicable(g: MDag, cs: Sequence[NodeSet], d: NodeSet) -> bool:
    if not cs:
        raise GraphError("need at least one C")
    _check_facets(g, cs, d, d_facet=False)
    return _moderate_ok(g, cs, d)


def weak_fm_apply(g: MDag, c: NodeSet, d: NodeSet) -> MDag:
    if not weak_fm_applicable(g, c, d):
        raise GraphError("Weak FM conditions fail")
    return _with_faces(g, [c | d])


def moderate_fm_apply(g: MDag, c: NodeSet, d: NodeSet) -> MDag:
    if not moderate_fm_applicable(g, c, d):
        raise GraphError("Moderate FM conditions fail")
    return _with_faces(g, [c | d])


def strong_fm_apply(g: MDag, cs: Sequence[NodeSet], d: NodeSet) -> MDag:
    if not strong_fm_applicable(g, cs, d):
        raise GraphError("Strong FM conditions fail")
    return _with_faces(g, [c | d for c in cs])


def evans_apply(g: MDag, c: NodeSet, d: NodeSet) -> MDag:
    merged = weak_fm_apply(g, c, d)
    ch = list(merged.children)
    for u in bits(c):
        ch[u] &= ~d
    return MDag(g.n, tuple(ch), merged.facets)


def _faces(g: MDag) -> list[NodeSet]:
    out = set()
    for f in g.all_facets:
        sub = f
        while sub:
            out.add(sub)
            sub = (sub - 1) & f
    return sorted(out)


def weak_fm_moves(g: MDag) -> Iterator[tuple[NodeSet, NodeSet]]:
    for c in g.all_facets:
        for d in _faces(g):
            if not c & d and weak_fm_applicable(g, c, d):
                yield (c, d)


def moderate_fm_moves(g: MDag) -> Iterator[tuple[NodeSet, NodeSet]]:
    for c in g.all_facets:
        for d in _faces(g):
            if not c & d and moderate_fm_applicable(g, c, d):
                yield (c, d)


def strong_fm_moves(g: MDag) -> Iterator[tuple[tuple[NodeSet, ...], NodeSet]]:
    facets = g.all_facets
    for d in _faces(g):
        eligible = [c for c in facets if not c & d and _parent_condition(g, [c], d)]
        for r in range(1, len(eligible) + 1):
            for cs in combinations(eligible, r):
                if _moderate_ok(g, cs, d):
                    yield (cs, d)


def rule_applications(g: MDag, tier: RuleTier, respect_order: bool = True) -> Iterator[RuleApplication]:
    """Every equivalence-producing rule application on ``g`` enabled by ``tier``."""
    if "hlp" in tier:
        for x, y in hlp_moves(g, respect_order):
            yield RuleApplication("HLP", g, _with_edge(g, x, y), (x, y))
    if "weakfm" in tier:
        for c, d in weak_fm_moves(g):
            yield RuleApplication("WeakFM", g, _with_faces(g, [c | d]), (c, d))
    if "moderatefm" in tier:
        for c, d in moderate_fm_moves(g):
            yield RuleApplication("ModerateFM", g, _with_faces(g, [c | d]), (c, d))
    if "strongfm" in tier:
        for cs, d in strong_fm_moves(g):
            yield RuleApplication("StrongFM", g, _with_faces(g, [c | d for c in cs]), (cs, d))
    if "evans" in tier:
        for c, d in weak_fm_moves(g):
            yield RuleApplication("Evans", g, evans_apply(g, c, d), (c, d))


# saturation ---------------------------------------------------------------------


def sd_covers(g: MDag) -> Iterator[MDag]:
    """mDAGs covered by ``g`` in the structural-dominance order."""
    for u, v in g.edges:
        ch = list(g.children)
        ch[u] &= ~(1 << v)
        yield MDag(g.n, tuple(ch), g.facets)
    for f in g.facets:
        rest = [x for x in g.facets if x != f]
        subs = [f & ~(1 << v) for v in bits(f)]
        yield MDag(g.n, g.children, antichain(rest + [s for s in subs if popcount(s) >= 2]))


@dataclass
class EquivalenceResult:
    labels: np.ndarray
    n_blocks: int
    applications: list[RuleApplication] = field(default_factory=list)
    dominance_edges: set[tuple[int, int]] = field(default_factory=set)

    def blocks(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.n_blocks)]
        for i, b in enumerate(self.labels):
            out[b].append(i)
        return out


def saturate_equivalences(
    universe: Sequence[MDag],
    tier: RuleTier,
    index: dict | None = None,
    shuffle_seed: int | None = None,
    keep_applications: bool = False,
    respect_order: bool = True,
) -> EquivalenceResult:
    """Proven-equivalence partition of ``universe`` under ``tier``.

    Rule applications contribute two-way edges, structural dominance contributes
    covering edges, and blocks are the strongly connected components.  Block
    labels are renumbered by first member so the result is order independent.
    """
    if index is None:
        index = {g.encoding: i for i, g in enumerate(universe)}
    order = list(range(len(universe)))
    if shuffle_seed is not None:
        random.Random(shuffle_seed).shuffle(order)
    src: list[int] = []
    dst: list[int] = []
    apps: list[RuleApplication] = []
    for i in order:
        g = universe[i]
        for app in rule_applications(g, tier, respect_order):
            j = index.get(app.target.encoding)
            if j is None:
                raise GraphError(f"rule output outside universe: {app.target}")
            src += [i, j]
            dst += [j, i]
            if keep_applications:
                apps.append(app)
        if "sd" in tier:
            for h in sd_covers(g):
                src.append(i)
                dst.append(index[h.encoding])
    n = len(universe)
    mat = coo_matrix((np.ones(len(src), dtype=np.int8), (src, dst)), shape=(n, n)).tocsr()
    _, raw = connected_components(mat, directed=True, connection="strong")
    relabel: dict[int, int] = {}
    labels = np.empty(n, dtype=np.int64)
    for i in range(n):
        labels[i] = relabel.setdefault(int(raw[i]), len(relabel))
    edges = set()
    if "sd" in tier:
        for i, j in zip(src, dst):
            a, b = labels[i], labels[j]
            if a != b:
                edges.add((int(a), int(b)))
    return EquivalenceResult(labels, len(relabel), apps, edges)
