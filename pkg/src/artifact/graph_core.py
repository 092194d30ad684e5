"""Bitmask representations of pDAGs and mDAGs, RE-reduction and basic queries.

Node sets are plain ``int`` bitmasks: bit ``i`` set means node ``i`` is a member.
An mDAG stores, per visible node, the bitmask of its children together with the
facets of its simplicial complex.  Only facets with at least two members are
stored; a node covered by no stored facet carries an implicit singleton facet.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Iterator, Sequence

MAX_NODES = 16

NodeSet = int


class GraphError(ValueError):
    """Raised for malformed graphs or invalid arguments."""


def bits(mask: NodeSet) -> Iterator[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def to_mask(nodes: Iterable[int]) -> NodeSet:
    m = 0
    for v in nodes:
        m |= 1 << v
    return m


def popcount(mask: NodeSet) -> int:
    return bin(mask).count("1")


def is_subset(a: NodeSet, b: NodeSet) -> bool:
    return a & ~b == 0


def antichain(sets: Iterable[NodeSet]) -> tuple[NodeSet, ...]:
    """Inclusion-maximal members of ``sets`` (duplicates collapsed), sorted."""
    uniq = sorted(set(sets), key=lambda s: (-popcount(s), s))
    kept: list[NodeSet] = []
    for s in uniq:
        if not any(is_subset(s, k) for k in kept):
            kept.append(s)
    return tuple(sorted(kept))


def _check_n(n: int) -> None:
    if not 1 <= n <= MAX_NODES:
        raise GraphError(f"node count {n} outside 1..{MAX_NODES}")


def _topological(children: Sequence[NodeSet]) -> list[int] | None:
    n = len(children)
    indeg = [0] * n
    for u in range(n):
        for v in bits(children[u]):
            indeg[v] += 1
    order = []
    ready = [v for v in range(n) if indeg[v] == 0]
    while ready:
        u = ready.pop()
        order.append(u)
        for v in bits(children[u]):
            indeg[v] -= 1
            if indeg[v] == 0:
                ready.append(v)
    return order if len(order) == n else None


@dataclass(frozen=True)
class MDag:
    """Directed structure over ``n`` visible nodes plus a simplicial complex.

    ``children[i]`` is the child bitmask of node ``i``; ``facets`` holds the
    facets of size two or more, sorted by bitmask value.
    """

    n: int
    children: tuple[NodeSet, ...]
    facets: tuple[NodeSet, ...] = ()

    def __post_init__(self) -> None:
        _check_n(self.n)
        if len(self.children) != self.n:
            raise GraphError("children table length differs from node count")
        full = (1 << self.n) - 1
        for i, ch in enumerate(self.children):
            if ch & ~full or ch >> i & 1:
                raise GraphError(f"bad child set for node {i}")
        for f in self.facets:
            if f & ~full or popcount(f) < 2:
                raise GraphError("stored facets must be subsets of size >= 2")
        if antichain(self.facets) != tuple(self.facets):
            raise GraphError("facets must be a sorted antichain")
        if _topological(self.children) is None:
            raise GraphError("directed structure has a cycle")

    @classmethod
    def build(cls, n: int, edges: Iterable[tuple[int, int]] = (), faces: Iterable[Iterable[int]] = ()) -> "MDag":
        """Construct from an edge list and any collection of faces."""
        _check_n(n)
        children = [0] * n
        for u, v in edges:
            if not (0 <= u < n and 0 <= v < n) or u == v:
                raise GraphError(f"bad edge {u}->{v}")
            children[u] |= 1 << v
        masks = [to_mask(f) if not isinstance(f, int) else f for f in faces]
        facets = antichain(m for m in masks if popcount(m) >= 2)
        return cls(n, tuple(children), facets)

    # structure -----------------------------------------------------------
    @property
    def nodes(self) -> NodeSet:
        return (1 << self.n) - 1

    @property
    def encoding(self) -> tuple[tuple[NodeSet, ...], tuple[NodeSet, ...]]:
        return (self.children, self.facets)

    @property
    def edges(self) -> tuple[tuple[int, int], ...]:
        return tuple((u, v) for u in range(self.n) for v in bits(self.children[u]))

    @property
    def edge_mask(self) -> int:
        """All edges packed into one integer, bit ``u*n+v`` for ``u->v``."""
        out = 0
        for u, ch in enumerate(self.children):
            out |= ch << (u * self.n)
        return out

    @property
    def parents_table(self) -> tuple[NodeSet, ...]:
        pa = [0] * self.n
        for u in range(self.n):
            for v in bits(self.children[u]):
                pa[v] |= 1 << u
        return tuple(pa)

    @property
    def all_facets(self) -> tuple[NodeSet, ...]:
        """Facets including implicit singletons, sorted by bitmask."""
        covered = 0
        for f in self.facets:
            covered |= f
        singles = [1 << v for v in range(self.n) if not covered >> v & 1]
        return tuple(sorted(self.facets + tuple(singles)))

    def is_face(self, s: NodeSet) -> bool:
        if s == 0:
            return True
        if popcount(s) == 1 and is_subset(s, self.nodes):
            return True
        return any(is_subset(s, f) for f in self.facets)

    # text / json ---------------------------------------------------------
    def to_text(self) -> str:
        edges = ",".join(f"{u}->{v}" for u, v in self.edges)
        facets = ";".join("{" + ",".join(map(str, bits(f))) + "}" for f in self.facets)
        return f"nodes {self.n}\nedges {edges}\nfacets {facets}\n"

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "edges": [list(e) for e in self.edges],
            "facets": [list(bits(f)) for f in self.facets],
        }

    def __str__(self) -> str:
        names = node_names(self.n)
        e = " ".join(f"{names[u]}->{names[v]}" for u, v in self.edges)
        f = " ".join("{" + "".join(names[v] for v in bits(s)) + "}" for s in self.facets)
        return f"MDag[{e or '-'} | {f or '-'}]"


def node_names(n: int) -> str:
    return "abcdefghijklmnop"[:n]


def parse_text(text: str) -> MDag:
    """Parse the three-line ``nodes/edges/facets`` text format."""
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    fields: dict[str, str] = {}
    for ln in lines:
        key, _, rest = ln.partition(" ")
        fields[key] = rest.strip()
    if "nodes" not in fields:
        raise GraphError("missing 'nodes' line")
    try:
        n = int(fields["nodes"])
    except ValueError as exc:
        raise GraphError("node count must be an integer") from exc
    edges = []
    for item in filter(None, fields.get("edges", "").split(",")):
        a, sep, b = item.partition("->")
        if not sep:
            raise GraphError(f"bad edge token {item!r}")
        u, v = int(a), int(b)
        if u >= v:
            raise GraphError(f"edge {u}->{v} violates the nodal ordering")
        edges.append((u, v))
    faces = []
    for item in filter(None, fields.get("facets", "").split(";")):
        item = item.strip()
        if not (item.startswith("{") and item.endswith("}")):
            raise GraphError(f"bad facet token {item!r}")
        members = [int(x) for x in item[1:-1].split(",") if x.strip()]
        if len(members) < 2 or any(not 0 <= m < n for m in members):
            raise GraphError(f"bad facet {item!r}")
        faces.append(members)
    return MDag.build(n, edges, faces)


def parse_json(data: dict | str) -> MDag:
    if isinstance(data, str):
        data = json.loads(data)
    try:
        n = int(data["n"])
        edges = [tuple(e) for e in data.get("edges", [])]
        faces = [list(f) for f in data.get("facets", [])]
    except (KeyError, TypeError) as exc:
        raise GraphError("malformed mDAG json") from exc
    for u, v in edges:
        if u >= v:
            raise GraphError(f"edge {u}->{v} violates the nodal ordering")
    return MDag.build(n, edges, faces)


def load_mdag(path: str) -> MDag:
    with open(path) as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        return parse_json(text)
    return parse_text(text)


# ---------------------------------------------------------------------------
# pDAGs


@dataclass(frozen=True)
class PDag:
    """DAG over ``n_visible`` visible nodes followed by ``n_latent`` latents."""

    n_visible: int
    n_latent: int
    children: tuple[NodeSet, ...]

    def __post_init__(self) -> None:
        total = self.n_visible + self.n_latent
        if len(self.children) != total:
            raise GraphError("children table length differs from node count")
        full = (1 << total) - 1
        vis = (1 << self.n_visible) - 1
        for i, ch in enumerate(self.children):
            if ch & ~full or ch >> i & 1:
                raise GraphError(f"bad child set for node {i}")
            if i < self.n_visible and ch & vis & ((1 << (i + 1)) - 1):
                raise GraphError("visible edges must follow the nodal ordering")
        if _topological(self.children) is None:
            raise GraphError("pDAG has a cycle")

    @classmethod
    def build(cls, n_visible: int, n_latent: int, edges: Iterable[tuple[int, int]]) -> "PDag":
        children = [0] * (n_visible + n_latent)
        for u, v in edges:
            children[u] |= 1 << v
        return cls(n_visible, n_latent, tuple(children))

    @property
    def total(self) -> int:
        return self.n_visible + self.n_latent

    @property
    def visible(self) -> NodeSet:
        return (1 << self.n_visible) - 1

    @property
    def latents(self) -> range:
        return range(self.n_visible, self.total)

    def parents(self, v: int) -> NodeSet:
        return to_mask(u for u in range(self.total) if self.children[u] >> v & 1)

    def is_exogenous(self) -> bool:
        return all(self.parents(u) == 0 for u in self.latents)


def exogenize(p: PDag) -> PDag:
    ch = list(p.children)

    def pa(v: int) -> NodeSet:
        return to_mask(u for u in range(p.total) if ch[u] >> v & 1)

    while True:
        endo = [u for u in p.latents if pa(u)]
        if not endo:
            break
        u = endo[0]
        for w in bits(pa(u)):
            ch[w] = (ch[w] & ~(1 << u)) | ch[u]
    return PDag(p.n_visible, p.n_latent, tuple(ch))


def remove_redundant(p: PDag) -> PDag:
    if not p.is_exogenous():
        raise GraphError("remove_redundant needs exogenous latents")
    lat = list(p.latents)
    drop = set()
    for u in lat:
        cu = p.children[u]
        for v in lat:
            if v == u:
                continue
            cv = p.children[v]
            if is_subset(cu, cv) and (cu != cv or v < u):
                drop.add(u)
                break
    keep = [u for u in lat if u not in drop]
    children = list(p.children[: p.n_visible])
    for u in keep:
        children.append(p.children[u])
    # visible nodes never point at latents once these are exogenous
    return PDag(p.n_visible, len(keep), tuple(children))


def re_reduce(p: PDag) -> PDag:
    return remove_redundant(exogenize(p))


def lnodes_to_faces(p: PDag) -> MDag:
    r = re_reduce(p)
    vis = r.visible
    children = tuple(r.children[v] & vis for v in range(r.n_visible))
    faces = [r.children[u] for u in r.latents]
    return MDag.build(r.n_visible, ((u, v) for u in range(r.n_visible) for v in bits(children[u])), faces)


def canonical_pdag(g: MDag, singleton_latents: bool = False) -> PDag:
    """One exogenous latent per stored facet (optionally per singleton too)."""
    facets = g.all_facets if singleton_latents else g.facets
    return PDag(g.n, len(facets), tuple(g.children) + tuple(facets))


def induced_subgraph(g: MDag, s: NodeSet) -> MDag:
    if s == 0:
        raise GraphError("empty node set")
    if not is_subset(s, g.nodes):
        raise GraphError("node set exceeds graph")
    keep = list(bits(s))
    pos = {v: i for i, v in enumerate(keep)}

    def squash(m: NodeSet) -> NodeSet:
        return to_mask(pos[v] for v in bits(m & s))

    children = tuple(squash(g.children[v]) for v in keep)
    faces = [squash(f) for f in g.facets]
    return MDag(len(keep), children, antichain(f for f in faces if popcount(f) >= 2))


# ---------------------------------------------------------------------------
# permutations and queries


def apply_permutation(g: MDag, pi: Sequence[int]) -> MDag:
    """Relabel node ``v`` as ``pi[v]``."""
    if sorted(pi) != list(range(g.n)):
        raise GraphError("not a permutation")

    def move(m: NodeSet) -> NodeSet:
        return to_mask(pi[v] for v in bits(m))

    children = [0] * g.n
    for u in range(g.n):
        children[pi[u]] = move(g.children[u])
    return MDag(g.n, tuple(children), antichain(move(f) for f in g.facets))


def invert_permutation(pi: Sequence[int]) -> tuple[int, ...]:
    inv = [0] * len(pi)
    for i, p in enumerate(pi):
        inv[p] = i
    return tuple(inv)


def compose_permutations(p: Sequence[int], q: Sequence[int]) -> tuple[int, ...]:
    """``p`` after ``q``."""
    return tuple(p[q[i]] for i in range(len(q)))


def parents(g: MDag, v: int) -> NodeSet:
    return g.parents_table[v]


def children(g: MDag, v: int) -> NodeSet:
    return g.children[v]


def ancestors(g: MDag, s: NodeSet) -> NodeSet:
    """Ancestors of ``s`` within ``g``, including ``s`` itself."""
    pa = g.parents_table
    out = s
    frontier = s
    while frontier:
        nxt = 0
        for v in bits(frontier):
            nxt |= pa[v]
        frontier = nxt & ~out
        out |= nxt
    return out


def descendants(g: MDag, s: NodeSet) -> NodeSet:
    out = s
    frontier = s
    while frontier:
        nxt = 0
        for v in bits(frontier):
            nxt |= g.children[v]
        frontier = nxt & ~out
        out |= nxt
    return out


def topological_order(g: MDag) -> list[int]:
    """Nodes listed so that every edge points forward."""
    order = _topological(g.children)
    assert order is not None
    return order


def is_ordered(g: MDag) -> bool:
    return all(g.children[u] & ((1 << (u + 1)) - 1) == 0 for u in range(g.n))


def is_confounder_free(g: MDag) -> bool:
    return not g.facets


def is_directed_edge_free(g: MDag) -> bool:
    return not any(g.children)


def skeleton(g: MDag) -> tuple[NodeSet, ...]:
    """Adjacency bitmasks of the undirected skeleton."""
    adj = [0] * g.n
    for u, v in g.edges:
        adj[u] |= 1 << v
        adj[v] |= 1 << u
    for f in g.facets:
        for v in bits(f):
            adj[v] |= f & ~(1 << v)
    return tuple(adj)


def skeleton_edges(g: MDag) -> frozenset[tuple[int, int]]:
    adj = skeleton(g)
    return frozenset((u, v) for u in range(g.n) for v in bits(adj[u]) if u < v)


# ---------------------------------------------------------------------------
# enumeration helpers


def all_complexes(n: int) -> list[tuple[NodeSet, ...]]:
    """Every antichain of subsets of size >= 2, as sorted facet tuples."""
    cands = [m for m in range(1, 1 << n) if popcount(m) >= 2]
    out: list[tuple[NodeSet, ...]] = []

    def grow(i: int, chosen: list[NodeSet]) -> None:
        if i == len(cands):
            out.append(tuple(sorted(chosen)))
            return
        grow(i + 1, chosen)
        c = cands[i]
        if not any(is_subset(c, x) or is_subset(x, c) for x in chosen):
            chosen.append(c)
            grow(i + 1, chosen)
            chosen.pop()

    grow(0, [])
    out.sort(key=lambda fs: (len(fs), fs))
    return out


def all_directed(n: int) -> list[tuple[NodeSet, ...]]:
    pairs = list(combinations(range(n), 2))
    out = []
    for m in range(1 << len(pairs)):
        ch = [0] * n
        for k, (u, v) in enumerate(pairs):
            if m >> k & 1:
                ch[u] |= 1 << v
        out.append(tuple(ch))
    return out


def all_acyclic_directed(n: int) -> list[tuple[NodeSet, ...]]:
    """Every acyclic directed structure on ``n`` labelled nodes."""
    pairs = [(u, v) for u in range(n) for v in range(n) if u < v]
    out = []
    # each unordered pair is absent, forward or backward
    for code in range(3 ** len(pairs)):
        ch = [0] * n
        for u, v in pairs:
            code, r = divmod(code, 3)
            if r == 1:
                ch[u] |= 1 << v
            elif r == 2:
                ch[v] |= 1 << u
        if _topological(ch) is not None:
            out.append(tuple(ch))
    return out
