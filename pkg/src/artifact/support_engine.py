"""Possibilistic support realizability for pDAGs with finite-valued visible nodes.

Two deciders live here.

``bruteforce_realizable_supports`` walks every deterministic response function
of every visible node with all latent variables (including one private latent
per node that shares no facet) at a common cardinality ``k`` and collects the
image of the latent space.  It is exact but only usable on tiny instances.

``SupportOracle`` answers the same question with a SAT encoding.  Every node
is allowed a *set* of outcomes per parent context; this is the same as giving
it a private noise source, which costs nothing observationally because that
noise can be folded into any latent parent.  With a support of ``m`` events,
every latent of size two or more gets ``m`` values and value ``i`` of every
latent jointly reproduces event ``i`` (witness relabelling), so coverage of
the support is automatic and only "nothing outside the support" remains.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import os
import tempfile
from dataclasses import dataclass
from functools import lru_cache
from math import prod
from typing import Iterable, Iterator, Sequence

from pysat.solvers import Solver

from .graph_core import MDag, GraphError, NodeSet, PDag, bits, canonical_pdag, popcount
from .separation import SepRelation, all_dsep_relations

Event = tuple[int, ...]
Support = tuple[Event, ...]

SOLVER_NAME = "minisat22"


def make_support(events: Iterable[Sequence[int]]) -> Support:
    out = tuple(sorted({tuple(e) for e in events}))
    if not out:
        raise GraphError("a support needs at least one event")
    return out


def parse_support(text: str) -> Support:
    """Events as digit strings separated by whitespace or commas, e.g. ``"000 011"``."""
    events = []
    for tok in text.replace(",", " ").split():
        if not tok.isdigit():
            raise GraphError(f"bad event {tok!r}")
        events.append(tuple(int(ch) for ch in tok))
    return make_support(events)


def format_support(s: Support) -> str:
    return "\n".join("".join(map(str, e)) for e in s)


def all_events(cards: Sequence[int]) -> list[Event]:
    return list(itertools.product(*(range(c) for c in cards)))


def _check_support(cards: Sequence[int], s: Support) -> None:
    for e in s:
        if len(e) != len(cards) or any(not 0 <= x < c for x, c in zip(e, cards)):
            raise GraphError(f"event {e} inconsistent with cardinalities {tuple(cards)}")


def _as_pdag(g: MDag | PDag) -> PDag:
    if isinstance(g, MDag):
        return canonical_pdag(g)
    if not g.is_exogenous():
        raise GraphError("support search needs exogenous latents")
    return g


# ---------------------------------------------------------------------------
# functional models (witnesses and the brute-force oracle)


@dataclass
class ResponseAssignment:
    """Deterministic functional model over a pDAG.

    ``tables[v]`` maps a context ``(visible parent values..., latent values...)``
    to the outcome of visible node ``v``; parent orders are ``vis_parents[v]``
    and ``lat_parents[v]`` (latent indices into ``latent_cards``).
    """

    cards: tuple[int, ...]
    latent_cards: tuple[int, ...]
    vis_parents: tuple[tuple[int, ...], ...]
    lat_parents: tuple[tuple[int, ...], ...]
    tables: list[dict[tuple[int, ...], int]]

    def image(self) -> set[Event]:
        out = set()
        n = len(self.cards)
        for lam in itertools.product(*(range(k) for k in self.latent_cards)):
            e = [0] * n
            for v in range(n):
                ctx = tuple(e[u] for u in self.vis_parents[v]) + tuple(lam[l] for l in self.lat_parents[v])
                e[v] = self.tables[v][ctx]
            out.add(tuple(e))
        return out


def _topo_visible(p: PDag) -> list[int]:
    order: list[int] = []
    seen = 0
    vis = p.visible
    while len(order) < p.n_visible:
        for v in range(p.n_visible):
            if not seen >> v & 1 and p.parents(v) & vis & ~seen == 0:
                order.append(v)
                seen |= 1 << v
    return order


def bruteforce_realizable_supports(p: MDag | PDag, cards: Sequence[int], k: int) -> set[Support]:
    """Images of all deterministic models with every latent of cardinality ``k``.

    Visible nodes without any latent parent receive a private latent, which
    matches the implicit singleton facets of the mDAG picture.
    """
    p = _as_pdag(p)
    n = p.n_visible
    if len(cards) != n:
        raise GraphError("cardinality vector length differs from node count")
    lat_children = [p.children[u] & p.visible for u in p.latents]
    covered = 0
    for ch in lat_children:
        covered |= ch
    lat_children += [1 << v for v in range(n) if not covered >> v & 1]
    lat_children = [ch for ch in lat_children if ch]
    nl = len(lat_children)
    order = _topo_visible(p)
    vis_pa = [tuple(bits(p.parents(v) & p.visible)) for v in range(n)]
    lat_pa = [tuple(l for l in range(nl) if lat_children[l] >> v & 1) for v in range(n)]
    ctx_lists = []
    for v in range(n):
        ranges = [range(cards[u]) for u in vis_pa[v]] + [range(k)] * len(lat_pa[v])
        ctx_lists.append(list(itertools.product(*ranges)))
    valuations = list(itertools.product(range(k), repeat=nl))
    found: set[Support] = set()
    per_node = [itertools.product(range(cards[v]), repeat=len(ctx_lists[v])) for v in range(n)]
    for combo in itertools.product(*(list(x) for x in per_node)):
        tables = [dict(zip(ctx_lists[v], combo[v])) for v in range(n)]
        img = set()
        for lam in valuations:
            e = [0] * n
            for v in order:
                ctx = tuple(e[u] for u in vis_pa[v]) + tuple(lam[l] for l in lat_pa[v])
                e[v] = tables[v][ctx]
            img.add(tuple(e))
        found.add(tuple(sorted(img)))
    return found


# ---------------------------------------------------------------------------
# CI prefilter


def _projection_violates(s: Support, a: NodeSet, b: NodeSet, c: NodeSet) -> bool:
    groups: dict[tuple, set[tuple[tuple, tuple]]] = {}
    av, bv, cv = list(bits(a)), list(bits(b)), list(bits(c))
    for e in s:
        key = tuple(e[v] for v in cv)
        groups.setdefault(key, set()).add((tuple(e[v] for v in av), tuple(e[v] for v in bv)))
    for pairs in groups.values():
        xs = {x for x, _ in pairs}
        ys = {y for _, y in pairs}
        if len(pairs) != len(xs) * len(ys):
            return True
    return False


def ci_rules_out(g: MDag | Iterable[SepRelation], s: Support) -> bool:
    """True when a d-separation relation of ``g`` is possibilistically violated."""
    rels = all_dsep_relations(g) if isinstance(g, MDag) else g
    return any(_projection_violates(s, r.a, r.b, r.c) for r in rels)


def perfect_correlation_support(nodes: NodeSet, n: int) -> Support:
    """Two events: all zeros, and ones exactly on ``nodes``.

    The other variables are pinned to 0, so on a directed-edge-free mDAG this is
    realizable iff ``nodes`` lie in a common facet.  With directed edges a
    pinned intermediate node can block the correlation.
    """
    if not nodes:
        raise GraphError("empty node set")
    zero = tuple(0 for _ in range(n))
    one = tuple(1 if nodes >> v & 1 else 0 for v in range(n))
    return make_support([zero, one])


def dense_connection_support(v: int, w: int, n: int) -> Support:
    """X_v = X_w, every other binary variable free."""
    out = []
    for e in itertools.product((0, 1), repeat=n):
        if e[v] == e[w]:
            out.append(e)
    return make_support(out)


# ---------------------------------------------------------------------------
# SAT-based decider


@dataclass
class _Layout:
    n: int
    cards: tuple[int, ...]
    m: int
    vis_pa: tuple[tuple[int, ...], ...]
    lat_pa: tuple[tuple[int, ...], ...]
    n_latent: int
    base: tuple[int, ...]
    top: int

    def var(self, v: int, ctx_vis: Sequence[int], ctx_lat: Sequence[int], x: int) -> int:
        idx = 0
        for u, val in zip(self.vis_pa[v], ctx_vis):
            idx = idx * self.cards[u] + val
        for val in ctx_lat:
            idx = idx * self.m + val
        return self.base[v] + idx * self.cards[v] + x + 1


def _layout(p: PDag, cards: Sequence[int], m: int) -> _Layout:
    n = p.n_visible
    lat = [p.children[u] & p.visible for u in p.latents]
    lat = [ch for ch in lat if popcount(ch) >= 2]
    vis_pa = tuple(tuple(bits(p.parents(v) & p.visible)) for v in range(n))
    lat_pa = tuple(tuple(l for l in range(len(lat)) if lat[l] >> v & 1) for v in range(n))
    base = []
    top = 0
    for v in range(n):
        base.append(top)
        size = prod(cards[u] for u in vis_pa[v]) * m ** len(lat_pa[v]) * cards[v]
        top += size
    return _Layout(n, tuple(cards), m, vis_pa, lat_pa, len(lat), tuple(base), top)


class SupportOracle:
    """Incremental realizability decider for one pDAG at fixed cardinalities.

    One SAT instance is kept per support size ``m``; events outside a queried
    support are switched off through assumption literals, so learnt clauses
    carry over between queries of the same size.
    """

    def __init__(self, g: MDag | PDag, cards: Sequence[int], solver: str = SOLVER_NAME):
        self.pdag = _as_pdag(g)
        self.cards = tuple(cards)
        if len(self.cards) != self.pdag.n_visible:
            raise GraphError("cardinality vector length differs from node count")
        if any(c < 1 for c in self.cards):
            raise GraphError("cardinalities must be positive")
        self.events = all_events(self.cards)
        self.event_index = {e: i for i, e in enumerate(self.events)}
        self._solver_name = solver
        self._instances: dict[int, tuple[_Layout, Solver, list[int]]] = {}

    def close(self) -> None:
        for _, solver, _ in self._instances.values():
            solver.delete()
        self._instances.clear()

    def drop(self, m: int) -> None:
        """Free the instance for supports of ``m`` events."""
        if m in self._instances:
            self._instances.pop(m)[1].delete()

    def __enter__(self) -> "SupportOracle":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _instance(self, m: int) -> tuple[_Layout, Solver, list[int]]:
        if m in self._instances:
            return self._instances[m]
        lay = _layout(self.pdag, self.cards, m)
        solver = Solver(name=self._solver_name)
        n = lay.n
        for v in range(n):
            ranges = [range(self.cards[u]) for u in lay.vis_pa[v]] + [range(m)] * len(lay.lat_pa[v])
            nv = len(lay.vis_pa[v])
            for ctx in itertools.product(*ranges):
                solver.add_clause([lay.var(v, ctx[:nv], ctx[nv:], x) for x in range(self.cards[v])])
        selectors = [lay.top + 1 + i for i in range(len(self.events))]
        for lam in itertools.product(range(m), repeat=lay.n_latent):
            for ei, e in enumerate(self.events):
                clause = [selectors[ei]]
                for v in range(n):
                    clause.append(
                        -lay.var(v, [e[u] for u in lay.vis_pa[v]], [lam[l] for l in lay.lat_pa[v]], e[v])
                    )
                solver.add_clause(clause)
        self._instances[m] = (lay, solver, selectors)
        return self._instances[m]

    def _assumptions(self, s: Support) -> tuple[_Layout, Solver, list[int]]:
        lay, solver, selectors = self._instance(len(s))
        inside = {self.event_index[e] for e in s}
        assume = [-selectors[i] for i in range(len(self.events)) if i not in inside]
        for i, e in enumerate(s):
            for v in range(lay.n):
                assume.append(lay.var(v, [e[u] for u in lay.vis_pa[v]], [i] * len(lay.lat_pa[v]), e[v]))
        return lay, solver, assume

    def realizable(self, s: Support) -> bool:
        _check_support(self.cards, s)
        if len(s) == 1:
            return True
        _, solver, assume = self._assumptions(s)
        return bool(solver.solve(assumptions=assume))

    def witness(self, s: Support) -> ResponseAssignment | None:
        """A deterministic model generating exactly ``s``, or ``None``."""
        _check_support(self.cards, s)
        if len(s) == 1:
            lay = _layout(self.pdag, self.cards, 1)
            model = None
        else:
            lay, solver, assume = self._assumptions(s)
            if not solver.solve(assumptions=assume):
                return None
            model = set(x for x in solver.get_model() if x > 0)
        n = lay.n
        latent_cards = [lay.m] * lay.n_latent
        lat_pa = [list(lay.lat_pa[v]) for v in range(n)]
        # one private latent per node selects among its allowed outcomes
        for v in range(n):
            lat_pa[v].append(len(latent_cards))
            latent_cards.append(self.cards[v])
        tables: list[dict[tuple[int, ...], int]] = []
        for v in range(n):
            table = {}
            ranges = [range(self.cards[u]) for u in lay.vis_pa[v]] + [range(lay.m)] * len(lay.lat_pa[v])
            nv = len(lay.vis_pa[v])
            for ctx in itertools.product(*ranges):
                if model is None:
                    allowed = [s[0][v]]
                else:
                    allowed = [x for x in range(self.cards[v]) if lay.var(v, ctx[:nv], ctx[nv:], x) in model]
                for j in range(self.cards[v]):
                    table[ctx + (j,)] = allowed[j % len(allowed)]
            tables.append(table)
        return ResponseAssignment(
            self.cards, tuple(latent_cards), lay.vis_pa, tuple(tuple(x) for x in lat_pa), tables
        )


def support_realizable(g: MDag | PDag, cards: Sequence[int], s: Support) -> bool:
    with SupportOracle(g, cards) as oracle:
        return oracle.realizable(make_support(s))


def support_witness(g: MDag | PDag, cards: Sequence[int], s: Support) -> ResponseAssignment | None:
    with SupportOracle(g, cards) as oracle:
        return oracle.witness(make_support(s))


def candidate_supports(cards: Sequence[int], size: int) -> Iterator[Support]:
    """All supports with exactly ``size`` events, lexicographic."""
    for combo in itertools.combinations(all_events(cards), size):
        yield combo


def enumerate_realizable_supports(g: MDag | PDag, cards: Sequence[int], max_events: int) -> set[Support]:
    total = prod(cards)
    if max_events > total:
        raise GraphError("max_events exceeds the number of events")
    rels = all_dsep_relations(g if isinstance(g, MDag) else _pdag_to_mdag(g))
    out: set[Support] = set()
    with SupportOracle(g, cards) as oracle:
        for size in range(1, max_events + 1):
            for s in candidate_supports(cards, size):
                if size > 1 and ci_rules_out(rels, s):
                    continue
                if oracle.realizable(s):
                    out.add(s)
    return out


def _pdag_to_mdag(p: PDag) -> MDag:
    from .graph_core import lnodes_to_faces

    return lnodes_to_faces(p)


# ---------------------------------------------------------------------------
# value relabelling orbits


@lru_cache(maxsize=None)
def _value_relabellings(cards: tuple[int, ...]) -> tuple[tuple[tuple[int, ...], ...], ...]:
    return tuple(itertools.product(*(tuple(itertools.permutations(range(c))) for c in cards)))


def canonical_support(s: Support, cards: Sequence[int]) -> Support:
    """Smallest support reachable from ``s`` by relabelling outcomes per node.

    Realizability is invariant under such relabellings, so one representative
    per orbit is enough when comparing support sets.
    """
    best = None
    for perm in _value_relabellings(tuple(cards)):
        t = tuple(sorted(tuple(perm[v][x] for v, x in enumerate(e)) for e in s))
        if best is None or t < best:
            best = t
    return best


@lru_cache(maxsize=None)
def orbit_representatives(cards: tuple[int, ...], size: int) -> tuple[Support, ...]:
    """Canonical supports with ``size`` events, ascending."""
    return tuple(sorted({canonical_support(s, cards) for s in candidate_supports(cards, size)}))


# ---------------------------------------------------------------------------
# comparison of realizable supports


@dataclass(frozen=True)
class NondominanceEvidence:
    """Supports realizable by one graph and not by the other.

    ``not_g_over_h`` is realizable by ``h`` but not by ``g`` (so ``g`` does not
    dominate ``h``); ``not_h_over_g`` is the mirror image.
    """

    not_g_over_h: Support | None = None
    not_h_over_g: Support | None = None

    @property
    def empty(self) -> bool:
        return self.not_g_over_h is None and self.not_h_over_g is None


def compare_support_profiles(
    g: MDag, h: MDag, cards: Sequence[int], max_events: int
) -> NondominanceEvidence:
    """Search supports of 2..max_events events in lexicographic order."""
    if g.n != h.n or len(cards) != g.n:
        raise GraphError("graphs and cardinalities must agree on the node count")
    rels_g, rels_h = all_dsep_relations(g), all_dsep_relations(h)
    found: list[Support | None] = [None, None]
    with SupportOracle(g, cards) as og, SupportOracle(h, cards) as oh:
        for size in range(2, max_events + 1):
            for s in candidate_supports(cards, size):
                out_g, out_h = ci_rules_out(rels_g, s), ci_rules_out(rels_h, s)
                if out_g and out_h:
                    continue
                rg = not out_g and og.realizable(s)
                rh = not out_h and oh.realizable(s)
                if rh and not rg and found[0] is None:
                    found[0] = s
                if rg and not rh and found[1] is None:
                    found[1] = s
                if found[0] is not None and found[1] is not None:
                    return NondominanceEvidence(*found)
    return NondominanceEvidence(*found)


# ---------------------------------------------------------------------------
# on-disk cache


class SupportCache:
    """Realizability answers per (mDAG, cardinalities), one JSON file each.

    Files are named by a hash of the key and replaced atomically, so several
    runs may share a directory.
    """

    def __init__(self, directory: str | os.PathLike):
        self.directory = os.fspath(directory)
        os.makedirs(self.directory, exist_ok=True)

    def _path(self, g: MDag, cards: Sequence[int]) -> str:
        key = json.dumps([g.n, list(g.children), list(g.facets), list(cards)])
        return os.path.join(self.directory, hashlib.sha256(key.encode()).hexdigest()[:32] + ".json")

    def load(self, g: MDag, cards: Sequence[int]) -> dict[Support, bool]:
        try:
            with open(self._path(g, cards)) as fh:
                raw = json.load(fh)
        except FileNotFoundError:
            return {}
        return {tuple(tuple(int(c) for c in e) for e in k.split(",")): v for k, v in raw.items()}

    def store(self, g: MDag, cards: Sequence[int], answers: dict[Support, bool]) -> None:
        if not answers:
            return
        raw = {",".join("".join(map(str, e)) for e in s): bool(v) for s, v in sorted(answers.items())}
        fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
        with os.fdopen(fd, "w") as fh:
            json.dump(raw, fh)
        os.replace(tmp, self._path(g, cards))
