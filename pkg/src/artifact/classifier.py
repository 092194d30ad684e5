"""Universe enumeration, nondominance passes and the proven-inequivalence partition.

The proven-equivalence partition is computed once per dominance tier.  Every
nondominance rule then contributes a directed boolean matrix over equivalence
blocks: ``nd[i, j]`` means block ``i`` is proven not to dominate block ``j``.
Two blocks are proven inequivalent when either direction is set, and the
proven-inequivalence partition is given by the connected components of the
remaining "not yet separated" graph.
"""

from __future__ import annotations

import itertools
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import networkx as nx
import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from . import support_engine as se
from .connectivity import densely_connected_pairs
from .dominance_rules import FULL_TIER, RuleTier, saturate_equivalences, structurally_dominates
from .graph_core import (
    MAX_NODES,
    GraphError,
    MDag,
    all_acyclic_directed,
    all_complexes,
    all_directed,
    apply_permutation,
    bits,
    invert_permutation,
    is_confounder_free,
    is_directed_edge_free,
    is_ordered,
    node_names,
    skeleton_edges,
    to_mask,
    topological_order,
)
from .separation import SepRelation, all_dsep_relations, all_esep_relations

log = logging.getLogger(__name__)

GRAPHICAL_RULES = ("skel", "dsep", "esep", "dc", "def")
NONDOMINANCE_RULES = GRAPHICAL_RULES + ("supports",)


class ClassificationError(RuntimeError):
    """Internal inconsistency: an unsound rule or a bug."""


class ContradictionError(ClassificationError):
    """A pair is proven both to dominate and not to dominate."""

    def __init__(self, message: str, pairs: list[tuple[str, MDag, MDag]]):
        super().__init__(message)
        self.pairs = pairs


# ---------------------------------------------------------------------------
# universes


@dataclass(frozen=True)
class Universe:
    n: int
    mdags: tuple[MDag, ...]
    index: dict = field(compare=False, repr=False)

    def __len__(self) -> int:
        return len(self.mdags)

    def __getitem__(self, i: int) -> MDag:
        return self.mdags[i]

    def position(self, g: MDag) -> int:
        try:
            return self.index[g.encoding]
        except KeyError:
            raise GraphError(f"{g} is not in the universe") from None


def _universe(n: int, directed: Sequence[tuple[int, ...]]) -> Universe:
    if not 2 <= n <= MAX_NODES:
        raise GraphError(f"n must lie in 2..{MAX_NODES}")
    complexes = all_complexes(n)
    mdags = tuple(MDag(n, ch, fs) for ch in directed for fs in complexes)
    return Universe(n, mdags, {g.encoding: i for i, g in enumerate(mdags)})


def enumerate_universe(n: int) -> Universe:
    """All mDAGs on ``n`` nodes consistent with the ordering 0 < 1 < ... < n-1."""
    return _universe(n, all_directed(n) if 2 <= n <= MAX_NODES else [])


def labeled_universe(n: int) -> Universe:
    """All mDAGs on ``n`` labelled nodes, any acyclic directed structure."""
    return _universe(n, all_acyclic_directed(n) if 2 <= n <= MAX_NODES else [])


# ---------------------------------------------------------------------------
# proven equivalence


@dataclass
class EquivalencePartition:
    """Proven-equivalence blocks of the ordered universe.

    ``dominance[i, j]`` holds when block ``i`` is proven to dominate block
    ``j``; the relation is reflexive and transitively closed.
    """

    universe: Universe
    tier: RuleTier
    labels: np.ndarray
    dominance: np.ndarray

    @property
    def n_blocks(self) -> int:
        return int(self.labels.max()) + 1 if len(self.labels) else 0

    def blocks(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.n_blocks)]
        for i, b in enumerate(self.labels):
            out[b].append(i)
        return out

    def members(self, b: int) -> list[MDag]:
        return [self.universe[i] for i in np.flatnonzero(self.labels == b)]

    def block_of(self, g: MDag) -> int:
        return int(self.labels[self.universe.position(g)])


def proven_equivalences(
    universe: Universe, tier: RuleTier = FULL_TIER, shuffle_seed: int | None = None
) -> EquivalencePartition:
    """Saturate ``tier`` and restrict the result to ``universe``.

    Saturation runs over every labelled mDAG on the same nodes, because a chain
    of rule applications between two ordered mDAGs may pass through mDAGs that
    violate the ordering.  Dominance between ordered blocks is read off the
    labelled block graph the same way.
    """
    lab = labeled_universe(universe.n)
    res = saturate_equivalences(lab.mdags, tier, lab.index, shuffle_seed=shuffle_seed, respect_order=False)
    raw = np.array([res.labels[lab.index[g.encoding]] for g in universe.mdags], dtype=np.int64)
    relabel: dict[int, int] = {}
    labels = np.array([relabel.setdefault(int(b), len(relabel)) for b in raw], dtype=np.int64)
    nb = len(relabel)
    dag = nx.DiGraph()
    dag.add_nodes_from(range(res.n_blocks))
    dag.add_edges_from(res.dominance_edges)
    reach: dict[int, int] = {}
    for b in reversed(list(nx.topological_sort(dag))):
        r = 1 << relabel[b] if b in relabel else 0
        for c in dag.successors(b):
            r |= reach[c]
        reach[b] = r
    dominance = np.zeros((nb, nb), dtype=bool)
    for b, i in relabel.items():
        r = reach[b]
        dominance[i] = [(r >> j) & 1 for j in range(nb)]
    return EquivalencePartition(universe, tier, labels, dominance)


# ---------------------------------------------------------------------------
# fingerprints


def fingerprint(g: MDag, rule: str) -> frozenset:
    if rule == "skel":
        return skeleton_edges(g)
    if rule == "dsep":
        return all_dsep_relations(g)
    if rule == "esep":
        return all_esep_relations(g)
    if rule == "dc":
        return densely_connected_pairs(g)
    raise GraphError(f"no fingerprint for rule {rule!r}")


def _fingerprints(args: tuple[list[MDag], str]) -> list[frozenset]:
    mdags, rule = args
    return [fingerprint(g, rule) for g in mdags]


def _incidence(fps: Sequence[frozenset]) -> np.ndarray:
    cols = {x: k for k, x in enumerate(sorted(set().union(*fps), key=repr))}
    out = np.zeros((len(fps), len(cols)), dtype=np.float32)
    for i, fp in enumerate(fps):
        out[i, [cols[x] for x in fp]] = 1
    return out


def _has_extra(fps: Sequence[frozenset]) -> np.ndarray:
    """``m[i, j]`` is true when ``fps[i]`` has an element missing from ``fps[j]``."""
    f = _incidence(fps)
    if f.shape[1] == 0:
        return np.zeros((len(fps), len(fps)), dtype=bool)
    return (f @ (1 - f).T) > 0.5


# ---------------------------------------------------------------------------
# the ledger


@dataclass
class ClassificationLedger:
    partition: EquivalencePartition
    representatives: list[MDag]
    fingerprints: dict[str, list[frozenset]] = field(default_factory=dict)
    nondominance: dict[str, np.ndarray] = field(default_factory=dict)
    def_members: list[MDag | None] = field(default_factory=list)
    confounder_free: list[bool] = field(default_factory=list)
    support_cards: tuple[int, ...] | None = None
    support_answers: dict[int, dict[se.Support, bool]] = field(default_factory=dict)
    support_tiers: dict[int, tuple[int, int]] = field(default_factory=dict)

    @property
    def n_blocks(self) -> int:
        return self.partition.n_blocks

    def rules(self) -> tuple[str, ...]:
        return tuple(r for r in NONDOMINANCE_RULES if r in self.nondominance)

    def inequivalent(self, rules: Iterable[str] | None = None) -> np.ndarray:
        rules = self.rules() if rules is None else tuple(rules)
        nb = self.n_blocks
        out = np.zeros((nb, nb), dtype=bool)
        for r in rules:
            if r not in self.nondominance:
                raise GraphError(f"rule {r!r} has not been run")
            out |= self.nondominance[r]
        return out | out.T

    def components(self, rules: Iterable[str] | None = None) -> np.ndarray:
        return _components(self.inequivalent(rules))

    def tier_counts(self, rules: Iterable[str] | None = None) -> tuple[int, int]:
        """(number of proven-inequivalence blocks, number of identified classes)."""
        comp = self.components(rules)
        sizes = np.bincount(comp)
        return int(len(sizes)), int((sizes == 1).sum())

    def identified(self, rules: Iterable[str] | None = None) -> list[int]:
        comp = self.components(rules)
        sizes = np.bincount(comp)
        return [b for b in range(self.n_blocks) if sizes[comp[b]] == 1]

    def check_contradictions(self) -> None:
        """Abort when some pair is proven to dominate and not to dominate."""
        dom = self.partition.dominance
        bad: list[tuple[str, MDag, MDag]] = []
        for rule, nd in self.nondominance.items():
            for i, j in zip(*np.nonzero(dom & nd)):
                bad.append((rule, self.representatives[i], self.representatives[j]))
        if bad:
            rule, g, h = bad[0]
            raise ContradictionError(f"{len(bad)} contradictions, first: {g} vs {h} ({rule})", bad)

    def to_json(self, include_nondominance: bool = True) -> dict:
        blocks = self.partition.blocks()
        comp = self.components() if self.nondominance else np.arange(self.n_blocks)
        out = {
            "n": self.partition.universe.n,
            "rules": str(self.partition.tier),
            "nondominance_rules": list(self.rules()),
            "blocks": [
                {
                    "id": b,
                    "members": [self.partition.universe[i].to_json() for i in blocks[b]],
                    "confounder_free": self.confounder_free[b],
                    "directed_edge_free": self.def_members[b] is not None,
                    "component": int(comp[b]),
                }
                for b in range(self.n_blocks)
            ],
            "dominance": [[int(i), int(j)] for i, j in zip(*np.nonzero(hasse_edges(self)))],
            "support_tiers": {str(k): list(v) for k, v in sorted(self.support_tiers.items())},
        }
        if include_nondominance:
            out["nondominance"] = {
                r: [[int(i), int(j)] for i, j in zip(*np.nonzero(m))] for r, m in self.nondominance.items()
            }
        return out


def _components(inequivalent: np.ndarray) -> np.ndarray:
    adj = ~inequivalent
    np.fill_diagonal(adj, False)
    _, labels = connected_components(csr_matrix(adj), directed=False)
    # renumber by first block so that labels are stable
    relabel: dict[int, int] = {}
    return np.array([relabel.setdefault(int(x), len(relabel)) for x in labels], dtype=np.int64)


def _open_groups(inequivalent: np.ndarray) -> list[list[int]]:
    comp = _components(inequivalent)
    groups: dict[int, list[int]] = {}
    for b, c in enumerate(comp):
        groups.setdefault(int(c), []).append(b)
    return [g for g in groups.values() if len(g) > 1]


def _representative(members: list[MDag]) -> MDag:
    return min(members, key=lambda g: (len(g.facets), len(g.edges)))


def new_ledger(partition: EquivalencePartition) -> ClassificationLedger:
    nb = partition.n_blocks
    members = [partition.members(b) for b in range(nb)]
    reps = [_representative(m) for m in members]
    defs: list[MDag | None] = []
    for m in members:
        edge_free = [g for g in m if is_directed_edge_free(g)]
        if len(edge_free) > 1:
            raise ClassificationError(f"two directed-edge-free mDAGs proven equivalent: {edge_free[:2]}")
        defs.append(edge_free[0] if edge_free else None)
    cf = [any(is_confounder_free(g) for g in m) for m in members]
    return ClassificationLedger(partition, reps, def_members=defs, confounder_free=cf)


def nondominance_pass(
    ledger: ClassificationLedger, rule: str, verify: bool = True, workers: int = 1
) -> ClassificationLedger:
    """Run one graphical nondominance rule and record its matrix."""
    if rule == "def":
        defs = ledger.def_members
        nb = ledger.n_blocks
        nd = np.zeros((nb, nb), dtype=bool)
        idx = [b for b in range(nb) if defs[b] is not None]
        for i in idx:
            for j in idx:
                if i != j and not structurally_dominates(defs[i], defs[j]):
                    nd[i, j] = True
        ledger.nondominance["def"] = nd
        return ledger
    if rule not in ("skel", "dsep", "esep", "dc"):
        raise GraphError(f"unknown nondominance rule {rule!r}")
    blocks = ledger.partition.blocks()
    universe = ledger.partition.universe
    todo = [[universe[i] for i in blk] if verify else [ledger.representatives[b]] for b, blk in enumerate(blocks)]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_fingerprints, [(m, rule) for m in todo], chunksize=16))
    else:
        results = [_fingerprints((m, rule)) for m in todo]
    fps = []
    for b, res in enumerate(results):
        if any(r != res[0] for r in res[1:]):
            raise ClassificationError(f"{rule} fingerprint differs inside block {b}: {todo[b][0]}")
        fps.append(res[0])
    ledger.fingerprints[rule] = fps
    extra = _has_extra(fps)
    # separation relations of g missing in h show g does not dominate h; for
    # skeleton edges and densely connected pairs the roles are swapped
    ledger.nondominance[rule] = extra if rule in ("dsep", "esep") else extra.T
    return ledger


def build_ledger(
    partition: EquivalencePartition,
    rules: Sequence[str] = GRAPHICAL_RULES,
    verify: bool = True,
    workers: int = 1,
) -> ClassificationLedger:
    ledger = new_ledger(partition)
    for r in rules:
        nondominance_pass(ledger, r, verify=verify, workers=workers)
    ledger.check_contradictions()
    return ledger


# ---------------------------------------------------------------------------
# supports


def support_pass(
    ledger: ClassificationLedger,
    cards: Sequence[int],
    max_events: int,
    cache: se.SupportCache | None = None,
    progress: Callable[[int, tuple[int, int]], None] | None = None,
) -> ClassificationLedger:
    """Compare realizable supports of 2..max_events events.

    Supports are visited ascending in size and, within a size, in the order of
    their canonical forms.  A support is only decided for the blocks of
    proven-inequivalence blocks that still hold more than one equivalence
    block: once two blocks sit in different components they are already
    proven inequivalent, and components only ever split.  The final partition
    therefore equals the one obtained by comparing all supports on all pairs.
    Components are handled one at a time and their SAT instances freed
    afterwards, which keeps memory bounded by the largest open component.
    """
    cards = tuple(cards)
    n = ledger.partition.universe.n
    if len(cards) != n:
        raise GraphError("cardinality vector length differs from node count")
    if max_events > int(np.prod(cards)):
        raise GraphError("max_events exceeds the number of events")
    if "dsep" not in ledger.fingerprints:
        nondominance_pass(ledger, "dsep", verify=False)
    if ledger.support_cards not in (None, cards):
        raise GraphError("ledger already holds supports for other cardinalities")
    ledger.support_cards = cards
    nb = ledger.n_blocks
    answers = ledger.support_answers
    if cache is not None:
        for b in range(nb):
            stored = cache.load(ledger.representatives[b], cards)
            if stored:
                answers.setdefault(b, {}).update(stored)
    base = ledger.inequivalent([r for r in ledger.rules() if r != "supports"])
    nd = ledger.nondominance.get("supports", np.zeros((nb, nb), dtype=bool))
    ledger.nondominance["supports"] = nd
    dsep = ledger.fingerprints["dsep"]
    oracles: dict[int, se.SupportOracle] = {}

    def decide(b: int, s: se.Support) -> bool:
        known = answers.setdefault(b, {})
        if s not in known:
            if se.ci_rules_out(dsep[b], s):
                known[s] = False
            else:
                if b not in oracles:
                    oracles[b] = se.SupportOracle(ledger.representatives[b], cards)
                known[s] = oracles[b].realizable(s)
        return known[s]

    try:
        for size in range(2, max_events + 1):
            reps = se.orbit_representatives(cards, size)
            # one open component at a time, so only its oracles are alive
            for component in _open_groups(base | nd | nd.T):
                inside = set(component)
                groups = [component]
                for s in reps:
                    split = False
                    for grp in groups:
                        yes = [b for b in grp if decide(b, s)]
                        no = [b for b in grp if not answers[b][s]]
                        if yes and no:
                            nd[np.ix_(no, yes)] = True
                            split = True
                    if split:
                        groups = [g for g in _open_groups(base | nd | nd.T) if inside.issuperset(g)]
                        if not groups:
                            break
                for b in component:
                    if b in oracles:
                        oracles.pop(b).close()
            counts = ledger.tier_counts()
            ledger.support_tiers[size] = counts
            log.info("supports <= %d events: %d blocks, %d identified", size, *counts)
            if cache is not None:
                for b, known in answers.items():
                    cache.store(ledger.representatives[b], cards, known)
            if progress is not None:
                progress(size, counts)
    finally:
        for o in oracles.values():
            o.close()
    ledger.check_contradictions()
    return ledger


def unresolved_partners(ledger: ClassificationLedger, b: int, rules: Iterable[str] | None = None) -> list[int]:
    """Blocks not yet proven inequivalent to block ``b`` (its component, minus ``b``)."""
    comp = ledger.components(rules)
    return [c for c in range(ledger.n_blocks) if c != b and comp[c] == comp[b]]


def realizes_every_support(ledger: ClassificationLedger, b: int) -> bool:
    """True when block ``b`` answered every decided support positively."""
    known = ledger.support_answers.get(b, {})
    return bool(known) and all(known.values())


# ---------------------------------------------------------------------------
# algebraicness


@dataclass
class AlgebraicnessReport:
    nonalgebraic_lower: int
    algebraic_upper: int
    classes_lower: int
    classes_upper: int
    status: list[str]

    @property
    def fraction_method1(self) -> float:
        return self.nonalgebraic_lower / self.classes_upper

    @property
    def fraction_method2(self) -> float:
        return 1 - self.algebraic_upper / self.classes_lower

    @property
    def nonalgebraic_fraction_lower(self) -> float:
        return max(self.fraction_method1, self.fraction_method2)


def markov_class_count(n: int) -> int:
    """Number of d-separation patterns among all labelled DAGs on ``n`` nodes."""
    patterns = set()
    for ch in all_acyclic_directed(n):
        g = MDag(n, ch)
        # relabel along a topological order, then map the relations back
        order = topological_order(g)
        pi = invert_permutation(order)
        inv = order

        def back(m: int) -> int:
            return to_mask(inv[v] for v in bits(m))

        rels = all_dsep_relations(apply_permutation(g, pi))
        patterns.add(frozenset(SepRelation.make(back(r.a), back(r.b), back(r.c)) for r in rels))
    return len(patterns)


def algebraicness_bounds(ledger: ClassificationLedger, rules: Iterable[str] | None = None) -> AlgebraicnessReport:
    """Bounds on the number of algebraic and nonalgebraic classes.

    An mDAG is algebraic exactly when some relabelling of it that respects the
    ordering is proven equivalent to a confounder-free mDAG.  A
    proven-inequivalence block none of whose members has a relabelling landing
    in a block that holds a confounder-free mDAG is nonalgebraic.
    """
    part = ledger.partition
    uni = part.universe
    comp = ledger.components(rules)
    n_comp = int(comp.max()) + 1
    cf_comp = {int(comp[b]) for b in range(ledger.n_blocks) if ledger.confounder_free[b]}
    block_alg = [False] * ledger.n_blocks
    comp_hit = [False] * n_comp
    perms = list(itertools.permutations(range(uni.n)))
    for i, g in enumerate(uni.mdags):
        b = int(part.labels[i])
        for pi in perms:
            h = apply_permutation(g, pi)
            if not is_ordered(h):
                continue
            hb = int(part.labels[uni.position(h)])
            if ledger.confounder_free[hb]:
                block_alg[b] = True
            if int(comp[hb]) in cf_comp:
                comp_hit[int(comp[b])] = True
    status = []
    for b in range(ledger.n_blocks):
        if block_alg[b]:
            status.append("algebraic")
        elif not comp_hit[int(comp[b])]:
            status.append("nonalgebraic")
        else:
            status.append("unknown")
    return AlgebraicnessReport(
        nonalgebraic_lower=sum(1 for c in range(n_comp) if not comp_hit[c]),
        algebraic_upper=markov_class_count(uni.n),
        classes_lower=n_comp,
        classes_upper=ledger.n_blocks,
        status=status,
    )


# ---------------------------------------------------------------------------
# partial order


def hasse_edges(ledger: ClassificationLedger) -> np.ndarray:
    """Transitive reduction of the proven block dominance order."""
    dom = ledger.partition.dominance.copy()
    np.fill_diagonal(dom, False)
    d = dom.astype(np.float32)
    return dom & ~((d @ d) > 0.5)


def block_label(ledger: ClassificationLedger, b: int) -> str:
    names = named_blocks(ledger.partition)
    return names.get(b, str(ledger.representatives[b]))


def partial_order_report(ledger: ClassificationLedger) -> dict:
    """Hasse diagram plus the rules behind every incomparability."""
    if ledger.n_blocks == 0:
        raise GraphError("empty ledger")
    dom = ledger.partition.dominance
    hasse = hasse_edges(ledger)
    incomparable = []
    for i in range(ledger.n_blocks):
        for j in range(i + 1, ledger.n_blocks):
            if dom[i, j] or dom[j, i]:
                continue
            fwd = [r for r, m in ledger.nondominance.items() if m[i, j]]
            bwd = [r for r, m in ledger.nondominance.items() if m[j, i]]
            incomparable.append({"pair": [i, j], "not_i_over_j": fwd, "not_j_over_i": bwd})
    return {
        "nodes": [{"id": b, "label": block_label(ledger, b)} for b in range(ledger.n_blocks)],
        "edges": [[int(i), int(j)] for i, j in zip(*np.nonzero(hasse))],
        "incomparable": incomparable,
    }


def to_dot(ledger: ClassificationLedger) -> str:
    if ledger.n_blocks == 0:
        raise GraphError("empty ledger")
    lines = ["digraph dominance {", "  rankdir=TB;"]
    for b in range(ledger.n_blocks):
        label = block_label(ledger, b).replace('"', "'")
        lines.append(f'  b{b} [label="{label}"];')
    for i, j in zip(*np.nonzero(hasse_edges(ledger))):
        lines.append(f"  b{i} -> b{j};")
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# named classes


def short_mdag(n: int, text: str) -> MDag:
    """Parse the compact form ``"a->b a->c | ab ac"`` with letter node names."""
    names = node_names(n)
    edge_part, _, face_part = text.partition("|")
    edges = []
    for tok in edge_part.split():
        u, v = tok.split("->")
        edges.append((names.index(u), names.index(v)))
    faces = [to_mask(names.index(ch) for ch in tok) for tok in face_part.split()]
    return MDag.build(n, edges, faces)


NAMED_3 = {
    "Factorizing": "",
    "Factorizing AB|C": "a->b",
    "Factorizing AC|B": "a->c",
    "Factorizing B|CA": "b->c",
    "Fork": "a->b a->c",
    "Chain": "a->b b->c",
    "Collider C": "a->c b->c",
    "Collider B": "a->b | bc",
    "Collider A": "| ab ac",
    "Instrumental ABC": "a->b b->c | bc",
    "Instrumental CAB": "a->b | ab ac",
    "Instrumental BAC": "a->c | ab ac",
    "Evans": "a->b a->c | ab ac",
    "Triangle": "| ab ac bc",
    "Saturated": "| abc",
}

BELL = "a->c b->d | cd"


def named_blocks(partition: EquivalencePartition) -> dict[int, str]:
    if partition.universe.n != 3:
        return {}
    out = {}
    for name, text in NAMED_3.items():
        b = partition.block_of(short_mdag(3, text))
        out.setdefault(b, name)
    return out


# ---------------------------------------------------------------------------
# persistence


def save_ledger(ledger: ClassificationLedger, path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        json.dump(ledger.to_json(), fh, indent=1, sort_keys=True)
