import itertools

import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from artifact.classifier import enumerate_universe, short_mdag
from artifact.graph_core import (
    GraphError,
    MDag,
    PDag,
    all_acyclic_directed,
    all_complexes,
    ancestors,
    apply_permutation,
    canonical_pdag,
    compose_permutations,
    descendants,
    exogenize,
    induced_subgraph,
    invert_permutation,
    is_ordered,
    lnodes_to_faces,
    load_mdag,
    parse_json,
    parse_text,
    re_reduce,
    remove_redundant,
    skeleton_edges,
    to_mask,
)

from conftest import mdags


@st.composite
def pdags(draw) -> PDag:
    """Random pDAG: visible nodes in index order, latents interleaved anywhere."""
    nv = draw(st.integers(2, 4))
    nl = draw(st.integers(0, 3))
    slots = draw(st.lists(st.integers(0, nv), min_size=nl, max_size=nl))
    # position of every node in a total order consistent with the visibles
    pos = {v: 2 * v + 1 for v in range(nv)}
    for i, s in enumerate(slots):
        pos[nv + i] = 2 * s
    order = sorted(range(nv + nl), key=lambda u: (pos[u], u))
    edges = [
        (u, v)
        for i, u in enumerate(order)
        for v in order[i + 1 :]
        if draw(st.booleans())
    ]
    return PDag.build(nv, nl, edges)


def _visible_ancestry(p: PDag) -> set[tuple[int, int]]:
    g = nx.DiGraph()
    g.add_nodes_from(range(p.total))
    g.add_edges_from((u, v) for u in range(p.total) for v in range(p.total) if p.children[u] >> v & 1)
    return {(u, v) for u in range(p.n_visible) for v in range(p.n_visible) if u != v and nx.has_path(g, u, v)}


def test_complex_counts_match_brute_force():
    # independent oracle: filter all families of candidate sets for antichains
    for n, expected in ((2, 2), (3, 9)):
        cands = [m for m in range(1, 1 << n) if bin(m).count("1") >= 2]
        count = 0
        for r in range(len(cands) + 1):
            for fam in itertools.combinations(cands, r):
                if all(a & b != a and a & b != b for a, b in itertools.combinations(fam, 2)):
                    count += 1
        assert count == expected == len(all_complexes(n))
    assert len(all_complexes(4)) == 114


def test_acyclic_structures_match_networkx():
    for n in (2, 3, 4):
        pairs = list(itertools.combinations(range(n), 2))
        count = 0
        for choice in itertools.product((0, 1, 2), repeat=len(pairs)):
            g = nx.DiGraph()
            g.add_nodes_from(range(n))
            for (u, v), c in zip(pairs, choice):
                if c == 1:
                    g.add_edge(u, v)
                elif c == 2:
                    g.add_edge(v, u)
            count += nx.is_directed_acyclic_graph(g)
        assert len(all_acyclic_directed(n)) == count
    assert [len(all_acyclic_directed(n)) for n in (2, 3, 4)] == [3, 25, 543]


def test_universe_counts():
    assert [len(enumerate_universe(n)) for n in (2, 3, 4)] == [4, 72, 7296]


def test_construction_rejects_bad_input():
    with pytest.raises(GraphError):
        MDag(3, (0b010, 0b001, 0))  # cycle 0 -> 1 -> 0
    with pytest.raises(GraphError):
        MDag(3, (0, 0, 0), (0b001,))  # singleton stored as facet
    with pytest.raises(GraphError):
        MDag(3, (0, 0, 0), (0b011, 0b111))  # not an antichain
    with pytest.raises(GraphError):
        MDag.build(17)
    with pytest.raises(GraphError):
        parse_text("nodes 3\nedges 2->1\n")


def test_build_keeps_only_facets():
    g = MDag.build(3, [], [{0, 1}, {0, 1, 2}, {2}])
    assert g.facets == (0b111,)
    assert g.is_face(0b101) and g.is_face(0)
    assert MDag.build(3).all_facets == (1, 2, 4)


def test_text_and_json_round_trip(tmp_path):
    g = short_mdag(4, "a->b b->d | acd bc")
    assert parse_text(g.to_text()) == g
    assert parse_json(g.to_json()) == g
    path = tmp_path / "g.txt"
    path.write_text(g.to_text())
    assert load_mdag(str(path)) == g


def test_exogenize_worked_example():
    # visible c, a, b, d (indices 0..3); latent alpha = 4 with parents beta and c
    c, a, b, d, alpha, beta = range(6)
    p = PDag.build(4, 2, [(beta, alpha), (c, alpha), (alpha, a), (alpha, b), (beta, d)])
    q = exogenize(p)
    assert q.parents(alpha) == 0
    assert q.children[beta] == to_mask([a, b, d])
    assert q.children[c] & to_mask([a, b]) == to_mask([a, b])
    r = remove_redundant(q)
    assert r.n_latent == 1 and r.children[4] == to_mask([a, b, d])
    assert re_reduce(p) == r


def test_remove_redundant_tie_break():
    p = PDag.build(2, 2, [(2, 0), (2, 1), (3, 0), (3, 1)])
    assert remove_redundant(p).n_latent == 1


def test_exogenous_latent_free_pdag_unchanged():
    p = PDag.build(3, 0, [(0, 1), (1, 2)])
    assert exogenize(p) == p
    assert lnodes_to_faces(p) == MDag.build(3, [(0, 1), (1, 2)])


@settings(max_examples=200, deadline=None)
@given(pdags())
def test_re_reduce_idempotent(p):
    once = re_reduce(p)
    assert re_reduce(once) == once


@settings(max_examples=200, deadline=None)
@given(pdags())
def test_exogenize_preserves_visible_ancestry(p):
    q = exogenize(p)
    assert q.is_exogenous()
    assert _visible_ancestry(q) == _visible_ancestry(p)


def test_canonical_pdag_round_trip_on_all_four_node_mdags():
    for g in enumerate_universe(4).mdags:
        assert lnodes_to_faces(canonical_pdag(g)) == g
        assert lnodes_to_faces(canonical_pdag(g, singleton_latents=True)) == g


@settings(max_examples=200, deadline=None)
@given(mdags(), st.randoms())
def test_permutation_inverse(g, rnd):
    pi = list(range(g.n))
    rnd.shuffle(pi)
    inv = invert_permutation(pi)
    assert apply_permutation(apply_permutation(g, pi), inv) == g
    assert compose_permutations(pi, inv) == tuple(range(g.n))
    assert apply_permutation(g, range(g.n)) == g


def test_collider_classes_are_permutation_images(partition3):
    collider_c = partition3.block_of(short_mdag(3, "a->c b->c"))
    collider_b = short_mdag(3, "a->b | bc")
    collider_a = short_mdag(3, "| ab ac")
    image_b = apply_permutation(collider_b, (0, 2, 1))
    image_a = apply_permutation(collider_a, (2, 1, 0))
    assert is_ordered(image_b) and is_ordered(image_a)
    assert partition3.block_of(image_b) == collider_c
    assert partition3.block_of(image_a) == collider_c


def test_induced_subgraph():
    g = short_mdag(4, "a->b b->c | acd")
    assert induced_subgraph(g, g.nodes) == g
    sub = induced_subgraph(g, to_mask([0, 2, 3]))
    assert sub == MDag.build(3, [], [{0, 1, 2}])
    lone = MDag.build(4, [(0, 1), (1, 2)], [{0, 2}])
    assert induced_subgraph(lone, 0b0111) == MDag.build(3, [(0, 1), (1, 2)], [{0, 2}])
    with pytest.raises(GraphError):
        induced_subgraph(g, 0)


def test_ancestry_queries():
    g = short_mdag(4, "a->b b->c | cd")
    assert ancestors(g, 0b0100) == 0b0111
    assert descendants(g, 0b0001) == 0b0111
    assert skeleton_edges(g) == {(0, 1), (1, 2), (2, 3)}
    assert skeleton_edges(MDag.build(3)) == frozenset()


@settings(max_examples=100, deadline=None)
@given(mdags())
def test_skeleton_survives_pdag_round_trip(g):
    assert skeleton_edges(lnodes_to_faces(canonical_pdag(g))) == skeleton_edges(g)
