import itertools
from math import comb

import pytest
from hypothesis import given, settings, strategies as st

from artifact.classifier import NAMED_3, short_mdag
from artifact.graph_core import GraphError, MDag, all_complexes, bits, canonical_pdag
from artifact.support_engine import (
    SupportCache,
    SupportOracle,
    all_events,
    bruteforce_realizable_supports,
    candidate_supports,
    canonical_support,
    ci_rules_out,
    compare_support_profiles,
    dense_connection_support,
    enumerate_realizable_supports,
    format_support,
    make_support,
    orbit_representatives,
    parse_support,
    perfect_correlation_support,
    support_realizable,
    support_witness,
)

from conftest import small_mdags

BIN3 = (2, 2, 2)
NAMED = {name: short_mdag(3, text) for name, text in NAMED_3.items()}
S = parse_support("000 011 100")
S_PRIME = parse_support("100 001 011 000")


def test_evans_realizes_the_instrumental_breaking_support():
    assert support_realizable(NAMED["Evans"], BIN3, S)
    assert not support_realizable(NAMED["Instrumental BAC"], BIN3, S)
    assert not support_realizable(NAMED["Instrumental CAB"], BIN3, S)
    w = support_witness(NAMED["Evans"], BIN3, S)
    assert w.image() == set(S)


def test_second_distinguishing_support():
    assert support_realizable(NAMED["Instrumental CAB"], BIN3, S_PRIME)
    assert not support_realizable(NAMED["Instrumental BAC"], BIN3, S_PRIME)
    assert support_witness(NAMED["Instrumental BAC"], BIN3, S_PRIME) is None


def test_support_profiles_find_the_published_support():
    ev = compare_support_profiles(NAMED["Instrumental BAC"], NAMED["Evans"], BIN3, 3)
    assert ev.not_g_over_h == S
    assert compare_support_profiles(NAMED["Evans"], NAMED["Evans"], BIN3, 4).empty


def test_support_text_round_trip():
    assert format_support(S) == "000\n011\n100"
    assert parse_support(format_support(S)) == S
    with pytest.raises(GraphError):
        support_realizable(NAMED["Evans"], BIN3, parse_support("00 11"))
    with pytest.raises(GraphError):
        make_support([])


def test_full_support_is_always_realizable():
    full = make_support(all_events(BIN3))
    for g in NAMED.values():
        assert support_realizable(g, BIN3, full)
        assert not ci_rules_out(g, full)


@pytest.mark.parametrize("name", sorted(NAMED))
def test_sat_matches_bruteforce(name):
    g = NAMED[name]
    brute = bruteforce_realizable_supports(g, BIN3, 2)
    with SupportOracle(g, BIN3) as oracle:
        for s in brute:
            assert oracle.realizable(s)
        # latent cardinality two covers every support of at most two events
        for size in (1, 2):
            for s in candidate_supports(BIN3, size):
                assert oracle.realizable(s) == (s in brute)


@pytest.mark.parametrize("name", sorted(NAMED))
def test_ci_prefilter_is_sound(name):
    g = NAMED[name]
    with SupportOracle(g, BIN3) as oracle:
        for size in (2, 3, 4):
            for s in candidate_supports(BIN3, size):
                if ci_rules_out(g, s):
                    assert not oracle.realizable(s)


def test_two_independent_nodes_realize_exactly_the_products():
    g = MDag.build(2)
    got = enumerate_realizable_supports(g, (2, 2), 4)
    values = [(0,), (1,), (0, 1)]
    products = {make_support(itertools.product(x, y)) for x in values for y in values}
    assert got == products


def test_perfect_correlation_needs_a_common_ancestor():
    for ch in itertools.product(range(4), range(2)):
        children = (ch[0] << 1, ch[1] << 2, 0)
        for fs in all_complexes(3):
            g = MDag(3, children, fs)
            p = canonical_pdag(g, singleton_latents=True)
            anc = [ancestors_in_pdag(p, v) for v in range(3)]
            for nodes in (0b011, 0b101, 0b110):
                u, v = bits(nodes)
                s = perfect_correlation_support(nodes, 3)
                ok = support_realizable(g, BIN3, s)
                if ok:
                    assert anc[u] & anc[v]
                if not any(children):
                    # no directed edges: pinning the third variable is harmless
                    assert ok == any(f & nodes == nodes for f in fs)
                elif not anc[u] & anc[v]:
                    assert not ok


def ancestors_in_pdag(p, v: int) -> int:
    out = 1 << v
    frontier = out
    while frontier:
        nxt = 0
        for u in bits(frontier):
            nxt |= p.parents(u)
        frontier = nxt & ~out
        out |= nxt
    return out


def test_dense_connection_support():
    s = dense_connection_support(0, 2, 3)
    assert len(s) == 4 and all(e[0] == e[2] for e in s)
    assert support_realizable(NAMED["Collider C"], BIN3, s)
    assert not support_realizable(NAMED["Collider B"], BIN3, s)


def test_orbit_counts_match_burnside():
    # every nonzero flip acts on the 8 binary events as four disjoint swaps
    for k in range(1, 9):
        fixed = 7 * comb(4, k // 2) if k % 2 == 0 else 0
        assert len(orbit_representatives(BIN3, k)) == (comb(8, k) + fixed) // 8


@settings(max_examples=60, deadline=None)
@given(small_mdags(3), st.sets(st.sampled_from(all_events(BIN3)), min_size=2, max_size=5), st.randoms())
def test_realizability_is_invariant_under_outcome_relabelling(g, events, rnd):
    s = make_support(events)
    flips = [rnd.randrange(2) for _ in range(3)]
    t = make_support(tuple(x ^ f for x, f in zip(e, flips)) for e in s)
    assert canonical_support(s, BIN3) == canonical_support(t, BIN3)
    assert support_realizable(g, BIN3, s) == support_realizable(g, BIN3, t)


@settings(max_examples=60, deadline=None)
@given(small_mdags(3), st.sets(st.sampled_from(all_events(BIN3)), min_size=1, max_size=6))
def test_witnesses_regenerate_their_support(g, events):
    s = make_support(events)
    w = support_witness(g, BIN3, s)
    assert (w is not None) == support_realizable(g, BIN3, s)
    if w is not None:
        assert w.image() == set(s)


def test_witness_with_ternary_variable():
    g = short_mdag(3, "a->b b->c | ac")
    s = parse_support("000 110 201 211")
    w = support_witness(g, (3, 2, 2), s)
    assert w is not None and w.image() == set(s)


def test_saturated_realizes_everything_up_to_six_events():
    sat = short_mdag(4, "| abcd")
    with SupportOracle(sat, (2, 2, 2, 2)) as oracle:
        for k in range(2, 7):
            assert all(oracle.realizable(s) for s in orbit_representatives((2, 2, 2, 2), k))


def test_support_cache_round_trip(tmp_path):
    cache = SupportCache(tmp_path)
    g = NAMED["Evans"]
    assert cache.load(g, BIN3) == {}
    cache.store(g, BIN3, {S: True, S_PRIME: False})
    assert SupportCache(tmp_path).load(g, BIN3) == {S: True, S_PRIME: False}
    assert cache.load(NAMED["Triangle"], BIN3) == {}
