import json

import numpy as np
import pytest

from artifact.classifier import (
    NAMED_3,
    ClassificationError,
    ContradictionError,
    _components,
    algebraicness_bounds,
    build_ledger,
    enumerate_universe,
    hasse_edges,
    markov_class_count,
    named_blocks,
    partial_order_report,
    proven_equivalences,
    save_ledger,
    short_mdag,
    support_pass,
    to_dot,
)
from artifact.separation import all_dsep_relations
from artifact.support_engine import enumerate_realizable_supports

BIN3 = (2, 2, 2)
NONALGEBRAIC_3 = {"Triangle", "Evans", "Instrumental BAC", "Instrumental CAB", "Instrumental ABC"}


@pytest.fixture(scope="module")
def supported3(partition3):
    ledger = build_ledger(partition3)
    return support_pass(ledger, BIN3, 4)


@pytest.fixture(scope="module")
def profiles3(ledger3):
    return [enumerate_realizable_supports(g, BIN3, 8) for g in ledger3.representatives]


def test_named_classes_are_distinct_blocks(partition3):
    names = named_blocks(partition3)
    assert len(names) == 15 == partition3.n_blocks
    assert sorted(names.values()) == sorted(NAMED_3)


def test_graphical_tiers(ledger3):
    counts = [
        ledger3.tier_counts(r)[0]
        for r in (["skel"], ["skel", "dsep"], ["esep"], ["dc", "esep"], ["def", "dc", "esep"])
    ]
    assert counts == [8, 12, 12, 12, 13]


def test_support_tiers_and_full_identification(supported3):
    assert {k: v[0] for k, v in supported3.support_tiers.items()} == {2: 13, 3: 14, 4: 15}
    assert supported3.identified() == list(range(15))


def test_support_pass_equals_all_pairs_comparison(supported3, profiles3):
    # oracle: complete realizable-support sets, truncated to at most 4 events
    small = [{s for s in p if len(s) <= 4} for p in profiles3]
    nb = len(small)
    nd = np.array([[bool(small[j] - small[i]) for j in range(nb)] for i in range(nb)])
    ledger = supported3
    graphical = ledger.inequivalent([r for r in ledger.rules() if r != "supports"])
    assert np.array_equal(_components(graphical | nd | nd.T), ledger.components())


def test_esep_subsumes_dsep_and_skeleton(ledger3):
    nd = ledger3.nondominance
    assert not (nd["dsep"] & ~nd["esep"]).any()
    assert not (nd["skel"] & ~nd["esep"]).any()
    # neither skeleton nor d-separation subsumes the other
    assert (nd["skel"] & ~nd["dsep"]).any() and (nd["dsep"] & ~nd["skel"]).any()


def test_skeleton_and_dsep_examples(partition3, ledger3):
    block = {name: partition3.block_of(short_mdag(3, text)) for name, text in NAMED_3.items()}
    fp = ledger3.fingerprints
    ca, ev, tri, fork = (block[x] for x in ("Collider A", "Evans", "Triangle", "Fork"))
    assert fp["skel"][ca] == fp["skel"][ev] and fp["dsep"][ca] != fp["dsep"][ev]
    assert fp["dsep"][tri] == fp["dsep"][ev] == frozenset() and fp["skel"][tri] != fp["skel"][ev]
    assert fp["dc"][ca] == fp["dc"][fork] and fp["esep"][ca] != fp["esep"][fork]
    # Triangle does not dominate Saturated, shown only by the directed-edge-free rule
    sat = block["Saturated"]
    assert ledger3.nondominance["def"][tri, sat]
    assert not any(ledger3.nondominance[r][tri, sat] for r in ("skel", "dsep", "esep", "dc"))


def test_supports_subsume_graphical_nondominance(ledger3, profiles3):
    for rule in ("esep", "dc", "def"):
        for i, j in zip(*np.nonzero(ledger3.nondominance[rule])):
            assert profiles3[j] - profiles3[i], (rule, i, j)


def test_fork_and_chain_relations(ledger3, partition3):
    fork = partition3.block_of(short_mdag(3, "a->b a->c"))
    assert ledger3.fingerprints["dsep"][fork] == all_dsep_relations(short_mdag(3, "a->b a->c"))


def test_hasse_diagram(supported3):
    names = named_blocks(supported3.partition)
    hasse = hasse_edges(supported3)
    tops = [b for b in range(15) if not hasse[:, b].any()]
    bottoms = [b for b in range(15) if not hasse[b].any()]
    assert [names[b] for b in tops] == ["Saturated"]
    assert [names[b] for b in bottoms] == ["Factorizing"]
    # re-closing the reduction gives back the dominance order
    closure = hasse | np.eye(15, dtype=bool)
    for _ in range(15):
        closure = closure | ((closure.astype(int) @ closure.astype(int)) > 0)
    assert np.array_equal(closure, supported3.partition.dominance)
    report = partial_order_report(supported3)
    assert len(report["nodes"]) == 15
    assert all(p["not_i_over_j"] or p["not_j_over_i"] for p in report["incomparable"])
    dot = to_dot(supported3)
    assert dot.startswith("digraph") and dot.count("->") == int(hasse.sum())


def test_two_nodes():
    ledger = build_ledger(proven_equivalences(enumerate_universe(2)))
    assert ledger.n_blocks == 2
    sat = ledger.partition.block_of(short_mdag(2, "| ab"))
    fac = ledger.partition.block_of(short_mdag(2, ""))
    assert ledger.partition.dominance[sat, fac] and not ledger.partition.dominance[fac, sat]
    report = algebraicness_bounds(ledger)
    assert report.status == ["algebraic", "algebraic"]


def test_three_node_algebraicness(supported3):
    report = algebraicness_bounds(supported3)
    names = named_blocks(supported3.partition)
    nonalg = {names[b] for b, s in enumerate(report.status) if s == "nonalgebraic"}
    assert nonalg == NONALGEBRAIC_3
    assert report.nonalgebraic_lower == 5
    assert report.algebraic_upper == 11
    assert "unknown" not in report.status


def test_markov_class_counts():
    assert markov_class_count(2) == 2
    assert markov_class_count(3) == 11


def test_contradictions_abort(partition3):
    ledger = build_ledger(partition3)
    ledger.check_contradictions()
    sat = partition3.block_of(short_mdag(3, "| abc"))
    fac = partition3.block_of(short_mdag(3, ""))
    ledger.nondominance["skel"][sat, fac] = True
    with pytest.raises(ContradictionError) as info:
        ledger.check_contradictions()
    assert len(info.value.pairs) == 1
    assert isinstance(info.value, ClassificationError)


def test_ledger_json(supported3, tmp_path):
    data = supported3.to_json()
    assert data["n"] == 3 and len(data["blocks"]) == 15
    assert sum(len(b["members"]) for b in data["blocks"]) == 72
    assert data["support_tiers"]["4"] == [15, 15]
    path = tmp_path / "ledger.json"
    save_ledger(supported3, path)
    assert json.loads(path.read_text())["support_tiers"] == data["support_tiers"]
