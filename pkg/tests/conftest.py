import sys

import pytest
from hypothesis import strategies as st

from artifact.classifier import build_ledger, enumerate_universe, proven_equivalences
from artifact.graph_core import MDag, all_complexes, all_directed


@st.composite
def mdags(draw, n_min: int = 2, n_max: int = 5) -> MDag:
    """Random ordered mDAG: forward edges plus a random antichain of faces."""
    n = draw(st.integers(n_min, n_max))
    edges = [(u, v) for u in range(n) for v in range(u + 1, n) if draw(st.booleans())]
    faces = draw(st.lists(st.integers(1, (1 << n) - 1), max_size=4))
    return MDag.build(n, edges, faces)


@st.composite
def small_mdags(draw, n: int) -> MDag:
    """Uniform choice from the ordered universe on ``n`` nodes."""
    ch = draw(st.sampled_from(all_directed(n)))
    fs = draw(st.sampled_from(all_complexes(n)))
    return MDag(n, ch, fs)


@pytest.fixture(scope="session")
def universe3():
    return enumerate_universe(3)


@pytest.fixture(scope="session")
def partition3(universe3):
    return proven_equivalences(universe3)


@pytest.fixture(scope="session")
def ledger3(partition3):
    return build_ledger(partition3)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
