import pytest

from tsg import churn, raes
from tsg.expansion import UndirectedView
from tsg.model import GraphState
from tsg.rng import make_rng


def complete_graph(k, start=1):
    vs = list(range(start, start + k))
    return UndirectedView.from_edges(vs, [(a, b) for i, a in enumerate(vs) for b in vs[i + 1:]])


def cycle(k, start=1):
    vs = list(range(start, start + k))
    return UndirectedView.from_edges(vs, [(vs[i], vs[(i + 1) % k]) for i in range(k)])


def two_triangles(bridge=True):
    edges = [(1, 2), (2, 3), (1, 3), (4, 5), (5, 6), (4, 6)]
    if bridge:
        edges.append((3, 4))
    return UndirectedView.from_edges(range(1, 7), edges)


def manual_state(n, d, c, rounds):
    """Churn only: vertices 1..rounds present with every request pending."""
    state = GraphState(n, d, c)
    for t in range(1, rounds + 1):
        ev = churn.advance(state, t)
        if ev.departed is not None:
            raes.cleanup_departure(state, ev.departed)
        raes.init_requests(state, ev.joined)
    return state


def connect(state, triples):
    """Force-accept (owner, index, target) requests, bypassing the draw."""
    acc, rej = raes.resolve_acceptances(state, raes.DrawBatch.from_list(triples))
    assert len(rej) == 0
    return acc


@pytest.fixture
def rng():
    return make_rng(12345)


@pytest.fixture(scope="session")
def stable_state():
    state = GraphState(16, 3, 4)
    raes.run_rounds(state, 40, make_rng(7))
    return state


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(results):
        ok, detail = results[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
