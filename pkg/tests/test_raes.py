import math

import numpy as np
import pytest

from tsg import churn, raes
from tsg.model import GraphState, check_invariants
from tsg.oracle import reference_round_step
from tsg.rng import make_rng
from tsg.verify import acceptance_differential

from conftest import connect, manual_state


def test_cleanup_counts_freed_and_destroyed():
    n, d, c = 8, 3, 4
    state = manual_state(n, d, c, n)
    connect(state, [(1, 0, 2), (1, 1, 3), (1, 2, 4)] + [(v, 0, 1) for v in range(2, 7)])
    assert state.in_degree_of(1) == 5 and state.out_degree_of(1) == 3
    ev = churn.advance(state, n + 1)
    assert ev.departed == 1
    log = {}
    freed = raes.cleanup_departure(state, 1, log)
    assert freed.as_list() == [(v, 0) for v in range(2, 7)]
    assert len(log["destroyed"]) == 3
    assert [state.in_degree_of(v) for v in (2, 3, 4)] == [0, 0, 0]
    assert [h.owner for h in state.retired] == [1, 1, 1]


def test_cleanup_isolated():
    state = manual_state(8, 2, 4, 8)
    churn.advance(state, 9)
    assert len(raes.cleanup_departure(state, 1)) == 0


def test_cleanup_full_vertex():
    n, d, c = 8, 1, 4
    state = manual_state(n, d, c, n)
    connect(state, [(v, 0, 1) for v in range(2, 6)])
    assert state.full_count == 1
    churn.advance(state, n + 1)
    freed = raes.cleanup_departure(state, 1)
    assert len(freed) == c * d
    assert state.full_count == 0
    raes.init_requests(state, n + 1)
    check_invariants(state)


def test_queue_round_one(rng):
    state = GraphState(8, 3, 4)
    rep = raes.step(state, 1, rng)
    assert rep.queue_size_before == 3
    assert rep.accepted == rep.rejected == 0
    assert state.calls.sum() == 0


def _draws(triples):
    return raes.DrawBatch.from_list(triples)


def test_boundary_accept():
    n, d, c = 16, 1, 4
    state = manual_state(n, d, c, 8)
    connect(state, [(v, 0, 1) for v in range(2, 5)])  # in_degree 3 = cd - 1
    acc, rej = raes.resolve_acceptances(state, _draws([(5, 0, 1)]))
    assert len(acc) == 1 and len(rej) == 0
    assert state.in_degree_of(1) == 4


def test_full_rejects_single():
    n, d, c = 16, 1, 4
    state = manual_state(n, d, c, 8)
    connect(state, [(v, 0, 1) for v in range(2, 6)])
    acc, rej = raes.resolve_acceptances(state, _draws([(6, 0, 1)]))
    assert len(acc) == 0 and len(rej) == 1


def test_batch_overflow_rejects_all():
    n, d, c = 16, 1, 4
    state = manual_state(n, d, c, 8)
    connect(state, [(2, 0, 1), (3, 0, 1)])  # in_degree cd - 2
    acc, rej = raes.resolve_acceptances(state, _draws([(4, 0, 1), (5, 0, 1), (6, 0, 1), (7, 0, 8)]))
    assert rej.as_list() == [(4, 0, 1), (5, 0, 1), (6, 0, 1)]
    assert acc.as_list() == [(7, 0, 8)]
    assert state.in_degree_of(1) == 2


def test_multiplicity_counts_toward_ell():
    # two requests of the same owner hitting one target count as l = 2
    n, d, c = 16, 2, 2
    state = manual_state(n, d, c, 8)
    connect(state, [(2, 0, 1), (2, 1, 1), (3, 0, 1)])  # in_degree 3 = cd - 1
    acc, rej = raes.resolve_acceptances(state, _draws([(4, 0, 1), (4, 1, 1)]))
    assert len(acc) == 0 and len(rej) == 2


def test_fault_hook_flips_boundary():
    n, d, c = 16, 1, 4
    state = manual_state(n, d, c, 8)
    connect(state, [(v, 0, 1) for v in range(2, 5)])
    with raes.inject_acceptance_fault():
        acc, _ = raes.resolve_acceptances(state.copy(), _draws([(5, 0, 1)]))
    assert len(acc) == 0
    acc, _ = raes.resolve_acceptances(state.copy(), _draws([(5, 0, 1)]))
    assert len(acc) == 1


def test_reference_trivial_cases():
    state = manual_state(8, 2, 4, 4)
    assert reference_round_step(state, []) == ([], [])
    assert reference_round_step(state, [(1, 0, 2)]) == ([(1, 0, 2)], [])


def test_acceptance_differential_small():
    fast, ref, bad = acceptance_differential(300, seed=99)
    assert bad == []
    assert fast == ref


def test_no_draw_with_single_vertex(rng):
    state = manual_state(8, 3, 4, 1)
    draws = raes.draw_targets(state, raes.collect_queue(state), rng)
    assert len(draws) == 0
    assert state.queue_size == 3


def test_two_vertices_forced_target(rng):
    state = manual_state(8, 3, 4, 2)
    draws = raes.draw_targets(state, raes.collect_queue(state), rng)
    pairs = {(o, t) for o, _, t in draws.as_list()}
    assert pairs == {(1, 2), (2, 1)}


def test_draw_uniformity_chi_square():
    n = 64
    state = GraphState(n, 2, 4)
    raes.run_rounds(state, 2 * n, make_rng(1))
    owner = state.live_vertices[10]
    N = 10**6
    q = raes.Queue(np.full(N, owner, dtype=np.int64), np.zeros(N, dtype=np.int64))
    draws = raes.draw_targets(state, q, make_rng(2))
    counts = np.bincount(draws.target - state.oldest, minlength=n)
    assert counts[owner - state.oldest] == 0
    others = np.delete(counts, owner - state.oldest)
    p = 1 / (n - 1)
    mu, sigma = N * p, math.sqrt(N * p * (1 - p))
    assert np.all(np.abs(others - mu) <= 4 * sigma)
    chi2 = float(((others - mu) ** 2 / mu).sum())
    # 62 degrees of freedom; mean 62, sd ~11.1
    assert chi2 < 62 + 4 * math.sqrt(2 * 62)


def test_small_run_claims():
    n, d, c = 8, 2, 4
    state = GraphState(n, d, c)
    for rep in raes.run_rounds(state, 2 * n, make_rng(3)):
        if rep.live_count >= 2:
            assert rep.accepted + rep.rejected == rep.queue_size_before
        assert rep.full_node_count <= n / c
        assert rep.message_count == 2 * rep.queue_size_before


def test_degree_bound_every_round():
    n, d, c = 16, 3, 4
    state = GraphState(n, d, c)
    rng = make_rng(4)
    for t in range(1, 10 * n + 1):
        raes.step(state, t, rng)
        deg = state.in_degree + state.out_degree
        assert deg[state.alive].max() <= (c + 1) * d
        check_invariants(state)


def test_same_seed_same_reports():
    a = raes.run_rounds(GraphState(16, 3, 4), 100, make_rng(8))
    b = raes.run_rounds(GraphState(16, 3, 4), 100, make_rng(8))
    assert a == b


def test_queue_below_ceiling_long_run():
    n, d, c = 64, 4, 8
    state = GraphState(n, d, c)
    reps = raes.run_rounds(state, 10 * n, make_rng(5))
    qmax = max(r.queue_size_before for r in reps[2 * n - 1:])
    assert qmax <= 100 * (c * d) ** 2 * math.log(n)


@pytest.fixture(scope="module")
def logged_run():
    n, d, c = 24, 3, 3
    state = GraphState(n, d, c)
    log = []
    reps = raes.run_rounds(state, 8 * n, make_rng(11), log=log)
    return n, d, c, reps, log


def test_log_accepted_matches_reports(logged_run):
    _, _, _, reps, log = logged_run
    assert sum(len(e["accepted"]) for e in log) == sum(r.accepted for r in reps)
    assert [len(e["queue"]) for e in log] == [r.queue_size_before for r in reps]


def test_queue_counting_rule(logged_run):
    # no rejections last round: the queue is the newcomer's d plus what the departure freed
    n, d, _, reps, log = logged_run
    hits = 0
    for prev, cur in zip(log[2 * n:], log[2 * n + 1:]):
        if not prev["rejected"]:
            assert len(cur["queue"]) == d + len(cur["freed"])
            hits += 1
    assert hits > 0


def test_connected_request_only_changes_on_departure(logged_run):
    n, d, _, _, log = logged_run
    target = {}
    for e in log:
        for o, i in e["freed"]:
            assert (o, i) in target
            assert target.pop((o, i)) == e["departed"]
        for o, i, _ in e["destroyed"]:
            target.pop((o, i), None)
        for o, i in e["queue"]:
            assert (o, i) not in target
        for o, i, t in e["accepted"]:
            target[(o, i)] = t
    assert target


def test_link_manager_calls_match_pending_rounds():
    n, d, c = 24, 3, 3
    state = GraphState(n, d, c)
    log = []
    reps = raes.run_rounds(state, 6 * n, make_rng(12), log=log)
    live = {e["round"]: r.live_count for e, r in zip(log, reps)}
    pend = {}
    calls = {}
    for e in log:
        for o, i in e["queue"]:
            pend[(o, i)] = pend.get((o, i), 0) + 1
            if live[e["round"]] >= 2:
                calls[(o, i)] = calls.get((o, i), 0) + 1
    retired = [h for r in reps for h in r.retired]
    assert retired
    for h in retired:
        assert h.pending_rounds == pend.get((h.owner, h.index), 0)
        assert h.link_manager_calls == calls.get((h.owner, h.index), 0)
