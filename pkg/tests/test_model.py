import numpy as np
import pytest

from tsg import raes
from tsg.io import dumps_snapshot, loads_snapshot
from tsg.model import ConfigError, GraphState, InvariantError, SimConfig, check_invariants, freeze


def test_config_floors():
    SimConfig(3, 1, 2, horizon=10)
    for bad in [dict(n=2), dict(d=0), dict(c=1), dict(horizon=0)]:
        kw = dict(n=8, d=2, c=2, horizon=10) | bad
        with pytest.raises(ConfigError):
            SimConfig(**kw)
    with pytest.raises(ConfigError):
        SimConfig(8, 2, 2, horizon=10, master_seed=2**64)
    with pytest.raises(ConfigError):
        SimConfig(8, 2, 2, horizon=10, protocol="gossip")


def test_config_stable_flag():
    assert not SimConfig(8, 2, 2, horizon=15).reaches_stable
    assert SimConfig(8, 2, 2, horizon=16).reaches_stable


def test_freeze_empty():
    snap = freeze(GraphState(8, 2, 4))
    assert snap.round == 0
    assert len(snap.births) == len(snap.edges) == len(snap.pending) == 0


def test_freeze_single_vertex(rng):
    state = GraphState(8, 3, 4)
    raes.step(state, 1, rng)
    snap = freeze(state)
    assert snap.births.tolist() == [1]
    assert len(snap.edges) == 0
    assert snap.pending.tolist() == [[1, 0], [1, 1], [1, 2]]


def test_freeze_stable_roundtrip(rng):
    state = GraphState(16, 3, 4)
    raes.run_rounds(state, 32, rng)
    snap = freeze(state)
    assert len(snap.births) == 16
    assert len(snap.edges) == int(state.out_degree[state.alive].sum())
    assert loads_snapshot(dumps_snapshot(snap)) == snap


def test_snapshot_is_immutable(stable_state):
    snap = freeze(stable_state)
    with pytest.raises(ValueError):
        snap.edges[0, 0] = 0
    stable_state_copy = stable_state.copy()
    raes.step(stable_state_copy, stable_state.round + 1, np.random.default_rng(0))
    assert freeze(stable_state) == snap


def test_copy_is_independent(stable_state):
    other = stable_state.copy()
    other.in_degree[:] = 0
    assert stable_state.in_degree.sum() > 0


def test_invariants_detect_corruption(stable_state):
    state = stable_state.copy()
    check_invariants(state)
    s = next(i for i in range(state.n + 1) if state.alive[i] and state.in_degree[i] > 0)
    state.in_degree[s] += 1
    with pytest.raises(InvariantError):
        check_invariants(state)


def test_requests_view(stable_state):
    reqs = stable_state.requests()
    assert len(reqs) == stable_state.d * stable_state.live_count
    connected = sum(r.target is not None for r in reqs.values())
    assert connected == stable_state.edge_count
