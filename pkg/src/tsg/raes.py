"""One round of the RAES edge process on top of streaming churn.

Round order: churn, departure cleanup, newcomer requests, queue collection,
uniform target draws, batch threshold acceptance.
"""

from __future__ import annotations

import contextlib
from typing import NamedTuple

import numpy as np

from . import churn
from .model import (
    NO_REQUEST,
    PENDING,
    GraphState,
    InvariantError,
    RequestHistory,
    RoundReport,
    check_caps,
)

# Flipped only by the verify command's mutation check.
_strict_threshold = False


@contextlib.contextmanager
def inject_acceptance_fault():
    """Replace ``in_degree <= c*d - l`` by ``<`` while the context is active."""
    global _strict_threshold
    previous = _strict_threshold
    _strict_threshold = True
    try:
        yield
    finally:
        _strict_threshold = previous


class TargetDraw(NamedTuple):
    owner: int
    index: int
    target: int


class Queue(NamedTuple):
    owner: np.ndarray
    index: np.ndarray

    def __len__(self):
        return len(self.owner)

    def as_list(self) -> list[tuple[int, int]]:
        return list(zip(self.owner.tolist(), self.index.tolist()))


class DrawBatch(NamedTuple):
    owner: np.ndarray
    index: np.ndarray
    target: np.ndarray

    def __len__(self):
        return len(self.owner)

    def as_list(self) -> list[TargetDraw]:
        return [TargetDraw(*x) for x in zip(self.owner.tolist(), self.index.tolist(), self.target.tolist())]

    @classmethod
    def from_list(cls, draws) -> DrawBatch:
        arr = np.array([tuple(x) for x in draws], dtype=np.int64).reshape(-1, 3)
        return cls(arr[:, 0].copy(), arr[:, 1].copy(), arr[:, 2].copy())

    def select(self, mask) -> DrawBatch:
        return DrawBatch(self.owner[mask], self.index[mask], self.target[mask])


def _rows(owner, index, target=None):
    if target is None:
        return np.column_stack([owner, index]).tolist()
    return np.column_stack([owner, index, target]).tolist()


def cleanup_departure(state: GraphState, departed: int, log: dict | None = None) -> Queue:
    """Delete every edge incident to ``departed``; return the freed requests.

    Requests owned by ``departed`` are destroyed and their lifetime counters
    moved to ``state.retired``.  Live requests connected to ``departed`` go
    back to pending.
    """
    n1 = state.n + 1
    s = departed % n1
    if state.alive[s] and state.birth[s] == departed:
        raise InvariantError("departed vertex removed from live set", f"vertex {departed}")
    row = state.target[s]
    connected = row >= 0
    if connected.any():
        np.subtract.at(state.in_degree, row[connected] % n1, 1)
    for i in range(state.d):
        key = (departed, i)
        state.retired.append(
            RequestHistory(
                departed,
                i,
                int(state.pending_rounds[s, i]),
                int(state.calls[s, i]),
                frozenset(state.linked.pop(key, ())),
            )
        )
    if log is not None:
        log["destroyed"] = [[departed, i, int(t)] for i, t in enumerate(row.tolist())]
    state.target[s] = NO_REQUEST
    state.out_degree[s] = 0

    fs, fi = np.nonzero((state.target == departed) & state.alive[:, None])
    state.target[fs, fi] = PENDING
    np.subtract.at(state.out_degree, fs, 1)
    state.in_degree[s] = 0
    freed = _sorted_queue(state, fs, fi)
    if log is not None:
        log["freed"] = _rows(freed.owner, freed.index)
    return freed


def init_requests(state: GraphState, v: int) -> None:
    """The joining vertex starts with all d requests pending."""
    s = state.slot(v)
    state.target[s] = PENDING
    state.pending_rounds[s] = 0
    state.calls[s] = 0


def _sorted_queue(state, slots, index) -> Queue:
    owners = state.birth[slots]
    order = np.lexsort((index, owners))
    return Queue(owners[order], index[order].astype(np.int64))


def force_pending(state: GraphState, owners) -> int:
    """Test hook: disconnect every request of ``owners``; returns how many were cut.

    Used to inject adversarially large queues into a running state.
    """
    n1 = state.n + 1
    cut = 0
    for v in owners:
        s = state.slot(v)
        if not (state.alive[s] and state.birth[s] == v):
            raise InvariantError("forced owners must be live", f"vertex {v}")
        row = state.target[s]
        connected = row >= 0
        if connected.any():
            np.subtract.at(state.in_degree, row[connected] % n1, 1)
            cut += int(connected.sum())
        row[connected] = PENDING
        state.out_degree[s] = 0
    return cut


def collect_queue(state: GraphState) -> Queue:
    """All pending requests, ordered by (owner, index)."""
    qs, qi = np.nonzero((state.target == PENDING) & state.alive[:, None])
    return _sorted_queue(state, qs, qi)


def draw_targets(state: GraphState, queue: Queue, rng: np.random.Generator) -> DrawBatch:
    """Uniform target in V_t minus the owner for every queued request.

    Increments each drawn request's link-manager call counter.  With a single
    live vertex nothing is drawn.
    """
    m = state.live_count
    if m < 2 or len(queue) == 0:
        empty = np.zeros(0, dtype=np.int64)
        return DrawBatch(empty, empty, empty)
    k = rng.integers(0, m - 1, size=len(queue))
    target = state.oldest + k
    target += target >= queue.owner
    state.calls[queue.owner % (state.n + 1), queue.index] += 1
    return DrawBatch(queue.owner, queue.index, target)


def acceptance_mask(in_degree: np.ndarray, ell: np.ndarray, cap: int) -> np.ndarray:
    if _strict_threshold:
        return in_degree < cap - ell
    return in_degree <= cap - ell


def resolve_acceptances(state: GraphState, draws: DrawBatch) -> tuple[DrawBatch, DrawBatch]:
    """Batch threshold rule, decided simultaneously for every target.

    A target receiving ``l`` draws accepts all of them iff its in-degree
    (after departure cleanup, before this round's acceptances) is at most
    ``c*d - l``; otherwise it rejects all of them.
    """
    if len(draws) == 0:
        return draws, draws
    n1 = state.n + 1
    ts = draws.target % n1
    ell = np.bincount(ts, minlength=n1)
    ok = acceptance_mask(state.in_degree, ell, state.cap) & (ell > 0)
    acc = ok[ts]
    accepted, rejected = draws.select(acc), draws.select(~acc)
    if len(accepted):
        os_ = accepted.owner % n1
        state.target[os_, accepted.index] = accepted.target
        state.in_degree += np.where(ok, ell, 0)
        np.add.at(state.out_degree, os_, 1)
        linked = state.linked
        for o, i, t in zip(accepted.owner.tolist(), accepted.index.tolist(), accepted.target.tolist()):
            linked.setdefault((o, i), set()).add(t)
    return accepted, rejected


def step(
    state: GraphState,
    round: int,
    rng: np.random.Generator,
    log: list | None = None,
    check: bool = True,
) -> RoundReport:
    """Advance the whole process by one round and report what happened."""
    state.retired = []
    event = {"round": round} if log is not None else None
    ev = churn.advance(state, round)
    if ev.departed is not None:
        cleanup_departure(state, ev.departed, event)
    init_requests(state, ev.joined)
    queue = collect_queue(state)
    state.pending_rounds[queue.owner % (state.n + 1), queue.index] += 1
    draws = draw_targets(state, queue, rng)
    accepted, rejected = resolve_acceptances(state, draws)
    if check:
        check_caps(state)
    q = len(queue)
    report = RoundReport(
        round=round,
        joined=ev.joined,
        departed=ev.departed,
        queue_size_before=q,
        accepted=len(accepted),
        rejected=len(rejected),
        full_node_count=state.full_count,
        message_count=2 * q,
        edge_count=state.edge_count,
        live_count=state.live_count,
        retired=tuple(state.retired),
    )
    if event is not None:
        event["joined"] = ev.joined
        event["departed"] = ev.departed
        event.setdefault("destroyed", [])
        event.setdefault("freed", [])
        event["queue"] = _rows(queue.owner, queue.index)
        event["accepted"] = _rows(accepted.owner, accepted.index, accepted.target)
        event["rejected"] = _rows(rejected.owner, rejected.index, rejected.target)
        log.append(event)
    return report


def run_rounds(state: GraphState, rounds: int, rng: np.random.Generator, **kwargs) -> list[RoundReport]:
    return [step(state, state.round + 1, rng, **kwargs) for _ in range(rounds)]
