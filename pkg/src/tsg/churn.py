"""Streaming node churn: one vertex joins per round, the vertex of age n leaves."""

from __future__ import annotations

from typing import NamedTuple

from .model import NO_REQUEST, GraphState, InvariantError


class ChurnEvent(NamedTuple):
    round: int
    joined: int
    departed: int | None


def is_stable(round: int, n: int) -> bool:
    return round >= 2 * n


def advance(state: GraphState, round: int) -> ChurnEvent:
    """Apply the churn rules for ``round``.

    The departing vertex is only marked dead here; its edges and requests are
    left in place for :func:`tsg.raes.cleanup_departure`.  The joining vertex
    is registered without requests.
    """
    if state.round != round - 1:
        raise InvariantError("rounds advance in order", f"state at {state.round}, asked for {round}")
    departed = None
    if round >= state.n + 1:
        departed = round - state.n
        state.alive[state.slot(departed)] = False
    s = state.slot(round)
    if state.alive[s]:
        raise InvariantError("joining slot is free", f"slot {s} still live at round {round}")
    state.birth[s] = round
    state.alive[s] = True
    state.target[s] = NO_REQUEST
    state.in_degree[s] = 0
    state.out_degree[s] = 0
    state.pending_rounds[s] = 0
    state.calls[s] = 0
    state.round = round
    return ChurnEvent(round, round, departed)
