"""Shared domain types for the threshold-driven streaming graph TSG(n, d, c).

A vertex is identified by the round it joined (its birth round).  Exactly one
vertex joins per round, so the identity is collision free and sorts by age.

Graph state is stored in ring buffers of ``n + 1`` slots indexed by
``birth % (n + 1)``.  At most ``n`` vertices are live, so the slot of the
vertex leaving at round ``t`` (born ``t - n``) never collides with the slot of
the vertex joining at ``t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

PENDING = -1
NO_REQUEST = -2


class InvariantError(AssertionError):
    """A structural invariant of the model was violated."""

    def __init__(self, invariant: str, detail: str = ""):
        self.invariant = invariant
        super().__init__(f"{invariant}: {detail}" if detail else invariant)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    n: int
    d: int
    c: int
    horizon: int
    master_seed: int = 0
    trial_count: int = 1
    protocol: str | None = None

    def __post_init__(self):
        for name in ("n", "d", "c", "horizon", "trial_count"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
                raise ConfigError(f"{name} must be an integer, got {value!r}")
        if self.n < 3:
            raise ConfigError(f"n must be >= 3, got {self.n}")
        if self.d < 1:
            raise ConfigError(f"d must be >= 1, got {self.d}")
        if self.c < 2:
            raise ConfigError(f"c must be >= 2, got {self.c}")
        if self.horizon < 1:
            raise ConfigError(f"horizon must be >= 1, got {self.horizon}")
        if self.trial_count < 1:
            raise ConfigError(f"trial_count must be >= 1, got {self.trial_count}")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError(f"master_seed must be a 64-bit unsigned integer, got {self.master_seed}")
        if self.protocol is not None and self.protocol not in ("push", "pull", "push-pull"):
            raise ConfigError(f"unknown protocol {self.protocol!r}")

    @property
    def cap(self) -> int:
        """In-degree threshold c*d."""
        return self.c * self.d

    @property
    def reaches_stable(self) -> bool:
        return self.horizon >= 2 * self.n

    def constant_warnings(self) -> list[str]:
        """Which of the analysis' standing assumptions this configuration misses.

        The asymptotic statements hold for c, d large and n large; these are
        reported, not enforced.
        """
        notes = []
        if not self.reaches_stable:
            notes.append(f"horizon {self.horizon} < 2n = {2 * self.n}: stable regime never reached")
        if self.c <= 4:
            notes.append(f"c = {self.c} <= 4: expected per-round acceptance bound |Q|(1 - 4/c) is vacuous")
        beta = 100 * (self.c * self.d) ** 2
        if 2 * beta * math.log(self.n) > self.n / 2000:
            notes.append(
                f"small-set range [2*beta*log n, n/2000] is empty for beta = 100(cd)^2 = {beta}"
            )
        if 100 * (self.c * self.d) ** 2 * math.log(self.n) >= self.n * self.d:
            notes.append("queue ceiling 100(cd)^2 log n exceeds n*d: queue bound is vacuous")
        return notes


class Request(NamedTuple):
    owner: int
    index: int
    target: int | None  # None while pending

    @property
    def pending(self) -> bool:
        return self.target is None


class RequestHistory(NamedTuple):
    """Lifetime counters of one request, captured when its owner departs."""

    owner: int
    index: int
    pending_rounds: int
    link_manager_calls: int
    targets: frozenset


@dataclass
class GraphState:
    n: int
    d: int
    c: int
    round: int = 0
    birth: np.ndarray = field(init=False, repr=False)
    alive: np.ndarray = field(init=False, repr=False)
    target: np.ndarray = field(init=False, repr=False)
    in_degree: np.ndarray = field(init=False, repr=False)
    out_degree: np.ndarray = field(init=False, repr=False)
    pending_rounds: np.ndarray = field(init=False, repr=False)
    calls: np.ndarray = field(init=False, repr=False)
    linked: dict = field(init=False, repr=False)
    retired: list = field(init=False, repr=False)

    def __post_init__(self):
        slots = self.n + 1
        self.birth = np.full(slots, -1, dtype=np.int64)
        self.alive = np.zeros(slots, dtype=bool)
        self.target = np.full((slots, self.d), NO_REQUEST, dtype=np.int64)
        self.in_degree = np.zeros(slots, dtype=np.int64)
        self.out_degree = np.zeros(slots, dtype=np.int64)
        self.pending_rounds = np.zeros((slots, self.d), dtype=np.int64)
        self.calls = np.zeros((slots, self.d), dtype=np.int64)
        # (owner, index) -> set of targets the request has been connected to
        self.linked = {}
        self.retired = []

    @classmethod
    def from_config(cls, config: SimConfig) -> GraphState:
        return cls(config.n, config.d, config.c)

    @property
    def cap(self) -> int:
        return self.c * self.d

    def slot(self, v) -> int:
        return v % (self.n + 1)

    @property
    def oldest(self) -> int:
        return max(1, self.round - self.n + 1)

    @property
    def live_count(self) -> int:
        return min(self.round, self.n)

    @property
    def live_vertices(self) -> list[int]:
        """Live vertex ids, oldest first."""
        if self.round == 0:
            return []
        return list(range(self.oldest, self.round + 1))

    def is_live(self, v: int) -> bool:
        return self.round >= 1 and self.oldest <= v <= self.round

    def age(self, v: int) -> int:
        return self.round - v

    def _check_live(self, v):
        if not self.is_live(v):
            raise KeyError(f"vertex {v} is not live at round {self.round}")

    def in_degree_of(self, v: int) -> int:
        self._check_live(v)
        return int(self.in_degree[self.slot(v)])

    def out_degree_of(self, v: int) -> int:
        self._check_live(v)
        return int(self.out_degree[self.slot(v)])

    def request(self, owner: int, index: int) -> Request:
        self._check_live(owner)
        t = int(self.target[self.slot(owner), index])
        return Request(owner, index, None if t < 0 else t)

    def requests(self) -> dict[tuple[int, int], Request]:
        return {
            (v, i): self.request(v, i) for v in self.live_vertices for i in range(self.d)
        }

    @property
    def full_count(self) -> int:
        return int(np.count_nonzero(self.alive & (self.in_degree == self.cap)))

    @property
    def edge_count(self) -> int:
        return int(self.out_degree.sum())

    @property
    def queue_size(self) -> int:
        return int(np.count_nonzero(self.target[self.alive] == PENDING))

    def copy(self) -> GraphState:
        other = GraphState(self.n, self.d, self.c, self.round)
        for name in ("birth", "alive", "target", "in_degree", "out_degree", "pending_rounds", "calls"):
            setattr(other, name, getattr(self, name).copy())
        other.linked = {k: set(v) for k, v in self.linked.items()}
        other.retired = list(self.retired)
        return other


@dataclass(frozen=True)
class RoundReport:
    round: int
    joined: int
    departed: int | None
    queue_size_before: int
    accepted: int
    rejected: int
    full_node_count: int
    message_count: int
    edge_count: int
    live_count: int
    retired: tuple = ()


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SnapshotExport:
    """Immutable copy of one round of the graph.

    ``births`` is ascending; ``edges`` rows are ``(owner, index, target)``
    sorted by ``(owner, index)``; ``pending`` rows are ``(owner, index)``.
    Parallel edges appear as separate rows with distinct request indices.
    """

    n: int
    d: int
    c: int
    round: int
    births: np.ndarray
    edges: np.ndarray
    pending: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "births", _readonly(np.asarray(self.births, dtype=np.int64).reshape(-1)))
        object.__setattr__(self, "edges", _readonly(np.asarray(self.edges, dtype=np.int64).reshape(-1, 3)))
        object.__setattr__(self, "pending", _readonly(np.asarray(self.pending, dtype=np.int64).reshape(-1, 2)))

    @property
    def vertices(self) -> list[tuple[int, int]]:
        return [(int(b), self.round - int(b)) for b in self.births]

    @property
    def ages(self) -> np.ndarray:
        return self.round - self.births

    def targets_of(self, owner: int, index: int) -> int | None:
        """X_t(r): the target of request (owner, index), None while pending."""
        hit = np.nonzero((self.edges[:, 0] == owner) & (self.edges[:, 1] == index))[0]
        return int(self.edges[hit[0], 2]) if len(hit) else None

    def __eq__(self, other):
        if not isinstance(other, SnapshotExport):
            return NotImplemented
        return (
            (self.n, self.d, self.c, self.round) == (other.n, other.d, other.c, other.round)
            and np.array_equal(self.births, other.births)
            and np.array_equal(self.edges, other.edges)
            and np.array_equal(self.pending, other.pending)
        )

    __hash__ = None


def check_caps(state: GraphState) -> None:
    """Cheap per-round checks: degree caps, full-node bound, edge bound."""
    if state.out_degree.max(initial=0) > state.d:
        raise InvariantError("out_degree <= d", f"round {state.round}")
    if state.in_degree.max(initial=0) > state.cap:
        raise InvariantError("in_degree <= c*d", f"round {state.round}")
    full = state.full_count
    if full * state.c > state.n:
        raise InvariantError("|B_t| <= n/c", f"round {state.round}: {full} full vertices")
    if state.edge_count > state.n * state.d:
        raise InvariantError("|E_t| <= n*d", f"round {state.round}")


def check_invariants(state: GraphState) -> None:
    """Full consistency audit of a state; raises InvariantError naming the failure."""
    t = state.round
    live = state.live_vertices
    if int(state.alive.sum()) != min(t, state.n):
        raise InvariantError("|V_t| = min(t, n)", f"{int(state.alive.sum())} live at round {t}")
    if live:
        slots = np.array(live) % (state.n + 1)
        if not state.alive[slots].all() or not np.array_equal(state.birth[slots], live):
            raise InvariantError("live slots hold births max(1, t-n+1)..t", f"round {t}")
        rows = state.target[slots]
        lo, hi = live[0], live[-1]
        connected = rows >= 0
        if np.any(rows[~connected] != PENDING):
            raise InvariantError("each live vertex owns exactly d requests", f"round {t}")
        tg = rows[connected]
        if np.any((tg < lo) | (tg > hi)):
            raise InvariantError("Connected(target) implies target live", f"round {t}")
        owners = np.broadcast_to(np.array(live)[:, None], rows.shape)[connected]
        if np.any(tg == owners):
            raise InvariantError("target != owner", f"round {t}")
        if not np.array_equal(state.out_degree[slots], connected.sum(axis=1)):
            raise InvariantError("out_degree equals connected request count", f"round {t}")
        indeg = np.bincount(tg - lo, minlength=hi - lo + 1)
        if not np.array_equal(state.in_degree[slots], indeg):
            raise InvariantError("in_degree equals count of requests targeting v", f"round {t}")
    dead = ~state.alive
    if np.any(state.in_degree[dead] != 0) or np.any(state.out_degree[dead] != 0):
        raise InvariantError("departed vertices carry no edges", f"round {t}")
    check_caps(state)


def freeze(state: GraphState) -> SnapshotExport:
    check_invariants(state)
    live = np.array(state.live_vertices, dtype=np.int64)
    if len(live):
        rows = state.target[live % (state.n + 1)]
        owners = np.repeat(live, state.d)
        index = np.tile(np.arange(state.d, dtype=np.int64), len(live))
        flat = rows.reshape(-1)
        conn = flat >= 0
        edges = np.column_stack([owners[conn], index[conn], flat[conn]])
        pending = np.column_stack([owners[~conn], index[~conn]])
    else:
        edges = np.zeros((0, 3), dtype=np.int64)
        pending = np.zeros((0, 2), dtype=np.int64)
    return SnapshotExport(state.n, state.d, state.c, state.round, live, edges, pending)
