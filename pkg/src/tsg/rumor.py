"""Push, pull and push-pull rumor spreading over the evolving TSG.

Each round has a topology phase (one :func:`tsg.raes.step`) followed by a
spreading phase on the resulting snapshot.  Spreading is synchronous: all
choices read the informed set as of the start of the phase and updates land
at its end.  Neighbors are chosen uniformly over incident edges, so a
parallel edge doubles the odds of its endpoint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import raes
from .model import GraphState, SimConfig, SnapshotExport, freeze

PROTOCOLS = ("push", "pull", "push-pull")


class SpreadError(ValueError):
    pass


@dataclass
class SpreadState:
    protocol: str
    n: int
    source: int | None = None
    source_round: int | None = None
    informed: set = field(default_factory=set)
    informed_at: dict = field(default_factory=dict)
    # (round, informer, informee, "push" | "pull")
    events: list = field(default_factory=list)
    record_events: bool = False

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise SpreadError(f"unknown protocol {self.protocol!r}; expected one of {PROTOCOLS}")

    def purge(self, live_oldest: int) -> None:
        """Drop departed vertices (births below ``live_oldest``)."""
        gone = [v for v in self.informed if v < live_oldest]
        for v in gone:
            self.informed.discard(v)


def inject_source(state: SpreadState, t_s: int) -> SpreadState:
    if state.source is not None:
        raise SpreadError("a source was already injected")
    if t_s < 2 * state.n:
        raise SpreadError(f"source round {t_s} precedes the stable regime (2n = {2 * state.n})")
    state.source = t_s
    state.source_round = t_s
    state.informed = {t_s}
    state.informed_at = {t_s: t_s}
    return state


class Incidence(NamedTuple):
    vertices: np.ndarray
    offsets: np.ndarray
    neighbors: np.ndarray

    @property
    def degree(self) -> np.ndarray:
        return np.diff(self.offsets)


def incidence(snapshot: SnapshotExport) -> Incidence:
    """CSR incidence lists; each edge appears once per endpoint."""
    births = snapshot.births
    a = np.searchsorted(births, snapshot.edges[:, 0])
    b = np.searchsorted(births, snapshot.edges[:, 2])
    src = np.concatenate([a, b])
    dst = np.concatenate([b, a])
    order = np.argsort(src, kind="stable")
    counts = np.bincount(src, minlength=len(births))
    offsets = np.concatenate([[0], np.cumsum(counts)])
    return Incidence(births, offsets, dst[order])


def _pick(inc: Incidence, who: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    deg = inc.degree[who]
    k = np.floor(rng.random(len(who)) * deg).astype(np.int64)
    return inc.neighbors[inc.offsets[who] + k]


def spread_round(state: SpreadState, snapshot: SnapshotExport, rng: np.random.Generator) -> SpreadState:
    """One synchronous spreading phase on ``snapshot``."""
    t = snapshot.round
    inc = incidence(snapshot)
    births = inc.vertices
    informed = np.fromiter((int(b) in state.informed for b in births), dtype=bool, count=len(births))
    has_edge = inc.degree > 0
    newly = {}
    if state.protocol in ("push", "push-pull"):
        who = np.nonzero(informed & has_edge)[0]
        if len(who):
            got = _pick(inc, who, rng)
            for src, dst in zip(births[who].tolist(), births[got].tolist()):
                if dst not in state.informed and dst not in newly:
                    newly[dst] = (src, "push")
    if state.protocol in ("pull", "push-pull"):
        who = np.nonzero(~informed & has_edge)[0]
        if len(who):
            got = _pick(inc, who, rng)
            hit = informed[got]
            for dst, src in zip(births[who[hit]].tolist(), births[got[hit]].tolist()):
                if dst not in newly:
                    newly[dst] = (src, "pull")
    for v, (src, kind) in newly.items():
        state.informed.add(v)
        state.informed_at[v] = t
        if state.record_events:
            state.events.append((t, src, v, kind))
    return state


class SpreadResult(NamedTuple):
    rounds: int  # T: spreading rounds until the target was met
    complete: bool
    target: int
    trace: list  # (round, informed count) for t_s .. end
    state: SpreadState
    saturation_round: int | None
    reports: list


def target_count(n: int, gap: int) -> int:
    return n - gap * math.ceil(math.log(n))


def default_cap(n: int) -> int:
    return 50 * math.ceil(math.log(n))


def warm_up(config: SimConfig, t_s: int, rng: np.random.Generator) -> tuple[GraphState, list]:
    """Run topology rounds 1 .. t_s - 1."""
    state = GraphState.from_config(config)
    reports = [raes.step(state, t, rng) for t in range(1, t_s)]
    return state, reports


def run_spread(
    config: SimConfig,
    protocol: str,
    t_s: int,
    gap: int,
    rng: np.random.Generator,
    cap: int | None = None,
    extra_rounds: int = 0,
    warm: GraphState | None = None,
    record_events: bool = False,
    log: list | None = None,
) -> SpreadResult:
    """Inject a source at ``t_s`` and spread until n - gap*ceil(log n) are informed.

    T counts spreading phases until the informed count first meets the target
    (0 if the lone source already does).  ``warm`` is an optional state
    already advanced to ``t_s - 1``; it is mutated.  After saturation the run
    continues for ``extra_rounds`` rounds so late joiners can be measured.
    """
    n = config.n
    if t_s < 2 * n:
        raise SpreadError(f"source round {t_s} precedes the stable regime (2n = {2 * n})")
    cap = default_cap(n) if cap is None else cap
    target = target_count(n, gap)
    if warm is None:
        state, reports = warm_up(config, t_s, rng)
    else:
        state, reports = warm, []
        if state.round != t_s - 1:
            raise SpreadError(f"warm state at round {state.round}, expected {t_s - 1}")
    spread = SpreadState(protocol, n, record_events=record_events)

    def topology(t):
        reports.append(raes.step(state, t, rng, log=log))
        if t == t_s:
            inject_source(spread, t_s)
        spread.purge(state.oldest)
        return freeze(state)

    return _drive(spread, topology, t_s, target, cap, extra_rounds, rng, reports)


def spread_static(
    snapshot: SnapshotExport,
    protocol: str,
    source: int,
    target: int,
    rng: np.random.Generator,
    cap: int = 1000,
) -> SpreadResult:
    """Spread on a fixed graph (no churn); a calibration hook."""
    if source not in set(snapshot.births.tolist()):
        raise SpreadError("source must be a vertex of the static graph")
    spread = SpreadState(protocol, snapshot.n)
    spread.source, spread.source_round = source, snapshot.round
    spread.informed, spread.informed_at = {source}, {source: snapshot.round}

    def topology(t):
        return SnapshotExport(snapshot.n, snapshot.d, snapshot.c, t, snapshot.births, snapshot.edges, snapshot.pending)

    return _drive(spread, topology, snapshot.round, target, cap, 0, rng, [])


def _drive(spread, topology, t_s, target, cap, extra_rounds, rng, reports) -> SpreadResult:
    trace = []
    t = t_s
    snap = topology(t)
    rounds = 0
    saturation = t_s if len(spread.informed) >= target else None
    while saturation is None and rounds < cap:
        spread_round(spread, snap, rng)
        rounds += 1
        trace.append((t, len(spread.informed)))
        if len(spread.informed) >= target:
            saturation = t
        else:
            t += 1
            snap = topology(t)
    complete = saturation is not None
    if complete:
        for k in range(extra_rounds):
            if k or rounds:
                t += 1
                snap = topology(t)
            spread_round(spread, snap, rng)
            trace.append((t, len(spread.informed)))
    return SpreadResult(rounds, complete, target, trace, spread, saturation, reports)


class LatencyTable(NamedTuple):
    latencies: dict  # birth -> spreading rounds from birth until informed (1 = informed in its birth round)
    censored: list  # births never informed before departing or the run ended

    def median(self) -> float:
        vals = sorted(self.latencies.values())
        return float(np.median(vals)) if vals else float("nan")


def late_joiner_latency(state: SpreadState, saturation_round: int, end_round: int) -> LatencyTable:
    """Latency of every vertex born after saturation, up to ``end_round``."""
    lat, cens = {}, []
    for v in range(saturation_round + 1, end_round + 1):
        at = state.informed_at.get(v)
        if at is None:
            cens.append(v)
        else:
            lat[v] = at - v + 1
    return LatencyTable(lat, cens)
