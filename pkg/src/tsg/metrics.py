"""Per-round and per-lifetime observables of a TSG run."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

from .model import InvariantError, RequestHistory, RoundReport, SnapshotExport


class LifetimeRecord(NamedTuple):
    owner: int
    index: int
    pending_rounds: int
    link_manager_calls: int
    distinct_targets: int


@dataclass
class MetricsSeries:
    queue_size: list = field(default_factory=list)
    accepted: list = field(default_factory=list)
    rejected: list = field(default_factory=list)
    full_nodes: list = field(default_factory=list)
    messages: list = field(default_factory=list)
    edges: list = field(default_factory=list)
    accept_rate: list = field(default_factory=list)
    live: list = field(default_factory=list)
    lifetimes: list = field(default_factory=list)
    # birth -> round informed; filled by the rumor engine
    informed_at: dict = field(default_factory=dict)
    informed: dict = field(default_factory=dict)

    @property
    def rounds(self) -> int:
        return len(self.queue_size)

    def pending_rounds(self) -> np.ndarray:
        return np.array([r.pending_rounds for r in self.lifetimes], dtype=np.int64)


def record_round(series: MetricsSeries, report: RoundReport) -> MetricsSeries:
    if report.round != series.rounds + 1:
        raise InvariantError("reports arrive in round order", f"expected {series.rounds + 1}, got {report.round}")
    q = report.queue_size_before
    series.queue_size.append(q)
    series.accepted.append(report.accepted)
    series.rejected.append(report.rejected)
    series.full_nodes.append(report.full_node_count)
    series.messages.append(report.message_count)
    series.edges.append(report.edge_count)
    series.live.append(report.live_count)
    series.accept_rate.append(report.accepted / q if q and report.live_count >= 2 else float("nan"))
    return series


def finalize_lifetime(series: MetricsSeries, request, history: RequestHistory) -> LifetimeRecord:
    owner, index = request
    if (history.owner, history.index) != (owner, index):
        raise ValueError(f"history belongs to {(history.owner, history.index)}, not {(owner, index)}")
    record = LifetimeRecord(owner, index, history.pending_rounds, history.link_manager_calls, len(history.targets))
    series.lifetimes.append(record)
    return record


def record_retired(series: MetricsSeries, report: RoundReport, min_birth: int = 1) -> None:
    """Finalize lifetimes of requests whose owner departed this round.

    Only owners born at or after ``min_birth`` are kept, so callers can restrict
    the sample to vertices that joined a full population.
    """
    for h in report.retired:
        if h.owner >= min_birth:
            finalize_lifetime(series, (h.owner, h.index), h)


def _at_least(series_or_counts) -> np.ndarray:
    if isinstance(series_or_counts, MetricsSeries):
        p = series_or_counts.pending_rounds()
    else:
        p = np.asarray(series_or_counts, dtype=np.int64)
    if len(p) == 0:
        raise ValueError("no completed lifetimes")
    hist = np.bincount(p)
    # at_least[j] = #{r : P(r) >= j}, padded so the tail ends at zero
    return np.append(np.cumsum(hist[::-1])[::-1], 0)


def pending_tail(series_or_counts) -> dict[int, float]:
    """Empirical Pr[P(r) >= j] for j = 1 .. max observed + 1."""
    at_least = _at_least(series_or_counts)
    return {j: float(at_least[j] / at_least[0]) for j in range(1, len(at_least))}


def pending_tail_counts(series_or_counts) -> dict[int, int]:
    """Number of lifetimes with P(r) >= j."""
    at_least = _at_least(series_or_counts)
    return {j: int(at_least[j]) for j in range(1, len(at_least))}


def lemma14_ceiling(j: int) -> float:
    return min(1.0, 2.0 * math.exp(-j / 24.0))


def lemma14_mean_ceiling() -> float:
    """sum_{j >= 1} 2 e^{-j/24}, the mean implied by the tail ceiling."""
    r = math.exp(-1 / 24)
    return 2 * r / (1 - r)


def fitted_decay_rate(series_or_counts) -> float:
    """Least-squares slope of -log Pr[P(r) >= j] against j (reported only)."""
    tail = pending_tail(series_or_counts)
    js = np.array([j for j, v in tail.items() if v > 0], dtype=float)
    vs = np.array([tail[int(j)] for j in js])
    if len(js) < 2:
        return float("inf")
    slope = np.polyfit(js, np.log(vs), 1)[0]
    return float(-slope)


class AuditRow(NamedTuple):
    probe_size: int
    request_count: int
    hits: int
    trials: int
    frequency: float
    ceiling: float
    within_ceiling: bool
    low_confidence: bool


def destination_ceiling(probe_size: int, request_count: int, n: int) -> float:
    return (220 * probe_size / (n - 1)) ** request_count


def destination_audit(
    snapshots: Iterable[SnapshotExport],
    probe_sets: list,
    request_sets: list,
    min_trials: int = 100,
) -> list[AuditRow]:
    """Empirical Pr[X_t(r) in P for all r in R] across independent trials.

    ``probe_sets`` are vertex-id collections, ``request_sets`` are lists of
    ``(owner, index)``.  Every snapshot must be from the same stable round so
    that vertex ids line up across trials.
    """
    probes = [np.asarray(sorted(p), dtype=np.int64) for p in probe_sets]
    hits = np.zeros((len(probes), len(request_sets)), dtype=np.int64)
    trials = 0
    n = None
    round_ = None
    for snap in snapshots:
        if round_ is None:
            round_, n = snap.round, snap.n
            if round_ < 2 * n:
                raise ValueError(f"audit snapshots must be stable (round {round_} < 2n)")
        elif snap.round != round_:
            raise ValueError("audit snapshots must share one round")
        trials += 1
        dest = {}
        for R in request_sets:
            for r in R:
                if r not in dest:
                    dest[r] = snap.targets_of(*r)
        for pi, p in enumerate(probes):
            for ri, R in enumerate(request_sets):
                if all(dest[r] is not None and np.any(p == dest[r]) for r in R):
                    hits[pi, ri] += 1
    if trials == 0:
        raise ValueError("no snapshots")
    return _audit_rows(hits, trials, probes, request_sets, n, min_trials)


def destination_audit_arrays(destinations: dict, probe_sets: list, request_sets: list, n: int, min_trials: int = 100):
    """Same table as :func:`destination_audit` from per-trial destination arrays.

    ``destinations[r]`` holds X_t(r) for every trial (-1 when pending).
    """
    probes = [np.asarray(sorted(p), dtype=np.int64) for p in probe_sets]
    trials = len(next(iter(destinations.values())))
    hits = np.zeros((len(probes), len(request_sets)), dtype=np.int64)
    for pi, p in enumerate(probes):
        for ri, R in enumerate(request_sets):
            inside = np.ones(trials, dtype=bool)
            for r in R:
                inside &= np.isin(destinations[r], p)
            hits[pi, ri] = int(inside.sum())
    return _audit_rows(hits, trials, probes, request_sets, n, min_trials)


def _audit_rows(hits, trials, probes, request_sets, n, min_trials):
    rows = []
    for pi, p in enumerate(probes):
        for ri, R in enumerate(request_sets):
            freq = hits[pi, ri] / trials
            ceil = destination_ceiling(len(p), len(R), n)
            rows.append(
                AuditRow(len(p), len(R), int(hits[pi, ri]), trials, freq, ceil, freq <= ceil, trials < min_trials)
            )
    return rows
