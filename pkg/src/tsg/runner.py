"""Trial orchestration and artifact writing for the command line."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__, churn, raes, rumor
from .io import dumps_snapshot, events_jsonl, metrics_csv, report_row
from .metrics import (
    MetricsSeries,
    fitted_decay_rate,
    lemma14_mean_ceiling,
    record_retired,
    record_round,
)
from .model import GraphState, SimConfig, freeze
from .rng import GENERATOR_NAME, GENERATOR_VERSION, trial_rng, trial_seed

logger = logging.getLogger(__name__)


@dataclass
class TrialResult:
    trial: int
    seed: int
    summary: dict
    files: dict = field(default_factory=dict)  # relative name -> text
    error: str | None = None


def queue_ceiling(n: int, d: int, c: int) -> float:
    return 100 * (c * d) ** 2 * math.log(n)


def simulate(config: SimConfig, rng, snapshot_rounds=(), event_log: bool = False):
    """Run one trial for ``config.horizon`` rounds.

    Returns the metrics series, the reports, the event log (or None) and the
    requested snapshots.
    """
    state = GraphState.from_config(config)
    series = MetricsSeries()
    reports = []
    log = [] if event_log else None
    snaps = {}
    wanted = set(snapshot_rounds)
    for t in range(1, config.horizon + 1):
        rep = raes.step(state, t, rng, log=log)
        record_round(series, rep)
        record_retired(series, rep, min_birth=config.n + 1)
        reports.append(rep)
        if t in wanted:
            snaps[t] = freeze(state)
    return series, reports, log, snaps


def summarize(config: SimConfig, series: MetricsSeries) -> dict:
    n, d, c = config.n, config.d, config.c
    q = np.array(series.queue_size)
    out = {
        "rounds": series.rounds,
        "max_queue": int(q.max()) if len(q) else 0,
        "max_full_nodes": int(max(series.full_nodes, default=0)),
        "full_node_bound": n / c,
        "max_edges": int(max(series.edges, default=0)),
        "total_messages": int(sum(series.messages)),
        "constant_warnings": config.constant_warnings(),
    }
    if config.reaches_stable:
        s = q[2 * n - 1 :]
        p = series.pending_rounds()
        out["stable"] = {
            "first_round": 2 * n,
            "max_queue": int(s.max()),
            "mean_queue": float(s.mean()),
            "queue_ceiling": queue_ceiling(n, d, c),
            "completed_lifetimes": int(len(p)),
            "mean_pending_rounds": float(p.mean()) if len(p) else None,
            "max_pending_rounds": int(p.max()) if len(p) else None,
            "pending_mean_ceiling": lemma14_mean_ceiling(),
            "fitted_pending_decay": fitted_decay_rate(p) if len(p) > 1 else None,
        }
    else:
        out["stable"] = None
        out["stable_absent_reason"] = f"horizon {config.horizon} < 2n = {2 * n}"
    return out


def run_trial(config: SimConfig, trial: int, snapshot_rounds=(), event_log: bool = False) -> TrialResult:
    seed = trial_seed(config.master_seed, trial)
    try:
        series, reports, log, snaps = simulate(config, trial_rng(config.master_seed, trial), snapshot_rounds, event_log)
    except Exception as exc:  # reported per trial, the run continues
        logger.exception("trial %d failed", trial)
        return TrialResult(trial, seed, {}, error=f"{type(exc).__name__}: {exc}")
    files = {f"trial_{trial:03d}_metrics.csv": metrics_csv(report_row(r) for r in reports)}
    if log is not None:
        files[f"trial_{trial:03d}_events.jsonl"] = events_jsonl(log)
    for t, snap in sorted(snaps.items()):
        files[f"trial_{trial:03d}_round_{t}.tsg"] = dumps_snapshot(snap)
    return TrialResult(trial, seed, summarize(config, series), files)


def _run_trial_args(args):
    return run_trial(*args)


def run_trials(config: SimConfig, snapshot_rounds=(), event_log=False, workers: int = 1) -> list[TrialResult]:
    jobs = [(config, i, tuple(snapshot_rounds), event_log) for i in range(config.trial_count)]
    if workers <= 1:
        return [_run_trial_args(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_trial_args, jobs))


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def write_outputs(out_dir: str, files: dict, extra: dict) -> dict:
    """Write text files and JSON documents; return {relative name: sha256}."""
    os.makedirs(out_dir, exist_ok=True)
    inventory = {}
    for name, text in files.items():
        with open(os.path.join(out_dir, name), "w", newline="\n") as f:
            f.write(text)
        inventory[name] = sha256_text(text)
    for name, obj in extra.items():
        text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
        with open(os.path.join(out_dir, name), "w", newline="\n") as f:
            f.write(text)
        inventory[name] = sha256_text(text)
    return inventory


def write_manifest(out_dir: str, config: SimConfig, results, inventory: dict, started: float, command: str) -> dict:
    manifest = {
        "command": command,
        "config": asdict(config),
        "engine_version": __version__,
        "generator": {"name": GENERATOR_NAME, "version": GENERATOR_VERSION},
        "seed_derivation": "splitmix64(master_seed ^ ((i + 1) * 0x9E3779B97F4A7C15 mod 2**64))",
        "master_seed": config.master_seed,
        "trial_seeds": [r.seed for r in results],
        "wall_clock": {"started": started, "elapsed_seconds": time.time() - started},
        "outputs": dict(sorted(inventory.items())),
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", newline="\n") as f:
        f.write(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def spread_trial(config: SimConfig, trial: int, protocol: str, t_s: int, gap: int, cap=None, extra_rounds=0):
    """One rumor trial; returns (summary, metrics rows, latency rows)."""
    rng = trial_rng(config.master_seed, trial)
    res = rumor.run_spread(config, protocol, t_s, gap, rng, cap=cap, extra_rounds=extra_rounds)
    informed = dict(res.trace)
    rows = [report_row(r, informed.get(r.round)) for r in res.reports]
    lat_rows = []
    if res.complete and extra_rounds:
        end = res.trace[-1][0]
        table = rumor.late_joiner_latency(res.state, res.saturation_round, end)
        lat_rows = [(trial, v, lat, 0) for v, lat in sorted(table.latencies.items())]
        lat_rows += [(trial, v, "", 1) for v in table.censored]
        lat_rows.sort(key=lambda r: r[1])
    summary = {
        "trial": trial,
        "seed": trial_seed(config.master_seed, trial),
        "protocol": protocol,
        "t_s": t_s,
        "T": res.rounds,
        "complete": res.complete,
        "target": res.target,
        "final_informed": res.trace[-1][1] if res.trace else 1,
        "saturation_round": res.saturation_round,
        "stable": churn.is_stable(t_s, config.n),
    }
    return summary, rows, lat_rows
