"""Built-in oracle differential suite and invariant battery."""

from __future__ import annotations

import contextlib
import itertools
import math

import numpy as np

from . import raes
from .batch import BatchState
from .expansion import (
    UndirectedView,
    conductance,
    is_connected,
    min_conductance_exact,
    spectral_gap,
)
from .io import dumps_snapshot, loads_snapshot
from .model import GraphState, check_invariants, freeze
from .oracle import (
    brute_force_min_conductance,
    dense_lambda2,
    digest,
    reference_round_step,
    subset_conductance,
    verdict,
)
from .rng import make_rng, trial_rng

VERIFY_SEED = 20240611


def random_state(rng: np.random.Generator, n_range=(3, 32), d_range=(1, 3), c_range=(2, 3), stable=False):
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    d = int(rng.integers(d_range[0], d_range[1] + 1))
    c = int(rng.integers(c_range[0], c_range[1] + 1))
    state = GraphState(n, d, c)
    lo = 2 * n if stable else 1
    rounds = int(rng.integers(lo, 3 * n + 1))
    raes.run_rounds(state, rounds, rng)
    return state


def skewed_draws(state: GraphState, rng: np.random.Generator) -> raes.DrawBatch:
    """Draws for the current queue, concentrated on a few hot targets."""
    queue = raes.collect_queue(state)
    live = np.array(state.live_vertices)
    hot = rng.choice(live, size=min(len(live), int(rng.integers(1, 4))), replace=False)
    targets = []
    for o in queue.owner.tolist():
        pool = hot if rng.random() < 0.7 else live
        choices = pool[pool != o]
        if len(choices) == 0:
            choices = live[live != o]
        targets.append(int(rng.choice(choices)))
    return raes.DrawBatch(queue.owner, queue.index, np.array(targets, dtype=np.int64))


def acceptance_differential(batches: int, seed: int = VERIFY_SEED, max_n: int = 32, per_state: int = 1):
    """Fast vs reference partitions over random batches; returns (fast, oracle, mismatches).

    With ``per_state`` > 1 each random state yields that many batches, one per
    round as the state keeps running.
    """
    rng = make_rng(seed)
    fast_parts, ref_parts, mismatches = [], [], []
    done = 0
    while done < batches:
        state = random_state(rng, n_range=(3, max_n))
        for k in range(per_state):
            if k:
                raes.step(state, state.round + 1, rng)
            if done == batches or state.live_count < 2:
                continue
            draws = skewed_draws(state, rng)
            if len(draws) == 0:
                continue
            ref = reference_round_step(state, draws.as_list())
            acc, rej = raes.resolve_acceptances(state.copy(), draws)
            fast = ([tuple(x) for x in acc.as_list()], [tuple(x) for x in rej.as_list()])
            ref = ([tuple(x) for x in ref[0]], [tuple(x) for x in ref[1]])
            if fast != ref:
                mismatches.append(done)
            fast_parts.append(fast)
            ref_parts.append(ref)
            done += 1
    return fast_parts, ref_parts, mismatches


def small_snapshots(count: int, seed: int, max_n: int = 12):
    rng = make_rng(seed)
    out = []
    while len(out) < count:
        state = random_state(rng, n_range=(3, max_n), d_range=(1, 3), c_range=(2, 4), stable=True)
        out.append(freeze(state))
    return out


def _check(name, inputs, fast, oracle, tolerance=0.0):
    return verdict(name, inputs, fast, oracle, tolerance)


def run_verification(fault: bool = False, seed: int = VERIFY_SEED) -> list:
    """Run every check; returns OracleVerdicts in a fixed order."""
    ctx = raes.inject_acceptance_fault() if fault else contextlib.nullcontext()
    with ctx:
        return _battery(seed)


def _battery(seed: int) -> list:
    verdicts = []

    fast, ref, bad = acceptance_differential(500, seed)
    verdicts.append(_check("resolve_acceptances", {"seed": seed, "batches": 500}, digest(fast), digest(ref)))

    snaps = small_snapshots(20, seed + 1, max_n=10)
    phi_fast, phi_ref, cond_bad, argmin_bad = [], [], 0, 0
    lam_fast, lam_ref, sandwich_bad = [], [], 0
    for snap in snaps:
        view = UndirectedView.from_snapshot(snap)
        phi, side = min_conductance_exact(view)
        phi_o, _ = brute_force_min_conductance(view)
        phi_fast.append(phi)
        phi_ref.append(phi_o)
        if side is not None and conductance(view, side).phi != phi:
            argmin_bad += 1
        verts = view.vertices.tolist()
        for k in range(1, len(verts)):
            for S in itertools.combinations(verts, k):
                if conductance(view, S).phi != subset_conductance(view, S):
                    cond_bad += 1
        if is_connected(view):
            lam = spectral_gap(view).lambda2
            lam_o = dense_lambda2(view)
            lam_fast.append(lam)
            lam_ref.append(lam_o)
            if phi_o is not None and not (lam_o / 2 - 1e-6 <= phi_o <= math.sqrt(2 * (lam_o + 1e-6))):
                sandwich_bad += 1
    inputs = {"seed": seed + 1, "snapshots": len(snaps)}
    verdicts.append(_check("min_conductance_exact", inputs, [str(x) for x in phi_fast], [str(x) for x in phi_ref]))
    verdicts.append(_check("min_conductance_argmin", inputs, argmin_bad, 0))
    verdicts.append(_check("conductance", inputs, cond_bad, 0))
    err = max((abs(a - b) for a, b in zip(lam_fast, lam_ref)), default=0.0)
    verdicts.append(_check("spectral_gap", inputs, err, 0.0, tolerance=1e-6))
    verdicts.append(_check("cheeger_sandwich", inputs, sandwich_bad, 0))

    n, d, c = 32, 3, 4
    state = GraphState(n, d, c)
    rng = trial_rng(seed, 0)
    violations = 0
    prev_q = None
    for t in range(1, 10 * n + 1):
        rep = raes.step(state, t, rng)
        try:
            check_invariants(state)
        except AssertionError:
            violations += 1
        if rep.full_node_count * c > n:
            violations += 1
        if prev_q is not None and rep.queue_size_before > prev_q + (c + 1) * d:
            violations += 1
        if rep.live_count >= 2 and rep.accepted + rep.rejected != rep.queue_size_before:
            violations += 1
        prev_q = rep.queue_size_before
    verdicts.append(_check("invariant_battery", {"n": n, "d": d, "c": c, "seed": seed}, violations, 0))

    snap = freeze(state)
    verdicts.append(_check("snapshot_roundtrip", {"round": snap.round}, loads_snapshot(dumps_snapshot(snap)) == snap, True))

    batch = BatchState(n, d, c, [trial_rng(seed, b) for b in range(3)])
    batch.run(3 * n)
    same = []
    for b in range(3):
        single = GraphState(n, d, c)
        raes.run_rounds(single, 3 * n, trial_rng(seed, b))
        same.append(freeze(single) == batch.freeze(b))
    verdicts.append(_check("batch_engine", {"n": n, "trials": 3}, same, [True] * 3))
    return verdicts
