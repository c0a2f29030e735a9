"""Command line: ``tsg run | analyze | spread | verify``.

Exit codes: 0 success, 1 a trial or check failed, 2 invalid input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time

import numpy as np

from . import expansion, oracle, runner
from .io import SnapshotFormatError, metrics_csv, read_snapshot
from .model import ConfigError, SimConfig
from .rng import make_rng
from .rumor import PROTOCOLS, target_count

logger = logging.getLogger("tsg")

DEFAULTS = {
    "n": 64,
    "d": 4,
    "c": 8,
    "rounds": None,  # 10n
    "trials": 1,
    "seed": 0,
    "workers": 1,
    "snapshot_rounds": [],
    "event_log": False,
    "out_dir": "tsg-out",
    "protocol": "push",
    "ts": "auto",
    "gap": 10,
    "cap": None,
    "extra_rounds": 0,
}


class UsageError(Exception):
    pass


def _merge(args, keys):
    cfg = {}
    if getattr(args, "config", None):
        try:
            with open(args.config) as f:
                cfg = json.load(f)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}")
        unknown = set(cfg) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
    out = {}
    for k in keys:
        v = getattr(args, k, None)
        if v is None or v == []:
            v = cfg.get(k, DEFAULTS[k])
        out[k] = v
    return out


def _sim_config(o) -> SimConfig:
    n = o["n"]
    rounds = o["rounds"] if o.get("rounds") is not None else 10 * n
    try:
        return SimConfig(n, o["d"], o["c"], horizon=rounds, master_seed=o["seed"], trial_count=o["trials"],
                         protocol=o.get("protocol") if o.get("protocol") in PROTOCOLS else None)
    except ConfigError as exc:
        raise UsageError(str(exc))


def _add_common(p):
    p.add_argument("--config", help="JSON file mirroring the flags; flags win")
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--c", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, help="worker processes for independent trials")
    p.add_argument("--out-dir", dest="out_dir")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tsg", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate independent trials and write metrics")
    _add_common(run)
    run.add_argument("--rounds", type=int, help="horizon (default 10n)")
    run.add_argument("--snapshot-rounds", dest="snapshot_rounds", type=int, nargs="*", default=[])
    run.add_argument("--event-log", dest="event_log", action="store_true", default=None)

    an = sub.add_parser("analyze", help="expansion analysis of snapshot files")
    an.add_argument("files", nargs="+")
    an.add_argument("--samples", type=int, default=2000)
    an.add_argument("--age-floor", dest="age_floor", type=int, help="default n - ceil(log(n)^2)")
    an.add_argument("--seed", type=int, default=0)
    an.add_argument("--out", help="CSV path (default stdout)")

    sp = sub.add_parser("spread", help="rumor spreading from a source joining at --ts")
    _add_common(sp)
    sp.add_argument("--protocol", choices=PROTOCOLS)
    sp.add_argument("--ts", help="injection round or 'auto' (= 2n)")
    sp.add_argument("--gap", type=int)
    sp.add_argument("--cap", type=int, help="round cap (default 50*ceil(log n))")
    sp.add_argument("--extra-rounds", dest="extra_rounds", type=int, help="rounds after saturation for late joiners")

    ve = sub.add_parser("verify", help="oracle differential suite and invariant battery")
    ve.add_argument("--inject-fault", dest="inject_fault", action="store_true",
                    help="test hook: flip the acceptance threshold from <= to <")
    ve.add_argument("--out", help="write the verdict dump as JSON here")
    return ap


def cmd_run(args) -> int:
    o = _merge(args, ["n", "d", "c", "rounds", "trials", "seed", "workers", "snapshot_rounds", "event_log", "out_dir"])
    config = _sim_config(o)
    started = time.time()
    results = runner.run_trials(config, o["snapshot_rounds"], bool(o["event_log"]), workers=o["workers"] or 1)
    summary = {
        "config": {"n": config.n, "d": config.d, "c": config.c, "horizon": config.horizon},
        "trials": [{"trial": r.trial, "seed": r.seed, "error": r.error, **r.summary} for r in results],
    }
    files = {name: text for r in results for name, text in r.files.items()}
    inventory = runner.write_outputs(o["out_dir"], files, {"summary.json": summary})
    runner.write_manifest(o["out_dir"], config, results, inventory, started, "run")
    failed = [r.trial for r in results if r.error]
    if failed:
        print(f"trials failed: {failed}", file=sys.stderr)
        return 1
    return 0


ANALYSIS_COLUMNS = [
    "file", "round", "n", "d", "c", "vertices", "edges", "max_degree", "full_nodes", "pending", "h_size",
    "expansion_min", "expansion_buckets", "lambda2", "cheeger_lo", "cheeger_hi", "connected",
    "phi_exact", "phi_oracle", "sandwich_ok", "age_floor", "largest_young_component", "young_components",
]


def analyze_snapshot(path, snap, samples, age_floor, rng) -> dict:
    view = expansion.UndirectedView.from_snapshot(snap)
    deg = view.degree
    indeg = np.bincount(np.searchsorted(snap.births, snap.edges[:, 2]), minlength=view.size)
    H, _ = expansion.pending_free_subgraph(snap)
    n = view.size
    row = {
        "file": os.path.basename(str(path)), "round": snap.round, "n": snap.n, "d": snap.d, "c": snap.c,
        "vertices": n, "edges": view.edge_count, "max_degree": int(deg.max(initial=0)),
        "full_nodes": int(np.count_nonzero(indeg == snap.c * snap.d)), "pending": len(snap.pending),
        "h_size": len(H),
    }
    lo, hi = max(1, math.ceil(math.log(max(n, 2)))), n // 2
    if n >= 2 and lo <= hi and samples > 0:
        est = expansion.vertex_expansion_sampled(view, lo, hi, samples, rng)
        row["expansion_min"] = f"{est.min_ratio:.6g}"
        row["expansion_buckets"] = ";".join(f"{a}-{b}:{m:.4g}" for a, b, _, m in est.buckets)
    gap = expansion.spectral_gap(view)
    row.update(lambda2=f"{gap.lambda2:.9g}", cheeger_lo=f"{gap.cheeger_lo:.9g}",
               cheeger_hi=f"{gap.cheeger_hi:.9g}", connected=int(gap.connected))
    if 2 <= n <= expansion.ENUMERATION_LIMIT:
        phi, _ = expansion.min_conductance_exact(view)
        row["phi_exact"] = "" if phi is None else str(phi)
        if n <= 14:
            phi_o, _ = oracle.brute_force_min_conductance(view)
            row["phi_oracle"] = "" if phi_o is None else str(phi_o)
            if phi_o != phi:
                raise RuntimeError(f"exact conductance disagrees with brute force on {path}")
        if phi is not None and gap.connected:
            row["sandwich_ok"] = int(gap.cheeger_lo - 1e-9 <= phi <= gap.cheeger_hi + 1e-9)
    floor = age_floor if age_floor is not None else max(0, snap.n - math.ceil(math.log(snap.n) ** 2))
    floor = min(floor, snap.n - 1)
    sizes = expansion.components_excluding_old(snap, floor)
    row.update(age_floor=floor, largest_young_component=sizes[0] if sizes else 0,
               young_components=len(sizes))
    return row


def cmd_analyze(args) -> int:
    rng = make_rng(args.seed)
    snaps = []
    for path in args.files:
        try:
            snaps.append((path, read_snapshot(path)))
        except (OSError, UnicodeDecodeError) as exc:
            raise UsageError(f"{path}: {exc}")
        except SnapshotFormatError as exc:
            raise UsageError(f"{path}: {exc}")
    buf = io.StringIO()
    w = csv.DictWriter(buf, ANALYSIS_COLUMNS, lineterminator="\n", restval="")
    w.writeheader()
    for path, snap in snaps:
        w.writerow(analyze_snapshot(path, snap, args.samples, args.age_floor, rng))
    if args.out:
        with open(args.out, "w", newline="\n") as f:
            f.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return 0


def cmd_spread(args) -> int:
    o = _merge(args, ["n", "d", "c", "trials", "seed", "workers", "out_dir", "protocol", "ts", "gap", "cap",
                      "extra_rounds"])
    n = o["n"]
    ts = o["ts"]
    if str(ts) == "auto":
        t_s = 2 * n
    else:
        try:
            t_s = int(ts)
        except ValueError:
            raise UsageError(f"--ts must be an integer or 'auto', got {ts!r}")
    if t_s < 2 * n:
        raise UsageError(f"--ts {t_s} precedes the stable regime 2n = {2 * n}")
    if o["gap"] < 0:
        raise UsageError("--gap must be non-negative")
    cap = o["cap"] if o["cap"] is not None else 50 * math.ceil(math.log(n))
    o["rounds"] = t_s + cap + (o["extra_rounds"] or 0)
    config = _sim_config(o)
    started = time.time()
    out_dir = o["out_dir"]
    os.makedirs(out_dir, exist_ok=True)
    summaries, files = [], {}
    lat_buf = io.StringIO()
    lat = csv.writer(lat_buf, lineterminator="\n")
    lat.writerow(["trial", "birth", "latency", "censored"])
    for i in range(config.trial_count):
        summary, rows, lat_rows = runner.spread_trial(config, i, o["protocol"], t_s, o["gap"], cap,
                                                      o["extra_rounds"] or 0)
        summaries.append(summary)
        files[f"trial_{i:03d}_trace.csv"] = metrics_csv(rows)
        lat.writerows(lat_rows)
    files["latency.csv"] = lat_buf.getvalue()
    results = [runner.TrialResult(s["trial"], s["seed"], s) for s in summaries]
    summary = {
        "config": {"n": n, "d": config.d, "c": config.c, "protocol": o["protocol"], "t_s": t_s, "gap": o["gap"],
                   "cap": cap, "target": target_count(n, o["gap"])},
        "median_T": float(np.median([s["T"] for s in summaries if s["complete"]])) if any(
            s["complete"] for s in summaries) else None,
        "incomplete_trials": [s["trial"] for s in summaries if not s["complete"]],
        "trials": summaries,
    }
    inventory = runner.write_outputs(out_dir, files, {"summary.json": summary})
    runner.write_manifest(out_dir, config, results, inventory, started, "spread")
    return 0


def cmd_verify(args) -> int:
    from .verify import run_verification

    verdicts = run_verification(fault=args.inject_fault)
    dump = [v.as_dict() for v in verdicts]
    report = {"verdicts": dump, "digest": oracle.digest(dump), "passed": all(v.agree for v in verdicts)}
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w") as f:
            f.write(text)
    for v in verdicts:
        print(f"{'PASS' if v.agree else 'FAIL'} {v.check}")
    if not report["passed"]:
        print(text, file=sys.stderr)
        failed = ", ".join(v.check for v in verdicts if not v.agree)
        print(f"verification failed: {failed}", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    handlers = {"run": cmd_run, "analyze": cmd_analyze, "spread": cmd_spread, "verify": cmd_verify}
    try:
        return handlers[args.command](args)
    except UsageError as exc:
        print(f"tsg {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
