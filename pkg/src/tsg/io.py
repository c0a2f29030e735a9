"""On-disk formats: snapshot edge lists, metrics CSV, JSONL event logs.

Snapshot files are ASCII text, newline terminated::

    tsg-snapshot v1 n=<n> d=<d> c=<c> round=<t>
    v <birth>                  one per live vertex, ascending
    e <owner> <index> <target> one per connected request, by (owner, index)
    p <owner> <index>          one per pending request, by (owner, index)
"""

from __future__ import annotations

import csv
import io
import json
import re

import numpy as np

from .model import SnapshotExport

HEADER_RE = re.compile(r"^tsg-snapshot v1 n=(\d+) d=(\d+) c=(\d+) round=(\d+)$")

METRICS_COLUMNS = ["round", "queue_size", "accepted", "rejected", "full_nodes", "edges", "messages", "informed"]


class SnapshotFormatError(ValueError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


def dumps_snapshot(snap: SnapshotExport) -> str:
    out = [f"tsg-snapshot v1 n={snap.n} d={snap.d} c={snap.c} round={snap.round}"]
    out += [f"v {b}" for b in snap.births.tolist()]
    out += [f"e {o} {i} {t}" for o, i, t in snap.edges.tolist()]
    out += [f"p {o} {i}" for o, i in snap.pending.tolist()]
    return "\n".join(out) + "\n"


def loads_snapshot(text: str) -> SnapshotExport:
    """Parse and validate a snapshot; raises SnapshotFormatError naming the line."""
    if not text:
        raise SnapshotFormatError(0, "empty snapshot")
    if not text.endswith("\n"):
        raise SnapshotFormatError(text.count("\n") + 1, "missing final newline")
    lines = text[:-1].split("\n")
    m = HEADER_RE.match(lines[0])
    if not m:
        raise SnapshotFormatError(1, f"bad header {lines[0]!r}")
    n, d, c, t = (int(x) for x in m.groups())
    births, edges, pending = [], [], []
    section = "v"
    order = {"v": 0, "e": 1, "p": 2}
    expected = {"v": 2, "e": 4, "p": 3}
    for no, line in enumerate(lines[1:], start=2):
        parts = line.split(" ")
        kind = parts[0]
        if kind not in order:
            raise SnapshotFormatError(no, f"unknown record {kind!r}")
        if order[kind] < order[section]:
            raise SnapshotFormatError(no, f"'{kind}' record after '{section}' records")
        section = kind
        if len(parts) != expected[kind] or not all(p.isdigit() for p in parts[1:]):
            raise SnapshotFormatError(no, f"malformed {kind!r} record {line!r}")
        vals = [int(p) for p in parts[1:]]
        if kind == "v":
            if births and vals[0] <= births[-1]:
                raise SnapshotFormatError(no, "vertices must be strictly ascending")
            if not 0 <= t - vals[0] < max(n, 1):
                raise SnapshotFormatError(no, f"vertex {vals[0]} has age outside [0, n)")
            births.append(vals[0])
        elif kind == "e":
            edges.append((no, *vals))
        else:
            pending.append((no, *vals))
    live = set(births)
    seen = set()
    for no, o, i, tg in edges:
        if o == tg:
            raise SnapshotFormatError(no, f"self-loop on vertex {o}")
        if o not in live or tg not in live:
            raise SnapshotFormatError(no, "edge endpoint is not a live vertex")
        if not 0 <= i < d or (o, i) in seen:
            raise SnapshotFormatError(no, f"request ({o}, {i}) invalid or repeated")
        seen.add((o, i))
    for no, o, i in pending:
        if o not in live:
            raise SnapshotFormatError(no, "pending request of a non-live vertex")
        if not 0 <= i < d or (o, i) in seen:
            raise SnapshotFormatError(no, f"request ({o}, {i}) invalid or repeated")
        seen.add((o, i))
    if len(seen) != d * len(births):
        raise SnapshotFormatError(len(lines), "every live vertex must own exactly d requests")
    indeg = {}
    for _, _, _, tg in edges:
        indeg[tg] = indeg.get(tg, 0) + 1
    if indeg and max(indeg.values()) > c * d:
        raise SnapshotFormatError(len(lines), "in-degree above c*d")
    for rows in (edges, pending):
        keys = [r[1:3] for r in rows]
        if keys != sorted(keys):
            raise SnapshotFormatError(rows[0][0], "records must be sorted by (owner, index)")
    return SnapshotExport(
        n, d, c, t,
        np.array(births, dtype=np.int64),
        np.array([r[1:] for r in edges], dtype=np.int64).reshape(-1, 3),
        np.array([r[1:] for r in pending], dtype=np.int64).reshape(-1, 2),
    )


def write_snapshot(path, snap: SnapshotExport) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as f:
        f.write(dumps_snapshot(snap))


def read_snapshot(path) -> SnapshotExport:
    with open(path, encoding="ascii", newline="") as f:
        return loads_snapshot(f.read())


def metrics_csv(rows) -> str:
    """Rows are mappings with METRICS_COLUMNS keys; missing ``informed`` is blank."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRICS_COLUMNS)
    for r in rows:
        w.writerow(["" if r.get(k) is None else r[k] for k in METRICS_COLUMNS])
    return buf.getvalue()


def report_row(report, informed=None) -> dict:
    return {
        "round": report.round,
        "queue_size": report.queue_size_before,
        "accepted": report.accepted,
        "rejected": report.rejected,
        "full_nodes": report.full_node_count,
        "edges": report.edge_count,
        "messages": report.message_count,
        "informed": informed,
    }


def events_jsonl(events) -> str:
    return "".join(json.dumps(e, sort_keys=True, separators=(",", ":")) + "\n" for e in events)


def read_events(path) -> list[dict]:
    with open(path) as f:
        return [json.loads(line) for line in f if line.strip()]
