import pytest

from tsg import raes
from tsg.io import (
    METRICS_COLUMNS,
    SnapshotFormatError,
    events_jsonl,
    loads_snapshot,
    metrics_csv,
    read_events,
    read_snapshot,
    report_row,
    write_snapshot,
)
from tsg.model import GraphState, freeze
from tsg.rng import make_rng


def test_snapshot_roundtrip_file(tmp_path, stable_state):
    snap = freeze(stable_state)
    path = tmp_path / "s.tsg"
    write_snapshot(path, snap)
    assert read_snapshot(path) == snap
    text = path.read_bytes()
    assert text.isascii() and text.endswith(b"\n")


GOOD = "tsg-snapshot v1 n=3 d=1 c=2 round=6\nv 4\nv 5\nv 6\ne 4 0 5\ne 5 0 6\np 6 0\n"


def test_good_minimal():
    snap = loads_snapshot(GOOD)
    assert snap.births.tolist() == [4, 5, 6]
    assert snap.targets_of(4, 0) == 5 and snap.targets_of(6, 0) is None


@pytest.mark.parametrize(
    "text,line",
    [
        ("", 0),
        ("tsg-snapshot v2 n=3 d=1 c=2 round=6\n", 1),
        (GOOD.replace("e 4 0 5", "e 4 0 4"), 5),
        (GOOD.replace("v 5\nv 6", "v 6\nv 5"), 4),
        (GOOD.replace("e 5 0 6\n", ""), 6),
        (GOOD.replace("e 4 0 5", "e 4 0 9"), 5),
        (GOOD.rstrip("\n"), 7),
        (GOOD.replace("p 6 0\n", "p 6 0\nv 7\n"), 8),
        (GOOD.replace("e 4 0 5", "e 4 0 x"), 5),
    ],
)
def test_malformed(text, line):
    with pytest.raises(SnapshotFormatError) as info:
        loads_snapshot(text)
    assert info.value.line == line


def test_in_degree_cap_on_import():
    text = ("tsg-snapshot v1 n=4 d=1 c=2 round=8\nv 5\nv 6\nv 7\nv 8\n"
            "e 5 0 8\ne 6 0 8\ne 7 0 8\ne 8 0 5\n")
    with pytest.raises(SnapshotFormatError):
        loads_snapshot(text)


def test_metrics_csv_schema():
    state = GraphState(8, 2, 4)
    reps = raes.run_rounds(state, 5, make_rng(0))
    text = metrics_csv(report_row(r) for r in reps)
    lines = text.splitlines()
    assert lines[0] == ",".join(METRICS_COLUMNS)
    assert lines[1].endswith(",")  # informed column blank without a spread
    assert len(lines) == 6


def test_events_roundtrip(tmp_path):
    log = []
    raes.run_rounds(GraphState(8, 2, 4), 30, make_rng(1), log=log)
    p = tmp_path / "e.jsonl"
    p.write_text(events_jsonl(log))
    assert read_events(p) == log
