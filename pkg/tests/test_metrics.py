import csv

import pytest
from hypothesis import given, strategies as st

from urbanpatrol.metrics import (SUMMARY_COLUMNS, IdlenessLedger, max_idleness_after_coverage, mean_revisit_interval,
                                 plot_svg, read_csv, record_visit, sample_max_idleness, summary_row,
                                 write_per_viewpoint, write_summary, write_timeseries)


def test_last_unvisited_sets_coverage_time():
    L = IdlenessLedger([1, 2])
    record_visit(L, 1, 120.0)
    assert L.coverage_complete_time is None
    record_visit(L, 1, 300.0)
    record_visit(L, 2, 400.0)
    assert L.coverage_complete_time == 400.0
    record_visit(L, 1, 500.0)
    assert L.coverage_complete_time == 400.0


def test_idleness_is_time_since_visit():
    L = IdlenessLedger([1])
    record_visit(L, 1, 100.0)
    assert L.idleness(1, 130.0) == 30.0
    assert sample_max_idleness(L, 130.0) == (130.0, 30.0)


def test_idleness_counts_from_start():
    L = IdlenessLedger(range(5))
    assert sample_max_idleness(L, 50.0) == (50.0, 50.0)
    assert sample_max_idleness(L, 0.0, record=False) == (0.0, 0.0)
    assert L.series == [(50.0, 50.0)]


def test_all_visited_now_is_zero():
    L = IdlenessLedger([1, 2, 3])
    for v in (1, 2, 3):
        record_visit(L, v, 10.0)
    assert sample_max_idleness(L, 10.0)[1] == 0.0


def test_unvisited_grows_with_unit_slope():
    L = IdlenessLedger([1, 2])
    for t in range(0, 100):
        record_visit(L, 1, float(t))
        sample_max_idleness(L, float(t))
    assert [m for _, m in L.series] == [float(t) for t in range(100)]


def test_unknown_viewpoint():
    with pytest.raises(KeyError):
        record_visit(IdlenessLedger([1]), 2, 1.0)


def test_empty_ledger_is_covered():
    assert IdlenessLedger([]).coverage_complete_time == 0.0


@given(st.lists(st.tuples(st.integers(0, 9), st.floats(0, 1000)), max_size=60))
def test_coverage_time_is_latest_first_visit(visits):
    L = IdlenessLedger(range(10))
    first = {}
    for v, t in sorted(visits, key=lambda e: e[1]):
        record_visit(L, v, t)
        first.setdefault(v, t)
    if len(first) == 10:
        assert L.coverage_complete_time == max(first.values())
    else:
        assert L.coverage_complete_time is None
    for v in range(10):
        assert L.visit_count[v] == sum(1 for u, _ in visits if u == v)


@given(st.lists(st.integers(0, 4), min_size=1, max_size=50))
def test_monotone_between_visits_and_reset(seq):
    L = IdlenessLedger(range(5))
    prev = {v: 0.0 for v in range(5)}
    for tick, v in enumerate(seq, start=1):
        t = float(tick)
        for u in range(5):
            if u != v:
                assert L.idleness(u, t) == pytest.approx(prev[u] + 1.0)
        record_visit(L, v, t)
        assert L.idleness(v, t) < 1.0
        prev = {u: L.idleness(u, t) for u in range(5)}


def test_revisit_interval_and_after_coverage():
    L = IdlenessLedger([1, 2])
    for t in (10.0, 40.0, 70.0):
        record_visit(L, 1, t)
    assert mean_revisit_interval(L, 1) == 30.0
    assert mean_revisit_interval(L, 2) is None
    assert max_idleness_after_coverage(L) is None
    record_visit(L, 2, 75.0)
    for t in (70.0, 80.0, 90.0):
        sample_max_idleness(L, t)
    assert max_idleness_after_coverage(L) == pytest.approx(20.0)


def test_csv_outputs(tmp_path):
    L = IdlenessLedger([3, 1])
    record_visit(L, 1, 5.0)
    record_visit(L, 3, 6.0)
    record_visit(L, 3, 9.5)
    for t in (0.0, 1.0, 10.0):
        sample_max_idleness(L, t)
    write_timeseries(tmp_path / "ts.csv", [("seed-0000", L)])
    rows = read_csv(tmp_path / "ts.csv")
    assert rows[-1] == {"run_id": "seed-0000", "time_s": "10.0", "max_idleness_s": "5.0"}
    write_summary(tmp_path / "s.csv", [summary_row("seed-0000", 0, L, 2)])
    with open(tmp_path / "s.csv") as fh:
        got = list(csv.reader(fh))
    assert got[0] == SUMMARY_COLUMNS
    assert got[1] == ["seed-0000", "0", "6.0", "5.0", "2", "2"]
    write_per_viewpoint(tmp_path / "v.csv", L)
    assert read_csv(tmp_path / "v.csv") == [
        {"viewpoint_id": "1", "visit_count": "1", "mean_revisit_interval_s": ""},
        {"viewpoint_id": "3", "visit_count": "2", "mean_revisit_interval_s": "3.500"},
    ]


def test_uncovered_run_has_empty_coverage_cell():
    L = IdlenessLedger([1, 2])
    record_visit(L, 1, 1.0)
    row = summary_row("seed-0001", 1, L, 1)
    assert row[2] == "" and row[3] == ""


def test_svg_is_deterministic(tmp_path):
    series = [(float(t), float(t % 37)) for t in range(200)]
    plot_svg(tmp_path / "a.svg", series, "run", bound=40.0)
    plot_svg(tmp_path / "b.svg", series, "run", bound=40.0)
    a = (tmp_path / "a.svg").read_bytes()
    assert a == (tmp_path / "b.svg").read_bytes()
    assert a.startswith(b"<svg") and b"polyline" in a and b"stroke-dasharray" in a
    plot_svg(tmp_path / "empty.svg", [])
