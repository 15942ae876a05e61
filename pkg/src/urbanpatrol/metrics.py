"""Viewpoint idleness bookkeeping and the run output files."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field


@dataclass
class IdlenessLedger:
    """Idleness of each viewpoint counts from the start of the run (t = 0)."""

    viewpoint_ids: tuple
    start_time: float = 0.0
    last_visit: dict = field(default_factory=dict)
    first_visit: dict = field(default_factory=dict)
    visit_count: dict = field(default_factory=dict)
    series: list = field(default_factory=list)
    coverage_complete_time: float | None = None
    _unvisited: int = 0

    def __post_init__(self):
        self.viewpoint_ids = tuple(self.viewpoint_ids)
        for v in self.viewpoint_ids:
            self.last_visit.setdefault(v, self.start_time)
            self.visit_count.setdefault(v, 0)
        self._unvisited = sum(1 for v in self.viewpoint_ids if self.visit_count[v] == 0)
        if not self.viewpoint_ids:
            self.coverage_complete_time = self.start_time

    def idleness(self, viewpoint_id, time):
        return time - self.last_visit[viewpoint_id]


def record_visit(ledger: IdlenessLedger, viewpoint_id, time: float) -> IdlenessLedger:
    if viewpoint_id not in ledger.visit_count:
        raise KeyError(f"unknown viewpoint {viewpoint_id}")
    if ledger.visit_count[viewpoint_id] == 0:
        ledger.first_visit[viewpoint_id] = time
        ledger._unvisited -= 1
        if ledger._unvisited == 0:
            ledger.coverage_complete_time = time
    ledger.last_visit[viewpoint_id] = time
    ledger.visit_count[viewpoint_id] += 1
    return ledger


def sample_max_idleness(ledger: IdlenessLedger, time: float, record: bool = True):
    worst = max((time - t for t in ledger.last_visit.values()), default=0.0)
    if record:
        ledger.series.append((time, worst))
    return time, worst


def max_idleness_after_coverage(ledger: IdlenessLedger):
    t0 = ledger.coverage_complete_time
    if t0 is None:
        return None
    vals = [m for t, m in ledger.series if t >= t0]
    return max(vals) if vals else None


def mean_revisit_interval(ledger: IdlenessLedger, viewpoint_id):
    n = ledger.visit_count[viewpoint_id]
    if n < 2:
        return None
    return (ledger.last_visit[viewpoint_id] - ledger.first_visit[viewpoint_id]) / (n - 1)


# -- output files -------------------------------------------------------------

def _fmt(x, digits=3):
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.{digits}f}"
    return str(x)


def write_timeseries(path, rows) -> None:
    """``rows``: iterable of (run_id, ledger)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["run_id", "time_s", "max_idleness_s"])
        for run_id, ledger in rows:
            for t, m in ledger.series:
                w.writerow([run_id, _fmt(float(t), 1), _fmt(float(m), 1)])


SUMMARY_COLUMNS = ["run_id", "seed", "coverage_complete_time_s", "max_idleness_after_coverage_s",
                   "viewpoint_count", "agent_count"]


def summary_row(run_id, seed, ledger, agent_count):
    return [run_id, seed, _fmt(ledger.coverage_complete_time, 1),
            _fmt(max_idleness_after_coverage(ledger), 1), len(ledger.viewpoint_ids), agent_count]


def write_summary(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        w.writerows(rows)


def write_per_viewpoint(path, ledger) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["viewpoint_id", "visit_count", "mean_revisit_interval_s"])
        for v in sorted(ledger.viewpoint_ids):
            w.writerow([v, ledger.visit_count[v], _fmt(mean_revisit_interval(ledger, v))])


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def plot_svg(path, series, title="", width=640, height=320, bound=None) -> None:
    """Polyline plot of (time, max idleness); optional dashed horizontal bound."""
    pad = 48
    ts = [t for t, _ in series] or [0.0]
    ms = [m for _, m in series] or [0.0]
    tmax = max(max(ts), 1e-9)
    ymax = max(max(ms), bound or 0.0, 1e-9) * 1.05
    # round the axis up to a tidy number
    mag = 10 ** math.floor(math.log10(ymax))
    ymax = math.ceil(ymax / mag) * mag

    def X(t):
        return pad + (width - 2 * pad) * t / tmax

    def Y(m):
        return height - pad - (height - 2 * pad) * m / ymax

    pts = " ".join(f"{X(t):.1f},{Y(m):.1f}" for t, m in series)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{width / 2:.0f}" y="{height - 12}" font-size="12" text-anchor="middle">time [s]</text>',
        f'<text x="14" y="{height / 2:.0f}" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 14 {height / 2:.0f})">max idleness [s]</text>',
        f'<text x="{width / 2:.0f}" y="20" font-size="13" text-anchor="middle">{title}</text>',
    ]
    for k in range(5):
        yv = ymax * k / 4
        tv = tmax * k / 4
        out.append(f'<text x="{pad - 4}" y="{Y(yv) + 4:.1f}" font-size="10" text-anchor="end">{yv:g}</text>')
        out.append(f'<text x="{X(tv):.1f}" y="{height - pad + 14}" font-size="10" '
                   f'text-anchor="middle">{tv:g}</text>')
    if bound is not None:
        out.append(f'<line x1="{pad}" y1="{Y(bound):.1f}" x2="{width - pad}" y2="{Y(bound):.1f}" '
                   f'stroke="gray" stroke-dasharray="4 3"/>')
    if pts:
        out.append(f'<polyline fill="none" stroke="steelblue" stroke-width="1.2" points="{pts}"/>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
