"""Patrol tasks: one closed path per building plus an agent quota."""
from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field

from .tour import ClosedPath, christofides_tour
from .visibility import DistanceOracle, DistanceTable

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Task:
    id: int
    path: ClosedPath
    capacity: int
    priority: int = 0
    building_id: int = -1
    centroid: tuple | None = None

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError(f"task {self.id}: capacity must be at least 1")
        if self.priority < 0:
            raise ValueError(f"task {self.id}: priority must be non-negative")


def allocate_capacities(weights, total: int) -> list[int]:
    """Split ``total`` agents proportionally to ``weights``.

    Largest-remainder rounding with a floor of one agent per entry; ties go
    to the earlier entry.
    """
    n = len(weights)
    if total < n:
        raise ValueError(f"{total} agents cannot cover {n} tasks (need at least one each)")
    s = float(sum(weights))
    if s <= 0:
        quotas = [total / n] * n
    else:
        quotas = [total * w / s for w in weights]
    caps = [max(1, math.floor(q)) for q in quotas]
    spare = total - sum(caps)
    if spare > 0:
        order = sorted(range(n), key=lambda j: (-(quotas[j] - math.floor(quotas[j])), j))
        for j in order[:spare]:
            caps[j] += 1
    while spare < 0:
        # floors of one overshot the total; trim where the overshoot is largest
        j = max((j for j in range(n) if caps[j] > 1), key=lambda j: (caps[j] - quotas[j], -j))
        caps[j] -= 1
        spare += 1
    return caps


@dataclass
class Plan:
    """Everything computed once per scenario before simulating."""

    viewpoints: dict
    tasks: list
    tables: dict
    tour_seconds: dict = field(default_factory=dict)
    table_seconds: dict = field(default_factory=dict)

    oracle: object = None

    def path_viewpoints(self, task):
        return [self.viewpoints[v] for v in task.path.viewpoint_ids]

    def slot_route(self, task_id, a, b):
        """Route between 1-based path slots ``a`` and ``b`` of a task."""
        table = self.tables[task_id]
        return table.route(table.slots[a - 1], table.slots[b - 1])

    def lap_time(self, task, speed, dwell):
        """Time for one agent to patrol the whole closed path once."""
        return task.path.length / speed + len(task.path) * dwell


def generate_tasks(buildings, viewpoints_by_building, oracle: DistanceOracle, total_agents: int,
                   priorities=None, weighting: str = "viewpoints") -> Plan:
    """One task per building with a Christofides closed path.

    ``weighting`` selects how agents are spread: ``"viewpoints"`` (number of
    viewpoints on each path) or ``"length"`` (metric path length).
    """
    if total_agents < len(buildings):
        raise ValueError(f"{total_agents} agents for {len(buildings)} buildings: need at least one per task")
    priorities = priorities or {}
    paths, tables, tour_s, table_s = [], {}, {}, {}
    viewpoints = {}
    kept = []
    for b in buildings:
        vps = viewpoints_by_building.get(b.id, [])
        if not vps:
            log.warning("building %s has no viewpoints; no task generated", b.id)
            continue
        t0 = time.perf_counter()
        table = DistanceTable(oracle, [v.position for v in vps])
        t1 = time.perf_counter()
        path = christofides_tour(vps, table)
        t2 = time.perf_counter()
        table_s[b.id], tour_s[b.id] = t1 - t0, t2 - t1
        by_id = {v.id: i for i, v in enumerate(vps)}
        table.slots = [by_id[v] for v in path.viewpoint_ids]
        tables[b.id] = table
        for v in vps:
            viewpoints[v.id] = v
        paths.append(path)
        kept.append(b)
    if weighting == "viewpoints":
        w = [len(p) for p in paths]
    elif weighting == "length":
        w = [p.length for p in paths]
    else:
        raise ValueError(f"unknown weighting {weighting!r}")
    caps = allocate_capacities(w, total_agents)
    tasks = [Task(i, p, c, int(priorities.get(b.id, b.priority)), b.id, tuple(b.centroid))
             for i, (b, p, c) in enumerate(zip(kept, paths, caps))]
    return Plan(viewpoints, tasks, {t.id: tables[t.building_id] for t in tasks}, tour_s, table_s)


def plan_scenario(buildings, camera, total_agents, clearance=1.0, weighting="viewpoints") -> Plan:
    from ..geometry import building_viewpoints

    vps = building_viewpoints(buildings, camera, clearance)
    oracle = DistanceOracle(buildings, clearance)
    plan = generate_tasks(buildings, vps, oracle, total_agents, weighting=weighting)
    plan.oracle = oracle
    return plan


TOUR_COLUMNS = ("task_id", "building_id", "order", "viewpoint_id", "x_m", "y_m", "z_m", "bearing_deg", "tilt_deg")


def write_tours(path, plan: Plan) -> None:
    """Write every task's closed path as one row per viewpoint, in path order.

    Comma-separated with a header row; ``order`` starts at 1 and the path
    closes back on the first row of each task.
    """
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TOUR_COLUMNS)
        for t in plan.tasks:
            for k, vid in enumerate(t.path.viewpoint_ids, start=1):
                v = plan.viewpoints[vid]
                x, y, z = v.position
                w.writerow([t.id, t.building_id, k, vid, f"{x:.4f}", f"{y:.4f}", f"{z:.4f}",
                            f"{v.bearing:.4f}", f"{v.tilt:.4f}"])


def read_tours(path) -> dict:
    """Inverse of :func:`write_tours`: task id -> list of row dicts."""
    out = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.setdefault(int(row["task_id"]), []).append(row)
    return out
