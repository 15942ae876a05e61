"""Synthetic plans without buildings, for experiments on the patrol rules."""
from __future__ import annotations

import math

from .geometry import Viewpoint
from .pathplan.tasks import Plan, Task
from .pathplan.tour import ClosedPath
from .pathplan.visibility import DistanceOracle, DistanceTable


def ring_plan(n: int = 20, side: float = 10.0, agents: int = 2, altitude: float = 10.0) -> Plan:
    """One task whose path is a regular ``n``-gon with edges of length ``side``.

    Viewpoint ``k`` (1-based slot ``k``) has id ``k - 1``; cameras look
    outwards and horizontally.
    """
    R = side / (2 * math.sin(math.pi / n))
    vps = []
    for k in range(n):
        a = 2 * math.pi * k / n
        x, y = R * math.cos(a), R * math.sin(a)
        bearing = math.degrees(math.atan2(x, y)) % 360.0
        vps.append(Viewpoint(k, (x, y, altitude), bearing, 0.0, None, 0))
    oracle = DistanceOracle([])
    table = DistanceTable(oracle, [v.position for v in vps])
    table.slots = list(range(n))
    path = ClosedPath(tuple(range(n)), n * side if n > 2 else 2 * side * (n - 1))
    task = Task(0, path, agents, 0, 0, (0.0, 0.0, altitude))
    return Plan({v.id: v for v in vps}, [task], {0: table}, oracle=oracle)


def ring_lap_time(n=20, side=10.0, speed=2.0, dwell=3.0) -> float:
    return n * side / speed + n * dwell
