"""Per-agent patrol state machine: service viewpoints along a closed path and
bounce off neighbours met on the same path.

Indices are 1-based throughout.  The state keeps ``c == next_index(l, d)``:
the agent is always between its last serviced viewpoint and the next one in
its direction of travel.  Reversing "immediately" therefore means turning
around and heading for the viewpoint beyond ``l``, which was just serviced.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

EPS_POS = 0.5
EPS_ANG = 5.0
DWELL = 3.0

TRANSIT = "transit"
SERVICING = "servicing"
DWELL_COMPLETE = "dwell-complete"


def next_index(c: int, d: int, n: int) -> int:
    if n < 1:
        raise ValueError("path length must be at least 1")
    if not 1 <= c <= n:
        raise IndexError(f"index {c} outside 1..{n}")
    if d not in (-1, 1):
        raise ValueError(f"direction must be -1 or +1, got {d}")
    return ((c - 1 + d + n) % n) + 1


@dataclass(frozen=True)
class PatrolMessage:
    agent_id: int
    position: tuple
    current_index: int
    last_index: int
    direction: int
    task_id: int = 0

    def __post_init__(self):
        if self.direction not in (-1, 1):
            raise ValueError("direction must be -1 or +1")


@dataclass
class PatrolState:
    agent_id: int
    task_id: int
    n: int
    position: tuple
    current_index: int
    last_index: int
    direction: int
    dwell_time: float = DWELL
    schedule_change_direction: bool = False
    phase: str = TRANSIT
    dwell_remaining: float = DWELL
    ignored: int = 0
    conflicts: dict = field(default_factory=lambda: {"same_target": 0, "crossing": 0})
    reversals: int = 0

    def __post_init__(self):
        for v in (self.current_index, self.last_index):
            if not 1 <= v <= self.n:
                raise IndexError(f"index {v} outside 1..{self.n}")
        self.dwell_remaining = min(self.dwell_remaining, self.dwell_time)

    def message(self) -> PatrolMessage:
        return PatrolMessage(self.agent_id, tuple(self.position), self.current_index,
                             self.last_index, self.direction, self.task_id)

    def reverse(self):
        """Turn around now and head for the viewpoint beyond the last one serviced."""
        self.direction = -self.direction
        self.current_index = next_index(self.last_index, self.direction, self.n)
        self.schedule_change_direction = False
        self.phase = TRANSIT
        self.dwell_remaining = self.dwell_time
        self.reversals += 1


def join_path(agent_position, path_positions, rng) -> tuple[int, int]:
    """Nearest viewpoint (ties to the lower index) and a random direction."""
    P = np.asarray(path_positions, dtype=float)
    if len(P) == 0:
        raise ValueError("cannot join an empty path")
    d2 = np.sum((P - np.asarray(agent_position, dtype=float)) ** 2, axis=1)
    c = int(np.argmin(d2)) + 1
    d = 1 if rng.integers(0, 2) else -1
    return c, d


def start_state(agent_id, task_id, agent_position, path_positions, rng, dwell_time=DWELL) -> PatrolState:
    n = len(path_positions)
    c, d = join_path(agent_position, path_positions, rng)
    return PatrolState(agent_id, task_id, n, tuple(agent_position), c, next_index(c, -d, n), d,
                       dwell_time=dwell_time, dwell_remaining=dwell_time)


def process_messages(state: PatrolState, inbox, path_positions, positions=None) -> PatrolState:
    """Resolve the first conflict found among neighbours on the same path.

    ``path_positions[k - 1]`` is the position of slot ``k``.  ``positions``
    optionally overrides the sender positions by agent id.
    """
    if state.n == 1:
        return state
    me = np.asarray(state.position, dtype=float)
    for msg in sorted(inbox, key=lambda m: m.agent_id):
        if msg.agent_id == state.agent_id:
            continue
        if msg.task_id != state.task_id or not (1 <= msg.current_index <= state.n
                                                and 1 <= msg.last_index <= state.n):
            state.ignored += 1
            continue
        c_i, l_i, c_k, l_k = state.current_index, state.last_index, msg.current_index, msg.last_index
        if c_i == c_k:
            v = np.asarray(path_positions[c_i - 1], dtype=float)
            other = positions[msg.agent_id] if positions is not None else msg.position
            di = float(np.linalg.norm(me - v))
            dk = float(np.linalg.norm(np.asarray(other, dtype=float) - v))
            nearer = di < dk or (di == dk and state.agent_id < msg.agent_id)
            state.conflicts["same_target"] += 1
            if not nearer:
                state.reverse()
            elif state.direction != msg.direction:
                state.schedule_change_direction = True
            break
        if c_i == l_k and c_k == l_i:
            state.conflicts["crossing"] += 1
            state.reverse()
            break
    return state


def _ang_diff(a, b):
    return abs((a - b + 180.0) % 360.0 - 180.0)


def at_pose(position, bearing, tilt, viewpoint) -> bool:
    if math.dist(position, viewpoint.position) > EPS_POS:
        return False
    if _ang_diff(tilt, viewpoint.tilt) > EPS_ANG:
        return False
    # bearing is meaningless when looking straight down
    if abs(viewpoint.tilt) < 90.0 - 1e-9 and _ang_diff(bearing, viewpoint.bearing) > EPS_ANG:
        return False
    return True


@dataclass(frozen=True)
class ServiceOutcome:
    """``visited`` is the slot whose dwell completed this step, if any;
    ``target`` the slot to fly to (``None`` while dwelling)."""

    visited: int | None
    target: int | None


def service_step(state: PatrolState, path_viewpoints, agent_pose, dt: float):
    """Dwell at the current viewpoint or ask to be moved there.

    ``agent_pose`` is ``(position, bearing, tilt)``.  Returns the updated state
    and a :class:`ServiceOutcome`.
    """
    pos, bearing, tilt = agent_pose
    v = path_viewpoints[state.current_index - 1]
    if not at_pose(pos, bearing, tilt, v):
        state.phase = TRANSIT
        return state, ServiceOutcome(None, state.current_index)
    state.phase = SERVICING
    state.dwell_remaining = max(0.0, state.dwell_remaining - dt)
    if state.dwell_remaining > 1e-9:
        return state, ServiceOutcome(None, None)
    done = state.current_index
    state.last_index = done
    if state.schedule_change_direction:
        state.direction = -state.direction
        state.schedule_change_direction = False
        state.reversals += 1
    state.current_index = next_index(done, state.direction, state.n)
    state.dwell_remaining = state.dwell_time
    state.phase = DWELL_COMPLETE
    return state, ServiceOutcome(done, state.current_index)


def arc_position(state: PatrolState, path_positions) -> float:
    """Continuous position along the loop in slot units (0-based, mod n).

    Interpolates between ``l`` and ``c`` by straight-line progress; used by
    tests to check ordering of agents on the loop.
    """
    n = state.n
    a = np.asarray(path_positions[state.last_index - 1], dtype=float)
    b = np.asarray(path_positions[state.current_index - 1], dtype=float)
    p = np.asarray(state.position, dtype=float)
    span = float(np.linalg.norm(b - a))
    f = 0.0 if span == 0 else min(1.0, float(np.linalg.norm(p - a)) / span)
    return ((state.last_index - 1) + state.direction * f) % n if n > 1 else 0.0


__all__ = [
    "EPS_POS", "EPS_ANG", "DWELL", "TRANSIT", "SERVICING", "DWELL_COMPLETE",
    "next_index", "PatrolMessage", "PatrolState", "join_path", "start_state",
    "process_messages", "at_pose", "ServiceOutcome", "service_step", "arc_position",
]
