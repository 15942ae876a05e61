"""Decentralised task allocation by consensus auction, one task per agent.

Each agent keeps a table with the latest known claim of every agent it has
heard of.  Winner lists are derived from that table: for each task the
claimants ranked by bid (ties to the lower agent id) and cut at capacity.
Agents relay their whole table to neighbours; for third-party entries the
newer claim version wins, and an agent's own entry is never overwritten by
what others believe about it.
"""
from __future__ import annotations

import copy
import csv
import math
from dataclasses import dataclass, field

import numpy as np

T_LOST = 10.0


@dataclass(frozen=True)
class Claim:
    task_id: int | None
    bid: float
    version: int
    locked: bool = False


@dataclass(frozen=True)
class Bid:
    agent_id: int
    task_id: int
    score: float
    timestamp: float

    def __post_init__(self):
        if not self.score > 0:
            raise ValueError("bids must be positive")


def score(agent_position, task, building_centroid) -> float:
    """Priority plus inverse squared distance (clamped at 1) to the building."""
    d = float(np.sum((np.asarray(agent_position, float) - np.asarray(building_centroid, float)) ** 2))
    return task.priority + 1.0 / max(d, 1.0)


def _rank_key(agent_id, bid, locked=False):
    # agents already working a task keep their slot against any newcomer
    return (not locked, -bid, agent_id)


@dataclass
class AllocationState:
    agent_id: int
    capacities: dict
    claims: dict = field(default_factory=dict)
    timestamps: dict = field(default_factory=dict)
    locked: bool = False
    dropped: int = 0
    now: float = 0.0
    t_lost: float | None = None

    def __post_init__(self):
        self.claims.setdefault(self.agent_id, Claim(None, 0.0, 0))
        self.timestamps.setdefault(self.agent_id, self.now)

    def _live(self, k):
        if k == self.agent_id or self.t_lost is None:
            return True
        return self.now - self.timestamps.get(k, -math.inf) <= self.t_lost

    @property
    def winner_lists(self) -> dict:
        return {j: [(k, c.bid) for k, c in lst] for j, lst in self._ranked().items()}

    def _ranked(self):
        lists = {j: [] for j in self.capacities}
        for k, c in self.claims.items():
            if c.task_id is not None and c.task_id in lists and self._live(k):
                lists[c.task_id].append((k, c))
        for j, lst in lists.items():
            lst.sort(key=lambda e: _rank_key(e[0], e[1].bid, e[1].locked))
            del lst[self.capacities[j]:]
        return lists

    @property
    def my_task(self):
        c = self.claims[self.agent_id]
        if c.task_id is None:
            return None
        if any(k == self.agent_id for k, _ in self.winner_lists.get(c.task_id, [])):
            return c.task_id
        return None

    def snapshot(self) -> "AllocationState":
        return copy.deepcopy(self)

    def _set_claim(self, task_id, bid, locked=False):
        old = self.claims[self.agent_id]
        self.claims[self.agent_id] = Claim(task_id, bid, old.version + 1, locked)

    def lock(self):
        """Commit to the held task; the claim can no longer be outbid."""
        own = self.claims[self.agent_id]
        if own.task_id is None:
            raise ValueError(f"agent {self.agent_id} holds no task to lock")
        self.locked = True
        if not own.locked:
            self._set_claim(own.task_id, own.bid, locked=True)

    def shallow_snapshot(self) -> "AllocationState":
        """Cheap immutable-by-convention copy for broadcasting (claims are frozen)."""
        return AllocationState(self.agent_id, self.capacities, dict(self.claims), dict(self.timestamps),
                               self.locked, self.dropped, self.now, self.t_lost)


def _enterable(ranked, capacities, agent_id, task_id, s):
    lst = ranked[task_id]
    if len(lst) < capacities[task_id]:
        return True
    k, c = lst[-1]
    return _rank_key(agent_id, s) < _rank_key(k, c.bid, c.locked)


def bid_options(state, tasks, scores):
    """Tasks this agent could currently enter, best first."""
    ranked = state._ranked()
    opts = [(s, t.id) for t, s in zip(tasks, scores)
            if _enterable(ranked, state.capacities, state.agent_id, t.id, s)]
    opts.sort(key=lambda e: (-e[0], e[1]))
    return opts


def wants_to_bid(state, tasks, scores) -> bool:
    return state.claims[state.agent_id].task_id is None and bool(bid_options(state, tasks, scores))


def task_scores(agent_position, tasks, centroids=None):
    if centroids is None:
        return [score(agent_position, t, t.centroid) for t in tasks]
    return [score(agent_position, t, centroids[t.building_id]) for t in tasks]


def build_bid_phase(state: AllocationState, tasks, agent_position, centroids=None, scores=None) -> AllocationState:
    """Bid on the best enterable task when holding none.

    ``centroids`` maps building id to its centroid; by default each task's
    own ``centroid`` is used.  Precomputed ``scores`` skip the scoring.
    """
    if state.claims[state.agent_id].task_id is not None:
        return state
    if scores is None:
        scores = task_scores(agent_position, tasks, centroids)
    opts = bid_options(state, tasks, scores)
    if opts:
        s, j = opts[0]
        state._set_claim(j, s)
    return state


def _valid_message(msg) -> bool:
    return (isinstance(getattr(msg, "agent_id", None), (int, np.integer))
            and isinstance(getattr(msg, "claims", None), dict)
            and isinstance(getattr(msg, "timestamps", None), dict))


def consensus_phase(state: AllocationState, messages, now: float | None = None) -> AllocationState:
    """Merge neighbour tables into ``state``; withdraw if outbid."""
    if now is not None:
        state.now = now
    state.timestamps[state.agent_id] = state.now
    for msg in messages:
        if not _valid_message(msg):
            state.dropped += 1
            continue
        for k, c in msg.claims.items():
            if k == state.agent_id:
                continue
            mine = state.claims.get(k)
            if mine is None or c.version > mine.version:
                state.claims[k] = c
        for k, t in msg.timestamps.items():
            if k != state.agent_id and t > state.timestamps.get(k, -math.inf):
                state.timestamps[k] = t
    own = state.claims[state.agent_id]
    if own.task_id is not None and state.my_task is None and not state.locked:
        state._set_claim(None, 0.0)
    return state


def is_converged(states, tasks=None, scores=None) -> bool:
    """All agents agree on every winner list and nobody intends to bid.

    ``scores[i]`` is the score vector of ``states[i]`` over ``tasks``; without
    them the bid check is skipped.
    """
    states = list(states)
    if not states:
        return True
    ref = states[0].winner_lists
    for s in states[1:]:
        if s.winner_lists != ref:
            return False
    if tasks is not None and scores is not None:
        for s, sc in zip(states, scores):
            if wants_to_bid(s, tasks, sc):
                return False
    for s in states:
        if s.claims[s.agent_id].task_id is not None and s.my_task is None:
            return False
    return True


def check_feasible(assignment, tasks) -> bool:
    """At most one task per agent and at most capacity agents per task."""
    count = {t.id: 0 for t in tasks}
    for j in assignment.values():
        if j is not None:
            count[j] += 1
    return all(count[t.id] <= t.capacity for t in tasks)


def run_allocation(positions, tasks, centroids=None, adjacency=None, max_rounds=500, trace=None):
    """Run lock-step bid/consensus rounds until convergence.

    ``positions`` maps agent id to position; ``adjacency`` maps agent id to the
    ids it hears (fully connected when ``None``).  Returns ``(states, rounds)``;
    ``rounds`` is ``None`` if ``max_rounds`` was hit.
    """
    ids = sorted(positions)
    caps = {t.id: t.capacity for t in tasks}
    states = {i: AllocationState(i, dict(caps)) for i in ids}
    scores = {i: task_scores(positions[i], tasks, centroids) for i in ids}
    if adjacency is None:
        adjacency = {i: [k for k in ids if k != i] for i in ids}
    for rnd in range(1, max_rounds + 1):
        for i in ids:
            build_bid_phase(states[i], tasks, positions[i], scores=scores[i])
        snaps = {i: states[i].shallow_snapshot() for i in ids}
        for i in ids:
            consensus_phase(states[i], [snaps[k] for k in sorted(adjacency[i])], now=float(rnd))
        if trace is not None:
            trace.extend(trace_records(rnd, states))
        if is_converged([states[i] for i in ids], tasks, [scores[i] for i in ids]):
            return states, rnd
    return states, None


def assignment_of(states) -> dict:
    return {i: s.my_task for i, s in states.items()}


def greedy_assignment(positions, tasks, centroids=None) -> dict:
    """Centralised sequential greedy auction with the same tie rules."""
    ids = sorted(positions)
    pairs = [(s, i, t.id) for i in ids for t, s in zip(tasks, task_scores(positions[i], tasks, centroids))]
    pairs.sort(key=lambda e: (-e[0], e[1], e[2]))
    left = {t.id: t.capacity for t in tasks}
    out = {i: None for i in ids}
    for _, i, j in pairs:
        if out[i] is None and left[j] > 0:
            out[i] = j
            left[j] -= 1
    return out


TRACE_COLUMNS = ("round", "agent_id", "task_id", "rank", "winner_id", "bid")


def trace_records(rnd, states):
    rows = []
    for i in sorted(states):
        for j, lst in sorted(states[i].winner_lists.items()):
            for rank, (k, b) in enumerate(lst, start=1):
                rows.append((rnd, i, j, rank, k, b))
    return rows


def write_trace(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in rows:
            w.writerow([*r[:5], f"{r[5]:.9g}"])
