"""Fixed-step world simulation.

Physics runs every ``dt`` (0.1 s); every ``algo_every`` steps (1 Hz) the
kernel applies broadcasts, runs allocation or the patrol decision logic, and
samples idleness.  Time is kept as an integer step counter so runs are exactly
reproducible.
"""
from __future__ import annotations

import logging
import math
import time as _time
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import allocation as al
from . import patrol as pt
from .metrics import IdlenessLedger, record_visit, sample_max_idleness
from .pathplan.visibility import ObstacleError, segment_blocked_3d

log = logging.getLogger(__name__)

ALLOCATING = "allocating"
PATROLLING = "patrolling"
REMOVED = "removed"


@dataclass
class AgentBody:
    id: int
    position: tuple
    speed: float = 2.0
    bearing: float = 0.0
    tilt: float = 0.0
    alive: bool = True

    def __post_init__(self):
        if self.speed < 0:
            raise ValueError("speed must be non-negative")
        self.position = tuple(float(v) for v in self.position)
        if self.position[2] < 0:
            raise ValueError("agents cannot start below ground")


@dataclass(frozen=True)
class CommsModel:
    range: float = 50.0
    los_blocking: bool = False
    loss: float = 0.0

    def __post_init__(self):
        if not self.range > 0:
            raise ValueError("comms range must be positive")
        if not 0.0 <= self.loss < 1.0:
            raise ValueError("loss probability must be in [0, 1)")


@dataclass(frozen=True)
class RemoveAgent:
    agent_id: int


@dataclass(frozen=True)
class AddAgent:
    agent_id: int
    position: tuple


@dataclass
class EventScript:
    events: list = field(default_factory=list)

    def __post_init__(self):
        times = [t for t, _ in self.events]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("event times must be non-decreasing")


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.1
    algo_every: int = 10
    speed: float = 2.0
    dwell: float = 3.0
    comms: CommsModel = CommsModel()
    alloc_max_ticks: int = 120
    t_lost: float = al.T_LOST
    seed: int = 0


@dataclass(frozen=True)
class Broadcast:
    agent_id: int
    patrol: pt.PatrolMessage | None
    alloc: al.AllocationState | None


@dataclass
class Agent:
    body: AgentBody
    alloc: al.AllocationState
    rng: np.random.Generator
    scores: list
    mode: str = ALLOCATING
    patrol: pt.PatrolState | None = None
    route: list = field(default_factory=list)
    target_slot: int | None = None
    at_slot: int | None = None
    joined_tick: int | None = None


@dataclass
class Timings:
    decision_total: float = 0.0
    decision_max: float = 0.0
    decision_count: int = 0
    routing_total: float = 0.0
    routing_max: float = 0.0
    routing_count: int = 0
    decision_samples: list = field(default_factory=list)

    def add_decision(self, s):
        self.decision_samples.append(s)
        self.decision_total += s
        self.decision_max = max(self.decision_max, s)
        self.decision_count += 1

    def add_routing(self, s):
        self.routing_total += s
        self.routing_max = max(self.routing_max, s)
        self.routing_count += 1

    def as_dict(self):
        def ms(total, n):
            return 1e3 * total / n if n else 0.0
        return {
            "patrol_step_mean_ms": ms(self.decision_total, self.decision_count),
            "patrol_step_p99_ms": (1e3 * float(np.percentile(self.decision_samples, 99))
                                   if self.decision_samples else 0.0),
            "patrol_step_max_ms": 1e3 * self.decision_max,
            "patrol_step_count": self.decision_count,
            "routing_mean_ms": ms(self.routing_total, self.routing_count),
            "routing_max_ms": 1e3 * self.routing_max,
            "routing_count": self.routing_count,
        }


@dataclass
class WorldState:
    plan: object
    config: SimConfig
    agents: dict
    ledger: IdlenessLedger
    events: list
    rng: np.random.Generator
    steps: int = 0
    phase: str = "allocation"
    alloc_ticks: int = 0
    alloc_rounds: int | None = None
    inboxes: dict = field(default_factory=dict)
    timings: Timings = field(default_factory=Timings)
    skipped_events: int = 0
    visits: list = field(default_factory=list)
    tick_hook: object = None

    @property
    def time(self) -> float:
        return self.steps * self.config.dt

    @property
    def tasks(self):
        return self.plan.tasks

    def alive_ids(self):
        return [i for i in sorted(self.agents) if self.agents[i].body.alive]


def agent_rng(seed, agent_id):
    return np.random.default_rng([int(seed), int(agent_id)])


def spawn_positions(n, box, buildings, rng, clearance=1.0, first_id=0):
    """Uniform samples in ``box = ((x0, y0), (x1, y1))`` at 2-10 m altitude,
    rejecting points inside any grown building."""
    from .geometry import inside_clearance

    (x0, y0), (x1, y1) = box
    out = {}
    i = first_id
    tries = 0
    while len(out) < n:
        tries += 1
        if tries > 1000 * max(n, 1):
            raise ValueError("spawn box is (almost) entirely inside buildings")
        p = np.array([rng.uniform(x0, x1), rng.uniform(y0, y1), rng.uniform(2.0, 10.0)])
        if any(inside_clearance(p[None], b, clearance)[0] for b in buildings):
            continue
        out[i] = tuple(float(v) for v in p)
        i += 1
    return out


def _new_agent(world_or_plan, agent_id, position, config):
    plan = world_or_plan
    caps = {t.id: t.capacity for t in plan.tasks}
    state = al.AllocationState(agent_id, caps, t_lost=config.t_lost)
    body = AgentBody(agent_id, position, speed=config.speed)
    return Agent(body, state, agent_rng(config.seed, agent_id), al.task_scores(body.position, plan.tasks))


def make_world(plan, spawn, config: SimConfig = SimConfig(), events: EventScript | None = None) -> WorldState:
    """``spawn`` maps agent id to start position."""
    agents = {i: _new_agent(plan, i, spawn[i], config) for i in sorted(spawn)}
    ids = [vid for t in plan.tasks for vid in t.path.viewpoint_ids]
    ev = list((events or EventScript()).events)
    return WorldState(plan, config, agents, IdlenessLedger(ids), ev, np.random.default_rng([int(config.seed)]))


# -- messages -----------------------------------------------------------------

def _los_clear(world, a, b):
    return not any(segment_blocked_3d(a, b, bld, 0.0) for bld in world.plan.oracle.buildings)


def deliver_messages(world: WorldState, broadcasts=None) -> dict:
    """Range-limited (and optionally line-of-sight) broadcast delivery.

    Returns ``receiver id -> list of Broadcast`` sorted by sender id.
    """
    ids = world.alive_ids()
    if broadcasts is None:
        broadcasts = {i: Broadcast(i, None, None) for i in ids}
    inboxes = {i: [] for i in ids}
    if len(ids) < 2:
        return inboxes
    P = np.array([world.agents[i].body.position for i in ids])
    comms = world.config.comms
    pairs = sorted(cKDTree(P).query_pairs(comms.range, output_type="set"))
    for a, b in pairs:
        i, k = ids[a], ids[b]
        if comms.los_blocking and not _los_clear(world, P[a], P[b]):
            continue
        if comms.loss > 0:
            for src, dst in ((i, k), (k, i)):
                if world.rng.random() >= comms.loss:
                    inboxes[dst].append(broadcasts[src])
        else:
            inboxes[k].append(broadcasts[i])
            inboxes[i].append(broadcasts[k])
    for i in ids:
        inboxes[i].sort(key=lambda m: m.agent_id)
    return inboxes


# -- routing and motion -------------------------------------------------------

def _path_vps(world, task_id):
    cache = world.__dict__.setdefault("_vp_cache", {})
    got = cache.get(task_id)
    if got is None:
        task = world.plan.tasks[task_id]
        vps = world.plan.path_viewpoints(task)
        got = (vps, [v.position for v in vps])
        cache[task_id] = got
    return got


def _set_route(world, agent, slot):
    t0 = _time.perf_counter()
    st = agent.patrol
    vps, _ = _path_vps(world, st.task_id)
    goal = vps[slot - 1]
    if agent.at_slot is not None and agent.body.position == goal.position:
        pts = [goal.position]
    elif agent.at_slot is not None:
        pts = world.plan.slot_route(st.task_id, agent.at_slot, slot)[1:]
    else:
        try:
            pts = world.plan.oracle.route(agent.body.position, goal.position)[1:]
        except ObstacleError:
            pts = [goal.position]
    agent.route = [tuple(float(c) for c in p) for p in pts]
    agent.route[-1] = goal.position
    agent.target_slot = slot
    world.timings.add_routing(_time.perf_counter() - t0)


def _move(world, agent, dt):
    body = agent.body
    left = body.speed * dt
    pos = body.position
    route = agent.route
    while left > 0 and route:
        wp = route[0]
        d = math.dist(pos, wp)
        if d <= left + 1e-9:
            pos = wp
            left -= d
            route.pop(0)
        else:
            f = left / d
            pos = (pos[0] + (wp[0] - pos[0]) * f, pos[1] + (wp[1] - pos[1]) * f, pos[2] + (wp[2] - pos[2]) * f)
            left = 0.0
    if pos != body.position:
        agent.at_slot = None
    body.position = pos
    if not route and agent.target_slot is not None:
        vps, _ = _path_vps(world, agent.patrol.task_id)
        v = vps[agent.target_slot - 1]
        if pos == v.position:
            body.bearing, body.tilt = v.bearing, v.tilt
            agent.at_slot = agent.target_slot


def _physics(world, agent, dt):
    st = agent.patrol
    vps, _ = _path_vps(world, st.task_id)
    st.position = agent.body.position
    st, out = pt.service_step(st, vps, (agent.body.position, agent.body.bearing, agent.body.tilt), dt)
    if out.visited is not None:
        vid = vps[out.visited - 1].id
        t = (world.steps + 1) * world.config.dt
        record_visit(world.ledger, vid, t)
        world.visits.append((t, agent.body.id, vid))
    if out.target is not None:
        if out.target != agent.target_slot or not agent.route:
            _set_route(world, agent, out.target)
        _move(world, agent, dt)
    st.position = agent.body.position


# -- algorithm tick -----------------------------------------------------------

def _start_patrol(world, agent):
    task = world.plan.tasks[agent.alloc.my_task]
    agent.alloc.lock()
    _, pos = _path_vps(world, task.id)
    agent.patrol = pt.start_state(agent.body.id, task.id, agent.body.position, pos, agent.rng,
                                  dwell_time=world.config.dwell)
    agent.mode = PATROLLING
    agent.joined_tick = world.steps // world.config.algo_every
    agent.target_slot = None


def _algorithm_tick(world, t):
    cfg = world.config
    tasks = world.plan.tasks
    agents = world.agents
    ids = world.alive_ids()
    allocating = [i for i in ids if agents[i].mode == ALLOCATING]
    alloc_active = bool(allocating)

    for i in allocating:
        a = agents[i]
        al.build_bid_phase(a.alloc, tasks, a.body.position, scores=a.scores)
    held_before = {i: agents[i].alloc.claims[i].task_id for i in allocating}

    casts = {}
    for i in ids:
        a = agents[i]
        msg = a.patrol.message() if a.mode == PATROLLING else None
        snap = a.alloc.shallow_snapshot() if alloc_active else None
        casts[i] = Broadcast(i, msg, snap)
    world.inboxes = deliver_messages(world, casts)

    if alloc_active:
        for i in ids:
            al.consensus_phase(agents[i].alloc, [b.alloc for b in world.inboxes[i]], now=t)
        if world.phase == "allocation":
            world.alloc_ticks += 1
            states = [agents[i].alloc for i in allocating]
            done = al.is_converged(states, tasks, [agents[i].scores for i in allocating])
            if done or world.alloc_ticks >= cfg.alloc_max_ticks:
                world.alloc_rounds = world.alloc_ticks if done else None
                if not done:
                    log.warning("allocation not converged after %d ticks; starting with current winners",
                                world.alloc_ticks)
                world.phase = "patrol"
                for i in allocating:
                    if agents[i].alloc.my_task is not None:
                        _start_patrol(world, agents[i])
        else:
            # late arrivals commit once a bid survives a consensus round
            for i in allocating:
                a = agents[i]
                if a.alloc.my_task is not None and held_before[i] == a.alloc.my_task:
                    _start_patrol(world, a)

    for i in ids:
        a = agents[i]
        if a.mode != PATROLLING:
            continue
        st = a.patrol
        _, pos = _path_vps(world, st.task_id)
        before = st.current_index
        t0 = _time.perf_counter()
        pt.process_messages(st, [b.patrol for b in world.inboxes[i] if b.patrol is not None], pos)
        world.timings.add_decision(_time.perf_counter() - t0)
        if st.current_index != before:
            _set_route(world, a, st.current_index)

    sample_max_idleness(world.ledger, t)
    if world.tick_hook is not None:
        world.tick_hook(world, t)
    world.inboxes = {}


def _apply_events(world, t):
    while world.events and world.events[0][0] <= t + 1e-9:
        _, ev = world.events.pop(0)
        if isinstance(ev, RemoveAgent):
            a = world.agents.get(ev.agent_id)
            if a is None or not a.body.alive:
                log.warning("remove_agent: unknown or already removed agent %s; skipped", ev.agent_id)
                world.skipped_events += 1
                continue
            a.body.alive = False
            a.mode = REMOVED
            a.route = []
        elif isinstance(ev, AddAgent):
            if ev.agent_id in world.agents:
                log.warning("add_agent: agent id %s already exists; skipped", ev.agent_id)
                world.skipped_events += 1
                continue
            world.agents[ev.agent_id] = _new_agent(world.plan, ev.agent_id, ev.position, world.config)
        else:
            log.warning("unknown event %r; skipped", ev)
            world.skipped_events += 1


def step(world: WorldState, dt: float | None = None) -> WorldState:
    cfg = world.config
    if dt is not None and abs(dt - cfg.dt) > 1e-12:
        raise ValueError(f"the kernel runs at a fixed dt of {cfg.dt} s")
    t = world.time
    _apply_events(world, t)
    if world.steps % cfg.algo_every == 0:
        _algorithm_tick(world, t)
    for i in world.alive_ids():
        a = world.agents[i]
        if a.mode == PATROLLING:
            _physics(world, a, cfg.dt)
    world.steps += 1
    return world


def run(world: WorldState, duration: float) -> WorldState:
    """Step until ``duration`` seconds, then take the closing sample."""
    n = int(round(duration / world.config.dt))
    for _ in range(n - world.steps):
        step(world)
    if world.steps % world.config.algo_every == 0:
        _apply_events(world, world.time)
        sample_max_idleness(world.ledger, world.time)
    return world
