"""Scenario files (``.scn``): YAML with units spelled out in the key names.

Every error carries the line it was found on and an exit status that tells
scripts what kind of problem it was.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .geometry import Building, CameraSpec, GeometryError, is_simple
from .simkernel import AddAgent, CommsModel, EventScript, RemoveAgent

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_INVALID = 4
EXIT_POLYGON = 5
EXIT_IO = 6
EXIT_RUNTIME = 7


class ScenarioError(Exception):
    def __init__(self, message, line=None, code=EXIT_INVALID, path=None):
        self.message, self.line, self.code, self.path = message, line, code, path
        where = f"{path or '<scenario>'}:{line}" if line else str(path or "<scenario>")
        super().__init__(f"{where}: {message}")


@dataclass
class Scenario:
    buildings: list
    camera: CameraSpec
    agent_count: int
    agent_speed: float = 2.0
    dwell_time: float = 3.0
    comms: CommsModel = field(default_factory=CommsModel)
    events: EventScript = field(default_factory=EventScript)
    duration: float = 1800.0
    seeds: list = field(default_factory=lambda: [0])
    spawn_box: tuple = ((0.0, 0.0), (30.0, 30.0))
    clearance: float = 1.0
    capacity_weighting: str = "viewpoints"
    name: str = "scenario"
    source: str | None = None

    def effective_config(self) -> dict:
        """Every parameter the run uses, defaults included."""
        ev = []
        for t, e in self.events.events:
            if isinstance(e, RemoveAgent):
                ev.append({"time_s": t, "remove_agent": e.agent_id})
            else:
                ev.append({"time_s": t, "add_agent": e.agent_id, "position_m": list(e.position)})
        return {
            "name": self.name,
            "duration_s": self.duration,
            "seeds": list(self.seeds),
            "camera": {"fov_width_deg": self.camera.fov_width, "fov_height_deg": self.camera.fov_height,
                       "standoff_m": self.camera.standoff},
            "agents": {"count": self.agent_count, "speed_mps": self.agent_speed, "dwell_s": self.dwell_time,
                       "spawn_box_m": [list(self.spawn_box[0]), list(self.spawn_box[1])]},
            "comms": {"range_m": self.comms.range, "los_blocking": self.comms.los_blocking,
                      "loss_probability": self.comms.loss},
            "planning": {"clearance_m": self.clearance, "capacity_weighting": self.capacity_weighting},
            "buildings": [{"id": b.id, "height_m": b.height, "priority": b.priority,
                           "footprint_m": [list(p) for p in b.footprint]} for b in self.buildings],
            "events": ev,
            "kernel": {"dt_s": 0.1, "algorithm_period_s": 1.0},
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.effective_config(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


# -- YAML with line numbers -----------------------------------------------------

class _Node:
    """A plain value plus the 1-based line it came from."""

    __slots__ = ("value", "line")

    def __init__(self, value, line):
        self.value, self.line = value, line


def _scalar(node):
    return yaml.constructor.SafeConstructor().construct_object(node, deep=True)


def _convert(node):
    line = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        out = {}
        for k, v in node.value:
            if not isinstance(k, yaml.ScalarNode):
                raise ScenarioError("mapping keys must be plain names", k.start_mark.line + 1, EXIT_PARSE)
            key = k.value
            if key in out:
                raise ScenarioError(f"duplicate key {key!r}", k.start_mark.line + 1, EXIT_PARSE)
            out[key] = _convert(v)
        return _Node(out, line)
    if isinstance(node, yaml.SequenceNode):
        return _Node([_convert(v) for v in node.value], line)
    return _Node(_scalar(node), line)


class _Reader:
    def __init__(self, path):
        self.path = path

    def fail(self, msg, node_or_line, code=EXIT_INVALID):
        line = node_or_line.line if isinstance(node_or_line, _Node) else node_or_line
        raise ScenarioError(msg, line, code, self.path)

    def mapping(self, node, what, allowed, required=()):
        if not isinstance(node.value, dict):
            self.fail(f"{what} must be a mapping", node)
        for k, v in node.value.items():
            if k not in allowed:
                self.fail(f"unknown key {k!r} in {what}", v)
        for k in required:
            if k not in node.value:
                self.fail(f"{what} is missing {k!r}", node)
        return node.value

    def number(self, node, what, positive=False, nonneg=False, integer=False):
        v = node.value
        ok = isinstance(v, int) if integer else isinstance(v, (int, float))
        if isinstance(v, bool) or not ok:
            self.fail(f"{what} must be {'an integer' if integer else 'a number'}, got {v!r}", node)
        if positive and not v > 0:
            self.fail(f"{what} must be positive, got {v!r}", node)
        if nonneg and v < 0:
            self.fail(f"{what} must be non-negative, got {v!r}", node)
        return int(v) if integer else float(v)

    def boolean(self, node, what):
        if not isinstance(node.value, bool):
            self.fail(f"{what} must be true or false", node)
        return node.value

    def point(self, node, what, dim):
        if not isinstance(node.value, list) or len(node.value) != dim:
            self.fail(f"{what} must be a list of {dim} numbers", node)
        return tuple(self.number(c, what) for c in node.value)


_TOP = {"name", "description", "duration_s", "seeds", "camera", "agents", "comms", "planning",
        "buildings", "events"}


def parse_scenario(text: str, path=None) -> Scenario:
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ScenarioError(f"YAML syntax error: {getattr(exc, 'problem', exc)}",
                            mark.line + 1 if mark else None, EXIT_PARSE, path) from None
    if root is None:
        raise ScenarioError("empty scenario file", 1, EXIT_PARSE, path)
    r = _Reader(path)
    try:
        doc = _convert(root)
    except ScenarioError as exc:
        raise ScenarioError(exc.message, exc.line, exc.code, path) from None
    top = r.mapping(doc, "scenario", _TOP, required=("camera", "agents", "buildings"))

    cam_m = r.mapping(top["camera"], "camera", {"fov_width_deg", "fov_height_deg", "standoff_m"},
                      required=("fov_width_deg", "fov_height_deg", "standoff_m"))
    try:
        camera = CameraSpec(r.number(cam_m["fov_width_deg"], "camera.fov_width_deg"),
                            r.number(cam_m["fov_height_deg"], "camera.fov_height_deg"),
                            r.number(cam_m["standoff_m"], "camera.standoff_m"))
    except ValueError as exc:
        r.fail(str(exc), top["camera"])

    ag = r.mapping(top["agents"], "agents", {"count", "speed_mps", "dwell_s", "spawn_box_m"}, required=("count",))
    count = r.number(ag["count"], "agents.count", positive=True, integer=True)
    speed = r.number(ag["speed_mps"], "agents.speed_mps", positive=True) if "speed_mps" in ag else 2.0
    dwell = r.number(ag["dwell_s"], "agents.dwell_s", positive=True) if "dwell_s" in ag else 3.0
    spawn = ((0.0, 0.0), (30.0, 30.0))
    if "spawn_box_m" in ag:
        box = ag["spawn_box_m"]
        if not isinstance(box.value, list) or len(box.value) != 2:
            r.fail("agents.spawn_box_m must be [[x0, y0], [x1, y1]]", box)
        lo, hi = (r.point(c, "agents.spawn_box_m corner", 2) for c in box.value)
        if not (lo[0] < hi[0] and lo[1] < hi[1]):
            r.fail("agents.spawn_box_m: first corner must be below and left of the second", box)
        spawn = (lo, hi)

    comms = CommsModel()
    if "comms" in top:
        cm = r.mapping(top["comms"], "comms", {"range_m", "los_blocking", "loss_probability"})
        rng_m = r.number(cm["range_m"], "comms.range_m", positive=True) if "range_m" in cm else 50.0
        los = r.boolean(cm["los_blocking"], "comms.los_blocking") if "los_blocking" in cm else False
        loss = r.number(cm["loss_probability"], "comms.loss_probability", nonneg=True) if "loss_probability" in cm else 0.0
        if loss >= 1:
            r.fail("comms.loss_probability must be below 1", cm["loss_probability"])
        comms = CommsModel(rng_m, los, loss)

    clearance, weighting = 1.0, "viewpoints"
    if "planning" in top:
        pm = r.mapping(top["planning"], "planning", {"clearance_m", "capacity_weighting"})
        if "clearance_m" in pm:
            clearance = r.number(pm["clearance_m"], "planning.clearance_m", nonneg=True)
        if "capacity_weighting" in pm:
            weighting = pm["capacity_weighting"].value
            if weighting not in ("viewpoints", "length"):
                r.fail("planning.capacity_weighting must be 'viewpoints' or 'length'", pm["capacity_weighting"])

    duration = r.number(top["duration_s"], "duration_s", positive=True) if "duration_s" in top else 1800.0
    seeds = [0]
    if "seeds" in top:
        sn = top["seeds"]
        if not isinstance(sn.value, list) or not sn.value:
            r.fail("seeds must be a non-empty list of integers", sn)
        seeds = [r.number(s, "seed", nonneg=True, integer=True) for s in sn.value]

    bl = top["buildings"]
    if not isinstance(bl.value, list) or not bl.value:
        r.fail("buildings must be a non-empty list", bl)
    buildings, ids = [], set()
    for k, bn in enumerate(bl.value):
        what = f"buildings[{k}]"
        bm = r.mapping(bn, what, {"id", "height_m", "priority", "footprint_m", "name"},
                       required=("height_m", "footprint_m"))
        bid = r.number(bm["id"], f"{what}.id", integer=True) if "id" in bm else k + 1
        if bid in ids:
            r.fail(f"duplicate building id {bid}", bm.get("id", bn))
        ids.add(bid)
        h = r.number(bm["height_m"], f"{what}.height_m", positive=True)
        prio = r.number(bm["priority"], f"{what}.priority", nonneg=True, integer=True) if "priority" in bm else 0
        fp = bm["footprint_m"]
        if not isinstance(fp.value, list):
            r.fail(f"{what}.footprint_m must be a list of [x, y] points", fp)
        pts = [r.point(p, f"{what}.footprint_m vertex", 2) for p in fp.value]
        if len(pts) < 3:
            r.fail(f"{what}.footprint_m needs at least 3 vertices", fp, EXIT_POLYGON)
        if len(pts) > 3 and pts[0] == pts[-1]:
            pts = pts[:-1]
        try:
            if not is_simple(pts):
                r.fail(f"{what}: footprint polygon is not simple (edges cross or touch)", fp, EXIT_POLYGON)
            buildings.append(Building(bid, tuple(pts), h, prio))
        except GeometryError as exc:
            r.fail(f"{what}: {exc}", fp, EXIT_POLYGON)

    if count < len(buildings):
        r.fail(f"agents.count = {count} but there are {len(buildings)} buildings; "
               "at least one agent per building is required", ag["count"])

    events = []
    if "events" in top:
        en = top["events"]
        if not isinstance(en.value, list):
            r.fail("events must be a list", en)
        last = -1.0
        for k, e in enumerate(en.value):
            what = f"events[{k}]"
            em = r.mapping(e, what, {"time_s", "remove_agent", "add_agent", "position_m"}, required=("time_s",))
            t = r.number(em["time_s"], f"{what}.time_s", nonneg=True)
            if t < last:
                r.fail(f"{what}: event times must be non-decreasing", em["time_s"])
            last = t
            if ("remove_agent" in em) == ("add_agent" in em):
                r.fail(f"{what} needs exactly one of remove_agent or add_agent", e)
            if "remove_agent" in em:
                events.append((t, RemoveAgent(r.number(em["remove_agent"], f"{what}.remove_agent",
                                                       nonneg=True, integer=True))))
            else:
                if "position_m" not in em:
                    r.fail(f"{what}: add_agent needs position_m", e)
                pos = r.point(em["position_m"], f"{what}.position_m", 3)
                if pos[2] < 0:
                    r.fail(f"{what}: agents cannot start below ground", em["position_m"])
                events.append((t, AddAgent(r.number(em["add_agent"], f"{what}.add_agent", nonneg=True,
                                                    integer=True), pos)))

    name = str(top["name"].value) if "name" in top else (Path(path).stem if path else "scenario")
    return Scenario(buildings, camera, count, speed, dwell, comms, EventScript(events), duration, seeds,
                    spawn, clearance, weighting, name, str(path) if path else None)


def load_scenario(path) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc.strerror or exc}", None, EXIT_IO, path) from None
    return parse_scenario(text, path)


def bundled(name: str = "paper_like.scn") -> Path:
    """Path of a scenario shipped with the package."""
    return Path(__file__).parent / "data" / name


def dump_scenario(scn: Scenario) -> str:
    cfg = scn.effective_config()
    cfg.pop("kernel")
    return yaml.safe_dump(cfg, sort_keys=False)


__all__ = ["Scenario", "ScenarioError", "parse_scenario", "load_scenario", "bundled", "dump_scenario",
           "EXIT_OK", "EXIT_USAGE", "EXIT_PARSE", "EXIT_INVALID", "EXIT_POLYGON", "EXIT_IO", "EXIT_RUNTIME"]
