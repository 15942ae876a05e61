"""Command line front end: ``urbanpatrol {plan,allocate,simulate,validate}``.

Exit statuses: 0 success, 2 bad usage, 3 scenario parse error, 4 scenario
invariant violated, 5 non-simple or degenerate footprint, 6 I/O failure,
7 failure during a run.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import allocation as al
from . import metrics as mt
from . import simkernel as sk
from .geometry import building_viewpoints
from .pathplan.tasks import plan_scenario, write_tours
from .scenario import (EXIT_INVALID, EXIT_IO, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, Scenario, ScenarioError,
                       load_scenario)

log = logging.getLogger("urbanpatrol")


class RunFailure(RuntimeError):
    def __init__(self, seed, tick, cause):
        self.seed, self.tick, self.cause = seed, tick, cause
        super().__init__(f"run with seed {seed} failed at tick {tick}: {cause!r}")


def run_id(seed) -> str:
    return f"seed-{seed:04d}"


def spawn_for(scn: Scenario, seed: int):
    return sk.spawn_positions(scn.agent_count, scn.spawn_box, scn.buildings,
                              np.random.default_rng([int(seed), 1, 0]), scn.clearance)


def sim_config(scn: Scenario, seed: int) -> sk.SimConfig:
    return sk.SimConfig(speed=scn.agent_speed, dwell=scn.dwell_time, comms=scn.comms, seed=int(seed))


def make_plan(scn: Scenario):
    return plan_scenario(scn.buildings, scn.camera, scn.agent_count, scn.clearance, scn.capacity_weighting)


def simulate_seed(scn: Scenario, plan, seed: int, duration: float | None = None):
    """One isolated run; returns the finished world."""
    world = sk.make_world(plan, spawn_for(scn, seed), sim_config(scn, seed), scn.events)
    try:
        sk.run(world, duration or scn.duration)
    except Exception as exc:  # surface where it broke
        raise RunFailure(seed, world.steps // world.config.algo_every, exc) from exc
    return world


def _result(world, seed, wall):
    return {
        "seed": seed,
        "ledger": world.ledger,
        "timings": world.timings.as_dict(),
        "wall_clock_s": wall,
        "allocation_rounds": world.alloc_rounds,
        "agents_patrolling": sum(a.mode == sk.PATROLLING for a in world.agents.values()),
        "skipped_events": world.skipped_events,
    }


_WORKER = {}


def _init_worker(scn, plan, duration):
    _WORKER.update(scn=scn, plan=plan, duration=duration)


def _work(seed):
    t0 = time.perf_counter()
    w = simulate_seed(_WORKER["scn"], _WORKER["plan"], seed, _WORKER["duration"])
    return _result(w, seed, time.perf_counter() - t0)


def write_viewpoints(path, plan) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["viewpoint_id", "building_id", "surface", "x_m", "y_m", "z_m", "bearing_deg", "tilt_deg"])
        for vid in sorted(plan.viewpoints):
            v = plan.viewpoints[vid]
            x, y, z = v.position
            kind = v.patch.kind if v.patch is not None else ""
            w.writerow([vid, v.building_id, kind, f"{x:.4f}", f"{y:.4f}", f"{z:.4f}",
                        f"{v.bearing:.4f}", f"{v.tilt:.4f}"])


def _plan_manifest(plan, plan_wall):
    return {
        "wall_clock_s": plan_wall,
        "viewpoint_count": len(plan.viewpoints),
        "tasks": [{"task_id": t.id, "building_id": t.building_id, "viewpoints": len(t.path),
                   "capacity": t.capacity, "path_length_m": round(t.path.length, 3),
                   "christofides_ms": round(1e3 * plan.tour_seconds[t.building_id], 4),
                   "distance_table_s": round(plan.table_seconds[t.building_id], 4)} for t in plan.tasks],
    }


def run_batch(scn: Scenario, output_dir, seeds=None, duration=None, parallel=1, plan=None) -> int:
    """Plan once, simulate every seed, write all outputs; returns an exit status."""
    out = Path(output_dir)
    seeds = list(scn.seeds if seeds is None else seeds)
    try:
        (out / "runs").mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        log.error("cannot create output directory %s: %s", out, exc)
        return EXIT_IO
    t0 = time.perf_counter()
    plan = plan or make_plan(scn)
    plan_wall = time.perf_counter() - t0
    lap = max(plan.lap_time(t, scn.agent_speed, scn.dwell_time) for t in plan.tasks)

    results = {}
    try:
        if parallel > 1 and len(seeds) > 1:
            with ProcessPoolExecutor(max_workers=min(parallel, len(seeds)), initializer=_init_worker,
                                     initargs=(scn, plan, duration)) as ex:
                for r in ex.map(_work, seeds):
                    results[r["seed"]] = r
        else:
            _init_worker(scn, plan, duration)
            for s in seeds:
                results[s] = _work(s)
    except RunFailure as exc:
        log.error("%s", exc)
        return EXIT_RUNTIME

    try:
        ordered = [results[s] for s in seeds]
        mt.write_timeseries(out / "timeseries.csv", [(run_id(r["seed"]), r["ledger"]) for r in ordered])
        mt.write_summary(out / "summary.csv",
                         [mt.summary_row(run_id(r["seed"]), r["seed"], r["ledger"], scn.agent_count)
                          for r in ordered])
        for r in ordered:
            d = out / "runs" / run_id(r["seed"])
            d.mkdir(parents=True, exist_ok=True)
            mt.write_per_viewpoint(d / "per_viewpoint.csv", r["ledger"])
            mt.plot_svg(d / "max_idleness.svg", r["ledger"].series,
                        title=f"{scn.name} {run_id(r['seed'])}", bound=lap)
        write_viewpoints(out / "viewpoints.csv", plan)
        write_tours(out / "tours.csv", plan)
        incomplete = [run_id(r["seed"]) for r in ordered if r["ledger"].coverage_complete_time is None]
        for rid in incomplete:
            log.warning("%s: coverage not complete within the run", rid)
        manifest = {
            "scenario": scn.source,
            "config_hash": scn.config_hash(),
            "effective_config": scn.effective_config(),
            "seeds": seeds,
            "duration_s": duration or scn.duration,
            "largest_lap_time_s": lap,
            "coverage_incomplete": incomplete,
            "plan": _plan_manifest(plan, plan_wall),
            "runs": [{"run_id": run_id(r["seed"]), "seed": r["seed"], "wall_clock_s": r["wall_clock_s"],
                      "allocation_rounds": r["allocation_rounds"], "agents_patrolling": r["agents_patrolling"],
                      "skipped_events": r["skipped_events"], **r["timings"]} for r in ordered],
            "host": {"python": platform.python_version(), "machine": platform.machine(),
                     "cpu_count": os.cpu_count()},
        }
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    except OSError as exc:
        log.error("writing outputs failed: %s", exc)
        return EXIT_IO
    return EXIT_OK


# -- verbs ------------------------------------------------------------------

def _parse_seeds(text):
    seeds = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            a, b = part.split("-", 1)
            seeds.extend(range(int(a), int(b) + 1))
        else:
            seeds.append(int(part))
    if not seeds or any(s < 0 for s in seeds):
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}")
    return seeds


def _positive(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _with_overrides(scn: Scenario, args) -> Scenario:
    if getattr(args, "los", None) is not None:
        scn = dataclasses.replace(scn, comms=dataclasses.replace(scn.comms, los_blocking=args.los))
    if getattr(args, "duration", None) is not None:
        scn = dataclasses.replace(scn, duration=args.duration)
    if getattr(args, "seeds", None) is not None:
        scn = dataclasses.replace(scn, seeds=args.seeds)
    return scn


def cmd_validate(scn, args):
    vps = building_viewpoints(scn.buildings, scn.camera, scn.clearance)
    total = sum(len(v) for v in vps.values())
    print(f"{scn.name}: {len(scn.buildings)} buildings, {total} viewpoints, {scn.agent_count} agents "
          f"(1 agent per {total / scn.agent_count:.1f} viewpoints), {scn.duration:g} s, {len(scn.seeds)} seeds")
    for b in scn.buildings:
        print(f"  building {b.id}: {len(vps[b.id])} viewpoints, height {b.height:g} m, priority {b.priority}")
    if total == 0:
        print("no viewpoints: nothing to patrol", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def cmd_plan(scn, args):
    out = Path(args.out)
    plan = make_plan(scn)
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_viewpoints(out / "viewpoints.csv", plan)
        write_tours(out / "tours.csv", plan)
        (out / "plan.json").write_text(json.dumps(_plan_manifest(plan, None), indent=2) + "\n")
    except OSError as exc:
        log.error("writing plan failed: %s", exc)
        return EXIT_IO
    for t in plan.tasks:
        print(f"task {t.id} (building {t.building_id}): {len(t.path)} viewpoints, "
              f"{t.path.length:.0f} m, capacity {t.capacity}")
    return EXIT_OK


def cmd_allocate(scn, args):
    out = Path(args.out)
    plan = make_plan(scn)
    seed = scn.seeds[0]
    world = sk.make_world(plan, spawn_for(scn, seed), sim_config(scn, seed))
    trace = []
    seen = [0]

    def hook(w, t):
        if w.alloc_ticks > seen[0]:
            seen[0] = w.alloc_ticks
            trace.extend(al.trace_records(w.alloc_ticks, {i: a.alloc for i, a in w.agents.items()}))

    world.tick_hook = hook
    try:
        while world.phase == "allocation":
            sk.step(world)
    except Exception as exc:
        log.error("%s", RunFailure(seed, world.steps // world.config.algo_every, exc))
        return EXIT_RUNTIME
    try:
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "assignment.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["agent_id", "task_id", "building_id", "bid"])
            for i, a in sorted(world.agents.items()):
                j = a.alloc.my_task
                bid = a.alloc.claims[i].bid if j is not None else ""
                w.writerow([i, "" if j is None else j, "" if j is None else plan.tasks[j].building_id,
                            "" if j is None else f"{bid:.9g}"])
        al.write_trace(out / "allocation_trace.csv", trace)
    except OSError as exc:
        log.error("writing allocation failed: %s", exc)
        return EXIT_IO
    rounds = world.alloc_rounds
    print(f"seed {seed}: " + (f"converged after {rounds} rounds" if rounds else "did not converge"))
    counts = {}
    for a in world.agents.values():
        if a.alloc.my_task is not None:
            counts[a.alloc.my_task] = counts.get(a.alloc.my_task, 0) + 1
    for t in plan.tasks:
        print(f"task {t.id} (building {t.building_id}): {counts.get(t.id, 0)}/{t.capacity} agents")
    return EXIT_OK


def cmd_simulate(scn, args):
    code = run_batch(scn, args.out, parallel=args.parallel)
    if code == EXIT_OK:
        with open(Path(args.out) / "summary.csv", newline="") as fh:
            for row in csv.DictReader(fh):
                cov = row["coverage_complete_time_s"]
                if not cov:
                    print(f"{row['run_id']}: coverage not reached")
                    continue
                print(f"{row['run_id']}: coverage {cov} s, max idleness after coverage "
                      f"{row['max_idleness_after_coverage_s']} s")
    return code


def build_parser():
    p = argparse.ArgumentParser(prog="urbanpatrol", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log planning details")
    sub = p.add_subparsers(dest="verb", required=True)
    for name, needs_out, help_ in (("validate", False, "check a scenario file"),
                                   ("plan", True, "write viewpoints and closed paths"),
                                   ("allocate", True, "run the allocation to convergence"),
                                   ("simulate", True, "run every seed and write metrics")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--scenario", required=True, help="path to a .scn file")
        if needs_out:
            s.add_argument("--out", required=True, help="output directory")
        s.add_argument("--seeds", type=_parse_seeds, help="e.g. 0-9 or 1,4,7 (overrides the file)")
        s.add_argument("--duration", type=_positive, help="simulated seconds (overrides the file)")
        s.add_argument("--los", action=argparse.BooleanOptionalAction, default=None,
                       help="buildings block radio line of sight")
        if name == "simulate":
            s.add_argument("--parallel", type=int, default=1, help="worker processes for seeds")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "parallel", 1) < 1:
        print("--parallel must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        scn = _with_overrides(load_scenario(args.scenario), args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    verbs = {"validate": cmd_validate, "plan": cmd_plan, "allocate": cmd_allocate, "simulate": cmd_simulate}
    try:
        return verbs[args.verb](scn, args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
