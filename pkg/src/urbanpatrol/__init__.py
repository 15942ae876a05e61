"""Cooperative 3D urban coverage and patrol for UAV swarms."""
from .allocation import AllocationState, Bid, build_bid_phase, consensus_phase, is_converged, score
from .geometry import (Building, CameraSpec, Viewpoint, build_surfaces, camera_footprint, generate_viewpoints,
                       filter_occluded_viewpoints, building_viewpoints)
from .metrics import IdlenessLedger, record_visit, sample_max_idleness
from .pathplan import ClosedPath, DistanceOracle, Task, christofides_tour, generate_tasks, plan_scenario
from .patrol import PatrolMessage, PatrolState, join_path, next_index, process_messages, service_step
from .scenario import Scenario, load_scenario
from .simkernel import AgentBody, CommsModel, EventScript, WorldState, deliver_messages, make_world, step

__all__ = [
    "AllocationState", "Bid", "build_bid_phase", "consensus_phase", "is_converged", "score",
    "Building", "CameraSpec", "Viewpoint", "build_surfaces", "camera_footprint", "generate_viewpoints",
    "filter_occluded_viewpoints", "building_viewpoints",
    "IdlenessLedger", "record_visit", "sample_max_idleness",
    "ClosedPath", "DistanceOracle", "Task", "christofides_tour", "generate_tasks", "plan_scenario",
    "PatrolMessage", "PatrolState", "join_path", "next_index", "process_messages", "service_step",
    "Scenario", "load_scenario",
    "AgentBody", "CommsModel", "EventScript", "WorldState", "deliver_messages", "make_world", "step",
]
