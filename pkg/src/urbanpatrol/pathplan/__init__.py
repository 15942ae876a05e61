"""Distances, closed paths and tasks."""
from .matching import max_weight_matching, min_weight_perfect_matching
from .tasks import Plan, Task, allocate_capacities, generate_tasks, plan_scenario, read_tours, write_tours
from .tour import ClosedPath, christofides_tour, minimum_spanning_tree
from .visibility import DistanceOracle, DistanceTable, ObstacleError, obstacle_distance

__all__ = [
    "ClosedPath", "DistanceOracle", "DistanceTable", "ObstacleError", "Plan", "Task",
    "allocate_capacities", "christofides_tour", "generate_tasks", "max_weight_matching",
    "min_weight_perfect_matching", "minimum_spanning_tree", "obstacle_distance", "plan_scenario",
    "read_tours", "write_tours",
]
