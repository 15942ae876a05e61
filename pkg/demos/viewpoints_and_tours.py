"""Viewpoints and inspection tours for a single building.

Run:  python3 demos/viewpoints_and_tours.py
"""
from urbanpatrol import Building, CameraSpec, building_viewpoints, camera_footprint, plan_scenario

camera = CameraSpec(84, 50, 10)  # fov width, fov height (deg), standoff (m)
fp = camera_footprint(camera)
print("camera footprint at 10 m: %.2f x %.2f m" % (fp.width, fp.height))

# an L-shaped block, 24 m tall
block = Building(0, [(0, 0), (40, 0), (40, 15), (15, 15), (15, 35), (0, 35)], 24.0)
vps = building_viewpoints([block], camera)[0]
facade = [v for v in vps if v.patch.kind == "facade"]
print("%d viewpoints: %d on facades, %d over the roof" % (len(vps), len(facade), len(vps) - len(facade)))

# the tour through them, routed around the building
plan = plan_scenario([block], camera, total_agents=3)
task = plan.tasks[0]
print("closed path over %d viewpoints, %.1f m long" % (len(task.path), task.path.length))
print("lap at 2 m/s with 3 s dwell: %.0f s" % plan.lap_time(task, 2.0, 3.0))
