"""Two drones patrolling a ring of 20 viewpoints, then one drops out.

The pair bounce off each other at every meeting, splitting the loop
between them. After the removal the survivor circles on its own.
Run:  python3 demos/ring_patrol.py
"""
from urbanpatrol.fixtures import ring_lap_time, ring_plan
from urbanpatrol.simkernel import EventScript, RemoveAgent, SimConfig, make_world, run

lap = ring_lap_time()
plan = ring_plan(agents=2)
world = make_world(plan, {0: (-5.0, 0.0, 10.0), 1: (5.0, 0.0, 10.0)}, SimConfig(seed=1),
                   EventScript([(900.0, RemoveAgent(1))]))
run(world, 1800.0)

for t0, t1 in [(300, 900), (1100, 1800)]:
    window = [m for t, m in world.ledger.series if t0 <= t <= t1]
    print("%4d-%4d s  max idleness %.1f s  (one-agent lap %.0f s)" % (t0, t1, max(window), lap))
for i in (0, 1):
    st = world.agents[i].patrol
    print("agent %d reversed %d times" % (i, st.reversals))
