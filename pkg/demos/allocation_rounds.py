"""Decentralised task allocation on a chain of agents.

Each agent only talks to its neighbours, so bids ripple down the line.
Run:  python3 demos/allocation_rounds.py
"""
import numpy as np

from urbanpatrol.allocation import assignment_of, greedy_assignment, run_allocation
from urbanpatrol.pathplan.tasks import Task
from urbanpatrol.pathplan.tour import ClosedPath

rng = np.random.default_rng(7)
tasks = [Task(j, ClosedPath((j,), 0.0), cap, 1, 0, (float(x), float(y), 0.0))
         for j, (cap, x, y) in enumerate([(3, 0, 0), (2, 80, 10), (3, 40, 90)])]
positions = {i: tuple(rng.uniform(0, 100, 2)) + (10.0,) for i in range(8)}

chain = {i: [k for k in (i - 1, i + 1) if k in positions] for i in positions}
states, rounds = run_allocation(positions, tasks, adjacency=chain)
print("line topology, %d rounds:" % rounds, assignment_of(states))
print("sequential greedy:", greedy_assignment(positions, tasks))
