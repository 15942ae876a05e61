"""The bundled city block scenario, three seeds, written to ./demo_out.

Run:  python3 demos/batch_run.py   (about a minute)
"""
from pathlib import Path

from urbanpatrol.cli import run_batch
from urbanpatrol.metrics import read_csv
from urbanpatrol.scenario import bundled, load_scenario

scn = load_scenario(bundled())
out = Path("demo_out")
run_batch(scn, out, seeds=[0, 1, 2])
for row in read_csv(out / "summary.csv"):
    print(row)
