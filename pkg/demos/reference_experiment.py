"""Run a reference experiment and write CSVs plus SVG charts.

Usage: python3 demos/reference_experiment.py [setup] [trials] [steps] [out_dir]
Defaults: setup 1, 40 trials, 500 steps, output in ./demo_out.
"""

import os
import sys
import time

from activeloc import random_feasible_system, reference_template, run_experiment

setup = int(sys.argv[1]) if len(sys.argv) > 1 else 1
trials = int(sys.argv[2]) if len(sys.argv) > 2 else 40
steps = int(sys.argv[3]) if len(sys.argv) > 3 else 500
out = sys.argv[4] if len(sys.argv) > 4 else "demo_out"

lam = 1.014 if setup == 1 else 1.01
template = reference_template(setup, trials=trials, max_steps=steps)
cfg = random_feasible_system(0, 2, lam, template).config
t0 = time.perf_counter()
report = run_experiment(cfg, out, plots=True, workers=os.cpu_count() or 1)
s = report.summary()
print(f"{trials} trials x {steps} steps in {time.perf_counter() - t0:.1f} s")
print(f"max gap {s['max_gap']} (allowed {report.N * report.nbar}), violated trials {s['violated_trials']}")
print(f"final mean diam X0 {s['final_mean_diam_x0']:.5g}, final mean diam M {s['final_mean_diam_m']:.5g}")
print(f"outputs in {out}/")
