"""One closed-loop trial on a randomly drawn system with the first reference geometry.

Prints the measurement pattern of the first 200 steps and how the two
estimate diameters evolve.
"""

import numpy as np

from activeloc import active_localize, random_feasible_system, reference_template

draw = random_feasible_system(seed=0, n=2, lambda_target=1.014, cfg_template=reference_template(1, max_steps=300))
cfg = draw.config
x0, m = np.array([0.4, -0.3]), np.array([0.6, 0.2])
trace = active_localize(cfg, x0, m)

print("bits:", "".join(str(b) for b in trace.y[:200]))
for k in (0, 10, 50, 100, 200, trace.steps - 1):
    print(
        f"k = {k:3d}  diam X0 = {trace.diam_x0_cloud[k]:.5f}  bound = {trace.diam_x0_bound[k]:.5f}"
        f"  diam M = {trace.diam_m_cloud[k]:.5f}"
    )
print(f"longest zero run {trace.last_gap} (allowed {trace.N * trace.nbar}), violations: {len(trace.violations)}")
