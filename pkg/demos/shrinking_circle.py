"""A circle of the minus phase shrinking under curvature, with and without noise.

Both runs use the same grid and initial data.  The interface radius of the
PDE is printed next to the reference radius ODE driven by the same noise
path through the wave speed.

    python3 demos/shrinking_circle.py [eps] [seed]
"""

import sys

import numpy as np

from sac import geometry as G
from sac.field import Grid2D, SimConfig, run_simulation, stable_dt
from sac.harness.experiments import level_radius, speed_for
from sac.interface_flow import interface_forcing, radius_sde
from sac.noise import make_mn2
from sac.reaction import make_cubic

eps = float(sys.argv[1]) if len(sys.argv) > 1 else 0.04
seed = int(sys.argv[2]) if len(sys.argv) > 2 else 1
f = make_cubic()
R0, w0, T = 0.35, 0.1, 0.04
grid = Grid2D.unit_square(128)
times = list(np.linspace(0.005, T, 8))
noise = make_mn2(eps, 0.5, T + 0.01, seed)
flow_dt = 1e-5
n = int(round(T / flow_dt))
R_ref = level_radius(f, R0, w0, f.a)

for label, xi in (("noise off", None), ("MN2 noise", noise)):
    cfg = SimConfig(eps, f, stable_dt(f, eps, grid), T, grid, initial={"kind": "circle", "R0": R0, "w0": w0},
                    noise=xi, snapshot_times=times)
    traj = run_simulation(cfg)
    forcing = None if xi is None else interface_forcing(xi, eps, speed_for(f), flow_dt, n)
    flow = radius_sde(R_ref, flow_dt, T, forcing=forcing)
    print(f"\n{label}, eps = {eps}")
    print("   t      R_pde     R_flow")
    for s in traj.snapshots:
        loop = G.largest_loop(G.extract_level_set(s, f.a))
        print(f"{s.time:.4f}  {G.loop_radius(loop):.5f}  {np.interp(s.time, flow.t, flow.R):.5f}")
