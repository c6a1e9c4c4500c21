"""Constant-curvature curve driven by white noise, two ways.

The Gauss-map curvature equation (Stratonovich, Heun steps) and the radius
SDE (Euler-Maruyama) share one Brownian path.  Their pathwise gap shrinks
with the step; the ratio across a step halving shows the order.
"""

import numpy as np

from sac.interface_flow import stratonovich_gap
from sac.wave import c0
from sac.reaction import make_cubic

coef = c0(make_cubic())
paths, T = 16, 0.05
rng = np.random.default_rng(7)
fine_dt = 5e-6
fine = rng.standard_normal((paths, int(round(T / fine_dt)))) * np.sqrt(fine_dt)
coarse = fine[:, 0::2] + fine[:, 1::2]
g_fine, s_fine = stratonovich_gap(fine, fine_dt, coef)
g_coarse, s_coarse = stratonovich_gap(coarse, 2 * fine_dt, coef)
print(f"coefficient c0 * alpha0 = {coef:.4f} (alpha0 = 1)")
print(f"max gap: dt={2 * fine_dt:g}: {g_coarse.max():.3e}   dt={fine_dt:g}: {g_fine.max():.3e}")
rms = np.sqrt(np.mean(g_coarse**2)) / np.sqrt(np.mean(g_fine**2))
print(f"rms gap ratio under halving: {rms:.3f}")
print(f"paths stopped at sigma_N: {int(s_fine.sum())} of {paths}")
