"""Standing and moving fronts of the cubic nonlinearity.

Prints the balanced profile against tanh(z / sqrt 2), then the speed c(delta)
for a few constant shifts next to the linear prediction -c0 * delta.
"""

import numpy as np

from sac.reaction import make_cubic
from sac.wave import c0, solve_wave, wave_speed_curve

f = make_cubic()
U = solve_wave(f, 0.0)
z = np.linspace(-6, 6, 7)
print("z       U0(z)      tanh(z/sqrt2)")
for zi, ui in zip(z, U(z)):
    print(f"{zi:5.1f}  {ui:+.8f}  {np.tanh(zi / np.sqrt(2)):+.8f}")

k = c0(f)
print(f"\nc0 = {k:.10f}   (3/sqrt 2 = {3 / np.sqrt(2):.10f})")
print("\ndelta    c(delta)     -c0*delta")
for d, c in wave_speed_curve(f, [-0.3, -0.1, -0.01, 0.01, 0.1, 0.3]):
    print(f"{d:+.2f}   {c:+.6f}   {-k * d:+.6f}")
