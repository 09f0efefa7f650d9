"""
Rabi oscillations against mixed and thermal nuclei
==================================================

Two kinds of incoherent nuclear state.  A single flip distributed as a
classical mixture over the sites (any N, cost ~ N^2), and a thermal product
state in which every nucleus is flipped with probability <k> (full space,
small N).  Both reduce to sums of pure branches because their density
matrices are diagonal in the spin basis.
"""

import numpy as np

from effdyn.hilbert import make_profile
from effdyn.observables import rabi_contrast
from effdyn.scenarios import mixed_p_up, thermal_p_up

u = v = 1 / np.sqrt(2)

# %%
# Uniform single-flip mixture over 40 nuclei.

prof40 = make_profile("gaussian_dot", 40, {"A": 1.0, "r0": 1.0})
t = np.linspace(0, 200, 2000)
p = mixed_p_up(prof40, np.full(40, 1 / 40), u, v, t)
print(f"mixed, N=40: P_up between {p.min():.3f} and {p.max():.3f}, "
      f"contrast {rabi_contrast(t, p):.3f}")

# %%
# Thermal nuclei, N=10.  The first line is the fully polarized reference.

prof10 = make_profile("gaussian_dot", 10, {"A": 1.0, "r0": 1.0})
t = np.linspace(0, 60, 600)
for k in (0.0, 0.01, 0.05, 0.1):
    c = rabi_contrast(t, thermal_p_up(prof10, k, u, v, t))
    polarized = (1 - k) ** 10
    print(f"<k> = {k:4.2f}  contrast {c:.4f}  weight of the polarized branch {polarized:.3f}")
