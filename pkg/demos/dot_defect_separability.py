"""
Where a nuclear defect sits decides whether the electron can be stored
======================================================================

An electron in a quantum dot talks to a thousand nuclear spins through a
Gaussian hyperfine profile.  The nuclei are polarized except for one flip
spread over the ensemble.  If the flip sits near the dot edge, where the
couplings are weak, the electron still transfers almost completely into
the ensemble and the joint state becomes nearly a product state after one
transfer time.  A flip spread uniformly keeps the two entangled.
"""

import numpy as np

from effdyn.hilbert import make_profile
from effdyn.observables import tangle_from_reduced
from effdyn.scenarios import DefectDistribution, transfer_time
from effdyn.scenarios.dot import electron_rdm, superposition_pieces

N = 1000
profile = make_profile("gaussian_dot", N, {"A": 1.0, "r0": 1.0})
tau = transfer_time(profile)
t = np.linspace(0, 2 * tau, 400)
print(f"transfer time pi/N0 = {tau:.1f} (units of 1/A)")

defects = {
    "uniform": DefectDistribution("uniform", N),
    "edge, width N/50": DefectDistribution("lorentzian", N, j0=N, Gamma=N / 50),
    "centre, width N/50": DefectDistribution("lorentzian", N, j0=1, Gamma=N / 50),
}

# %%
# The electron starts in (|up> + |down>)/sqrt(2).  Tangle 0 means a product
# state.  The input is one, and after 2 tau the flip-flop returns to it, so
# look at the window [tau/2, 3 tau/2] around the first transfer.

u = v = 1 / np.sqrt(2)
window = (t >= tau / 2) & (t <= 1.5 * tau)
for name, d in defects.items():
    rho = electron_rdm(superposition_pieces(profile, u, v, d.ket(), t))
    tau_en = tangle_from_reduced(rho)
    k = np.argmin(np.where(window, tau_en, np.inf))
    print(f"{name:20s} min tangle {tau_en[k]:.4f} at t = {t[k] / tau:.2f} tau")
