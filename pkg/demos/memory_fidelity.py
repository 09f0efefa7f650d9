"""
A full write, store and read cycle
==================================

The electron state is written into the nuclear ensemble, the electron is
replaced by a fresh spin-down electron, and the state is read back.  The
fidelity is averaged over the Bloch sphere.  A calibrated single-qubit
phase, fixed by the defect-free cycle, is removed before comparing.
"""

from effdyn.hilbert import make_profile
from effdyn.scenarios import (DefectDistribution, MemoryChannel, calibration_phase,
                              memory_fidelity, transfer_time)
from effdyn.observables import bloch_average, fidelity

N = 1000
profile = make_profile("gaussian_dot", N, {"A": 1.0, "r0": 1.0})
tau = transfer_time(profile)
phase = calibration_phase(profile, tau)

# %%
# Without the phase correction the recovered state is rotated about z and
# the average fidelity drops to about 1/3.

chan = MemoryChannel(profile, None, tau)
raw = bloch_average(lambda u, v: fidelity(chan(u, v), [u, v]), 100)
chan.phase = phase
fixed = bloch_average(lambda u, v: fidelity(chan(u, v), [u, v]), 100)
print(f"defect-free cycle: F = {raw:.4f} uncorrected, {fixed:.5f} corrected")

# %%
# Moving the defect from the centre of the dot to its edge.

for j0 in (1, N // 4, N // 2, 3 * N // 4, N):
    d = DefectDistribution("lorentzian", N, j0=j0, Gamma=N / 50)
    f = memory_fidelity(profile, d, tau, M=100, phase=phase)
    print(f"j0 = {j0:5d}   F = {f:.4f}")
