"""Effective-basis dynamics for ensembles with inhomogeneous collective coupling.

Two models are covered: two-level atoms in a single-mode cavity with
site-dependent couplings, and an electron spin coupled to polarized nuclear
spins through the hyperfine contact interaction.  Collective chains of
orthonormal ensemble states reduce both to small effective Hamiltonians;
a brute-force engine over the full Hilbert space serves as the reference.
"""
__version__ = "0.1.0"

from .chain import (ChainLabel, EffectiveBasis, assemble_effective_hamiltonian,
                    build_effective_basis, nominal_itc_dim, orthogonalize)
from .exact import (NumericalAbort, assemble_itc_full, assemble_qd_full,
                    assemble_qd_sector, chebyshev_step, propagate)
from .hilbert import (CouplingProfile, DensityMatrixSmall, GuardError, SectorBasis,
                      SparseKet, collective_lower, collective_raise, make_profile)
from .observables import (ObservableSpec, bloch_average, fidelity, quadrature_variance,
                          rabi_contrast, row_population, state_population, tangle)

__all__ = [
    "ChainLabel", "EffectiveBasis", "assemble_effective_hamiltonian",
    "build_effective_basis", "nominal_itc_dim", "orthogonalize",
    "NumericalAbort", "assemble_itc_full", "assemble_qd_full", "assemble_qd_sector",
    "chebyshev_step", "propagate",
    "CouplingProfile", "DensityMatrixSmall", "GuardError", "SectorBasis", "SparseKet",
    "collective_lower", "collective_raise", "make_profile",
    "ObservableSpec", "bloch_average", "fidelity", "quadrature_variance",
    "rabi_contrast", "row_population", "state_population", "tangle",
]
