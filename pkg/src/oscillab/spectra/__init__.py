"""Independent spectral oracles: basis diagonalization and the radial ODE."""

from .hamiltonian import (
    BranchState,
    EnergyEstimate,
    RadialHamiltonian,
    build_hamiltonian,
    eigen_energies,
    oracle_diag,
    potential_matrix,
    track_branch,
    track_eigenvalue,
)

__all__ = [
    "BranchState",
    "EnergyEstimate",
    "RadialHamiltonian",
    "build_hamiltonian",
    "eigen_energies",
    "oracle_diag",
    "potential_matrix",
    "track_branch",
    "track_eigenvalue",
]
