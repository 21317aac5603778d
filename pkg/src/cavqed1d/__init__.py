"""Ground-state electronic and polaritonic structure for 1D cavity QED models.

Exact diagonalization, Hartree-Fock, Mueller-functional RDMFT, the dressed
(polariton) orbital construction, and polaritonic HF with hybrid Fermi-Bose
statistics enforced by an augmented Lagrangian.
"""

__version__ = "0.1.0"

from .model import (
    CavityMode,
    DressedKernels,
    Grid1D,
    LatticeModel,
    SoftInteraction,
    SoftPotential,
    dressed_interaction,
    dressed_potential,
    h2_model,
    he_model,
    lattice_one_body_matrix,
    lattice_two_body_tensor,
    photon_displacement_matrix,
    soft_interaction,
)
from .problems import (
    DressedGridProblem,
    ElectronicGridProblem,
    LatticePolaritonProblem,
)
from .exact import (
    CIBasis,
    exact_dressed_lattice_ground_state,
    exact_grid_ground_state,
    exact_lattice_ground_state,
    exact_two_electron_energy,
    grid_observables,
    lattice_observables,
)
from .hf import HFResult, SCFConfig, fock_apply, hf_energy, hf_scf
from .rdmft import (
    IntegralTables,
    RDMFTConfig,
    RDMFTResult,
    cg_minimize_orbitals,
    mueller_energy,
    mueller_energy_tables,
    occupation_gradient,
    occupation_optimize,
    rdmft_driver,
)
from .dressed import (
    ElectronicRDM,
    dress,
    dress_grid,
    dress_lattice,
    electronic_1rdm,
    mode_occupation,
    photon_energy,
    photonic_1rdm,
)
from .polariton_hf import (
    PenaltyConfig,
    PenaltyState,
    PHFResult,
    augmented_lagrangian_outer,
    constraint_values,
    g_operator_apply,
    lattice_hartree_fock,
    line_minimize,
    pcg_inner,
    phf_gradient,
)
