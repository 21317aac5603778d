"""Dressed construction: auxiliary polariton problems and observable mapping.

An N-electron, M-mode system is reformulated as N polaritons with
coordinates z = (x, q_1..q_M).  Only the center-of-mass condition
p_a = (q_{a,1} + ... + q_{a,N})/sqrt(N) of the underlying orthogonal
coordinate transformation matters; the construction enters the solvers
purely through the dressed kernels, so the transformation matrix itself is
never materialized.  Auxiliary energies exceed physical ones by the
zero-point constant (N-1) sum_a omega_a / 2; electronic observables are
identical in both pictures.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import CavityMode, DressedKernels, Grid1D, LatticeModel
from .problems import DressedGridProblem, LatticePolaritonProblem

__all__ = [
    "ElectronicRDM",
    "dress",
    "dress_grid",
    "dress_lattice",
    "electronic_1rdm",
    "photonic_1rdm",
    "photon_energy",
    "mode_occupation",
]


@dataclass
class ElectronicRDM:
    """Electronic 1RDM obtained by tracing the polaritonic one over q.

    Hermitian and positive semidefinite with trace N by construction; the
    Pauli bound n_i <= 2 on its eigenvalues is the constraint of the
    polariton ansatz, not an automatic property of fermionic auxiliary
    states.
    """

    matrix: np.ndarray
    weight: float = 1.0

    @property
    def occupations(self) -> np.ndarray:
        return np.sort(np.linalg.eigvalsh(self.matrix * self.weight))[::-1]

    def eigenstates(self):
        vals, vecs = np.linalg.eigh(self.matrix * self.weight)
        order = np.argsort(vals)[::-1]
        return vals[order], vecs[:, order] / np.sqrt(self.weight)

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix)) * self.weight


def dress(potential, interaction, modes, n_electrons: int) -> DressedKernels:
    """Build the dressed kernels t', v', w' of an electron-photon problem.

    The one-body part gains the harmonic, bilinear (rescaled by 1/sqrt(N))
    and dipole-self terms; the two-body part the symmetric bilinear and
    dipole-dipole terms.  At zero coupling the kernels reduce to the
    electronic ones plus free oscillators.
    """
    if n_electrons < 1:
        raise ValueError("need at least one electron")
    modes = (modes,) if isinstance(modes, CavityMode) else tuple(modes)
    if not modes:
        raise ValueError("need at least one mode")
    return DressedKernels(potential, interaction, modes, n_electrons)


def dress_grid(grid_x: Grid1D, grid_q: Grid1D, potential, interaction,
               mode: CavityMode, n_electrons: int) -> DressedGridProblem:
    """Auxiliary problem of a real-space system on the (x, q) product grid."""
    kernels = dress(potential, interaction, mode, n_electrons)
    return DressedGridProblem(grid_x, grid_q, kernels)


def dress_lattice(model: LatticeModel) -> LatticePolaritonProblem:
    """Auxiliary problem of a lattice system in the site x Fock basis."""
    return LatticePolaritonProblem(model)


def electronic_1rdm(gamma: np.ndarray, problem) -> ElectronicRDM:
    """Trace the polaritonic 1RDM over the photon coordinate.

    gamma is the spin-summed matrix gamma(z, z') on the problem's basis; the
    q-trace uses the grid measure for grid problems and the plain index sum
    for lattices.
    """
    if isinstance(problem, DressedGridProblem):
        nx, nq = problem.shape
        g4 = gamma.reshape(nx, nq, nx, nq)
        mat = np.einsum("iaja->ij", g4) * problem.grid_q.spacing
        return ElectronicRDM(mat, problem.grid_x.spacing)
    mat = problem.electronic_1rdm(gamma)
    return ElectronicRDM(mat, 1.0)


def photonic_1rdm(gamma: np.ndarray, problem) -> np.ndarray:
    """Auxiliary photonic 1RDM (x-trace of gamma); diagnostic only."""
    if isinstance(problem, DressedGridProblem):
        nx, nq = problem.shape
        g4 = gamma.reshape(nx, nq, nx, nq)
        return np.einsum("iaib->ab", g4) * problem.grid_x.spacing
    bm, bph = problem.shape
    g4 = gamma.reshape(bm, bph, bm, bph)
    return np.einsum("iaib->ab", g4)


def photon_energy(mode_energy_aux: float, n_electrons: int, modes) -> float:
    """Physical mode energy from the auxiliary expectation value.

    E_ph = <H'_ph> - (N-1) sum_a omega_a/2: the auxiliary oscillators carry
    (N-1) extra zero-point quanta per mode that are not physical.
    """
    modes = (modes,) if isinstance(modes, CavityMode) else tuple(modes)
    return mode_energy_aux - (n_electrons - 1) * 0.5 * sum(m.omega for m in modes)


def mode_occupation(mode_energy_aux: float, omega: float, n_electrons: int,
                    clip_tol: float = 1e-10) -> float:
    """Occupation of a mode, N_ph = <h'_a>/omega - N/2.

    Values inside [-clip_tol, 0) are clipped to zero; anything more negative
    violates the zero-point bound <h'_a> >= N omega/2 and raises.
    """
    n_ph = mode_energy_aux / omega - n_electrons / 2.0
    if n_ph < -clip_tol:
        raise ValueError(f"mode occupation {n_ph} below the zero-point bound")
    return max(n_ph, 0.0)
