"""Spin-restricted Hartree-Fock on grids via conjugate-gradient minimization.

HF is the integer-occupation special case of the Mueller functional, so the
self-consistent field driver delegates to the shared conjugate-gradient
orbital machinery in :mod:`cavqed1d.rdmft` with all occupations pinned to 2.
Works unchanged for electronic and dressed (fermion-ansatz) grid problems.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["SCFConfig", "HFResult", "fock_apply", "hf_energy", "hf_scf"]


@dataclass(frozen=True)
class SCFConfig:
    """Convergence settings shared by the SCF drivers.

    energy_tol is relative (|dE|/|E|), density_tol is the integrated
    absolute density change between outer iterations; orbital_tol bounds the
    squared orbital residual in the conjugate-gradient loops.
    """

    energy_tol: float = 1e-9
    density_tol: float = 1e-8
    orbital_tol: float = 1e-9
    max_outer: int = 200
    max_cg: int = 40

    def __post_init__(self):
        if self.energy_tol <= 0 or self.density_tol <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class HFResult:
    energy: float                # physical total energy (shift included)
    auxiliary_energy: float      # energy of the minimized functional
    orbitals: np.ndarray         # (n_basis, N/2), grid-orthonormal
    orbital_energies: np.ndarray
    density: np.ndarray
    converged: bool
    iterations: int
    history: list = field(default_factory=list)

    def gamma(self) -> np.ndarray:
        """Kernel of the spin-summed idempotent 1RDM, gamma(z,z') = 2 sum_i
        phi_i(z) phi_i(z'); operator composition carries the grid weight."""
        return 2.0 * (self.orbitals @ self.orbitals.T)


def fock_apply(problem, orbitals: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Apply the Fock operator (t+v) + sum_j (2 J_j - K_j) built from the
    doubly occupied ``orbitals`` to a trial orbital ``phi``."""
    if phi.shape[0] != problem.n_basis:
        raise ValueError("orbital does not match the problem basis")
    out = problem.h_apply(phi)
    den = 2.0 * np.sum(orbitals**2, axis=1)
    out += problem.w_apply_pair(den) * phi
    for j in range(orbitals.shape[1]):
        pj = orbitals[:, j]
        out -= problem.w_apply_pair(pj * phi) * pj
    return out


def hf_energy(problem, orbitals: np.ndarray) -> float:
    """Restricted HF energy 2 sum<h> + sum [2 (ii|jj) - (ij|ji)] (no shift)."""
    w = problem.weight
    e = 2.0 * w * float(np.sum(orbitals * problem.h_apply(orbitals)))
    m = orbitals.shape[1]
    for i in range(m):
        pi = orbitals[:, i]
        vii = problem.w_apply_pair(pi * pi)
        for j in range(m):
            pj = orbitals[:, j]
            e += 2.0 * w * float(np.sum(vii * pj * pj))
            vij = problem.w_apply_pair(pi * pj)
            e -= w * float(np.sum(vij * pi * pj))
    return e


def hf_scf(problem, config: SCFConfig = SCFConfig(), initial=None) -> HFResult:
    """Solve the restricted HF equations by direct CG minimization.

    The initial guess is the independent-particle solution of (t+v) unless
    ``initial`` orbitals are supplied.  Returns physical total energies
    (problem.energy_shift applied).
    """
    from .rdmft import cg_minimize_orbitals

    m = problem.n_electrons // 2
    if initial is None:
        _, orbitals = problem.ip_orbitals(m)
    else:
        orbitals = initial.copy()
    occupations = np.full(m, 2.0)
    orbitals, info = cg_minimize_orbitals(problem, occupations, orbitals, config)
    e_aux = hf_energy(problem, orbitals)
    eps = np.array([problem.weight * float(orbitals[:, i] @ fock_apply(problem, orbitals, orbitals[:, i]))
                    for i in range(m)])
    order = np.argsort(eps)
    orbitals = orbitals[:, order]
    eps = eps[order]
    den = 2.0 * np.sum(orbitals**2, axis=1)
    return HFResult(
        energy=e_aux + problem.energy_shift,
        auxiliary_energy=e_aux,
        orbitals=orbitals,
        orbital_energies=eps,
        density=den,
        converged=info["converged"],
        iterations=info["iterations"],
        history=info["history"],
    )
