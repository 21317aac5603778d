"""Operational problem representations shared by all solvers.

Three concrete problem types cover the systems treated here:

* :class:`ElectronicGridProblem` -- electrons on a 1D real-space grid with a
  local potential and a softened Coulomb interaction;
* :class:`DressedGridProblem` -- the auxiliary polariton problem on the
  product (x, q) grid, with the dressed kernels;
* :class:`LatticePolaritonProblem` -- the auxiliary problem of a tight-binding
  chain coupled to a photon mode, in the combined site x Fock basis.

All expose the same small surface: a quadrature ``weight``, ``h_apply`` for
the one-body part, and the interaction either as a local-kernel application
on pair densities (grids) or as separable operator pairs (lattice).
Totals reported to users are auxiliary energies plus ``energy_shift`` (the
nuclear repulsion and, for dressed problems, minus (N-1)*sum omega/2).
"""

from __future__ import annotations

import numpy as np
from scipy.sparse.linalg import LinearOperator, eigsh

from .model import (
    CavityMode,
    DressedKernels,
    Grid1D,
    LatticeModel,
    SoftInteraction,
    kinetic_matrix,
    lattice_one_body_matrix,
    lattice_two_body_pairs,
)

__all__ = [
    "ElectronicGridProblem",
    "DressedGridProblem",
    "LatticePolaritonProblem",
]


class ElectronicGridProblem:
    """N electrons on a 1D grid: h = -1/2 d^2/dx^2 + v(x), w soft Coulomb."""

    def __init__(self, grid: Grid1D, potential=None, interaction=None,
                 n_electrons: int = 2, energy_shift: float = 0.0):
        if n_electrons % 2 or n_electrons <= 0:
            raise ValueError("spin-restricted formalism: even electron count")
        self.grid = grid
        self.potential = potential
        self.interaction = interaction
        self.n_electrons = n_electrons
        self.energy_shift = energy_shift
        self.weight = grid.spacing
        x = grid.points
        self.h = kinetic_matrix(grid)
        if potential is not None:
            self.h = self.h + np.diag(potential(x))
        self.wmat = interaction.matrix(grid) if interaction is not None else None

    @property
    def n_basis(self) -> int:
        return self.grid.n_points

    def h_apply(self, phi: np.ndarray) -> np.ndarray:
        return self.h @ phi

    def w_apply_pair(self, rho: np.ndarray) -> np.ndarray:
        """v(x) = integral w(x,x') rho(x') dx' for a pair density on the grid."""
        if self.wmat is None:
            return np.zeros_like(rho)
        return self.weight * (self.wmat @ rho)

    def w_apply_pairs(self, pair_columns: np.ndarray) -> np.ndarray:
        """Vectorized kernel application to many pair densities (columns)."""
        return self.w_apply_pair(pair_columns)

    def separable_pair_matrices(self):
        """Separable (diagonal) additions to the kernel; none electronically."""
        return []

    def ip_orbitals(self, m: int):
        """Lowest m eigenpairs of h, orbitals normalized with the grid weight."""
        e, c = np.linalg.eigh(self.h)
        orbs = c[:, :m] / np.sqrt(self.weight)
        return e[:m], orbs

    def density(self, occupations, orbitals) -> np.ndarray:
        return np.einsum("i,xi->x", occupations, orbitals**2)


class DressedGridProblem:
    """Auxiliary polariton problem on the product grid z = (x, q), one mode.

    Orbitals are stored flat with x-major ordering: z = ix * n_q + iq.
    """

    def __init__(self, grid_x: Grid1D, grid_q: Grid1D, kernels: DressedKernels,
                 energy_shift: float | None = None):
        if len(kernels.modes) != 1:
            raise ValueError("grid problems support a single mode")
        self.grid_x = grid_x
        self.grid_q = grid_q
        self.kernels = kernels
        self.n_electrons = kernels.n_electrons
        self.mode = kernels.modes[0]
        self.weight = grid_x.spacing * grid_q.spacing
        self.shape = (grid_x.n_points, grid_q.n_points)
        if energy_shift is None:
            energy_shift = -kernels.zero_point_shift
        self.energy_shift = energy_shift

        x, q = grid_x.points, grid_q.points
        self.x, self.q = x, q
        self.tx = kinetic_matrix(grid_x)
        self.tq = kinetic_matrix(grid_q)
        # local part of v'(x,q) evaluated on the product grid
        self.vxq = kernels.v_dressed(x[:, None], q[None, :])
        self.wmat_x = (kernels.interaction.matrix(grid_x)
                       if kernels.interaction is not None else None)
        # photon energy operator -1/2 d^2/dq^2 + omega^2 q^2 / 2 on the q grid
        self.hq_energy = self.tq + np.diag(0.5 * self.mode.omega**2 * q**2)

    @property
    def n_basis(self) -> int:
        return self.shape[0] * self.shape[1]

    def _as_grid(self, phi: np.ndarray) -> np.ndarray:
        return phi.reshape(self.shape)

    def h_apply(self, phi: np.ndarray) -> np.ndarray:
        """Apply t' + v' to one flat orbital or a stack of columns."""
        if phi.ndim == 2:
            return np.stack([self.h_apply(p) for p in phi.T], axis=1)
        f = self._as_grid(phi)
        out = self.tx @ f + f @ self.tq.T + self.vxq * f
        return out.reshape(-1)

    def w_apply_pair(self, rho: np.ndarray) -> np.ndarray:
        """Apply the dressed kernel w'(z,z') to a pair density rho(z').

        The soft-Coulomb part acts on the q-integrated marginal; the dressed
        additions are products of coordinates and reduce to moments of rho.
        """
        r = self._as_grid(rho)
        dx, dq = self.grid_x.spacing, self.grid_q.spacing
        x, q = self.x, self.q
        rho_x = r.sum(axis=1) * dq           # integral over q'
        mom_x = float(x @ rho_x) * dx        # <x'>_rho
        rho_q = r.sum(axis=0) * dx
        mom_q = float(q @ rho_q) * dq        # <q'>_rho
        lam = self.mode.coupling
        c = self.mode.omega / np.sqrt(self.n_electrons) * lam
        out = np.zeros(self.shape)
        if self.wmat_x is not None:
            out += ((self.wmat_x @ rho_x) * dx)[:, None]
        # -(omega/sqrt(N)) lam (q <x'> + x <q'>) + lam^2 x <x'>
        out += -c * (q[None, :] * mom_x + x[:, None] * mom_q)
        out += lam**2 * x[:, None] * mom_x
        return out.reshape(-1)

    def w_apply_pairs(self, pair_columns: np.ndarray) -> np.ndarray:
        """Vectorized kernel application to many pair densities (columns)."""
        nx, nq = self.shape
        k = pair_columns.shape[1]
        dx, dq = self.grid_x.spacing, self.grid_q.spacing
        x, q = self.x, self.q
        r = pair_columns.reshape(nx, nq, k)
        rho_x = r.sum(axis=1) * dq                # (nx, k)
        rho_q = r.sum(axis=0) * dx                # (nq, k)
        mom_x = (x @ rho_x) * dx                  # (k,)
        mom_q = (q @ rho_q) * dq
        lam = self.mode.coupling
        c = self.mode.omega / np.sqrt(self.n_electrons) * lam
        out = np.zeros((nx, nq, k))
        if self.wmat_x is not None:
            out += ((self.wmat_x @ rho_x) * dx)[:, None, :]
        out += -c * (q[None, :, None] * mom_x[None, None, :]
                     + x[:, None, None] * mom_q[None, None, :])
        out += lam**2 * x[:, None, None] * mom_x[None, None, :]
        return out.reshape(nx * nq, k)

    def separable_pair_matrices(self):
        """Dressed kernel additions as (coef, a(z), b(z)) diagonal pairs."""
        x2d = np.broadcast_to(self.x[:, None], self.shape).reshape(-1)
        q2d = np.broadcast_to(self.q[None, :], self.shape).reshape(-1)
        lam = self.mode.coupling
        c = self.mode.omega / np.sqrt(self.n_electrons) * lam
        return [(lam**2, x2d, x2d), (-c, q2d, x2d), (-c, x2d, q2d)]

    def ip_orbitals(self, m: int, tol: float = 1e-14):
        """Lowest m eigenpairs of the combined one-body operator t' + v'."""
        n = self.n_basis
        op = LinearOperator((n, n), matvec=self.h_apply, dtype=float)
        e, c = eigsh(op, k=m, which="SA", tol=tol, maxiter=5000)
        order = np.argsort(e)
        return e[order], c[:, order] / np.sqrt(self.weight)

    def electronic_density(self, occupations, orbitals) -> np.ndarray:
        dens = np.einsum("i,zi->z", occupations, orbitals**2).reshape(self.shape)
        return dens.sum(axis=1) * self.grid_q.spacing

    def photonic_density(self, occupations, orbitals) -> np.ndarray:
        dens = np.einsum("i,zi->z", occupations, orbitals**2).reshape(self.shape)
        return dens.sum(axis=0) * self.grid_x.spacing

    def photon_mode_energy(self, occupations, orbitals) -> float:
        """<H'_ph> = sum_i n_i <phi_i| -1/2 d^2/dq^2 + omega^2 q^2/2 |phi_i>."""
        e = 0.0
        for ni, phi in zip(occupations, orbitals.T):
            if ni == 0.0:
                continue
            f = self._as_grid(phi)
            e += ni * self.weight * float(np.sum(f * (f @ self.hq_energy.T)))
        return e


class LatticePolaritonProblem:
    """Auxiliary problem of a lattice + mode system in the site x Fock basis.

    The basis is orthonormal (weight 1).  The two-body part is kept as
    separable operator pairs; the photon-displacement factors make it
    non-diagonal, so grid-style local-kernel application does not apply.
    """

    def __init__(self, model: LatticeModel):
        self.model = model
        self.n_electrons = model.n_electrons
        self.weight = 1.0
        self.h = lattice_one_body_matrix(model)
        self.pairs = lattice_two_body_pairs(model)
        self.energy_shift = -(model.n_electrons - 1) * 0.5 * model.mode.omega
        bm, bph = model.n_sites, model.n_photon
        self.shape = (bm, bph)
        # photon energy operator on the combined basis, for mode occupation
        self.hq_energy = np.kron(
            np.eye(bm), np.diag(model.mode.omega * (np.arange(bph) + 0.5)))

    @property
    def n_basis(self) -> int:
        return self.model.n_basis

    def h_apply(self, phi: np.ndarray) -> np.ndarray:
        return self.h @ phi

    def coulomb_matrix(self, gamma: np.ndarray) -> np.ndarray:
        """J[gamma] = sum_t coef * A_t * tr(B_t gamma)."""
        j = np.zeros_like(self.h)
        for coef, a_op, b_op in self.pairs:
            j += coef * np.einsum("bd,db->", b_op, gamma) * a_op
        return j

    def exchange_matrix(self, gamma: np.ndarray) -> np.ndarray:
        """K[gamma] = sum_t coef * A_t gamma B_t."""
        k = np.zeros_like(self.h)
        for coef, a_op, b_op in self.pairs:
            k += coef * (a_op @ gamma @ b_op)
        return k

    def ip_orbitals(self, m: int):
        e, c = np.linalg.eigh(self.h)
        return e[:m], c[:, :m]

    def electronic_1rdm(self, gamma: np.ndarray) -> np.ndarray:
        """Trace out the photon index: gamma_e[i,j] = sum_a gamma[ia, ja]."""
        bm, bph = self.shape
        g = gamma.reshape(bm, bph, bm, bph)
        return np.einsum("iaja->ij", g)

    def photon_mode_energy(self, gamma: np.ndarray) -> float:
        return float(np.einsum("ab,ba->", self.hq_energy, gamma))
