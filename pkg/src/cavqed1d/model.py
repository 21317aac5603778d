"""Model definitions: grids, potentials, interactions, cavity modes, lattices.

Everything here is a pure constructor or evaluator working in Hartree atomic
units (lengths in bohr, energies in hartree).  One-body operators are built as
dense matrices; kinetic energy uses a fourth-order central finite-difference
Laplacian with Dirichlet (zero) boundary values, and integrals on grids are
plain on-point Riemann sums with weight ``spacing`` per node.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Grid1D",
    "SoftPotential",
    "SoftInteraction",
    "CavityMode",
    "LatticeModel",
    "DressedKernels",
    "soft_interaction",
    "dressed_potential",
    "dressed_interaction",
    "photon_displacement_matrix",
    "photon_energy_matrix",
    "lattice_one_body_matrix",
    "lattice_two_body_tensor",
    "lattice_two_body_pairs",
    "laplacian_matrix",
    "kinetic_matrix",
    "he_model",
    "h2_model",
]

# 4th-order central finite-difference stencil for the second derivative.
_FD4 = (-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0)


@dataclass(frozen=True)
class Grid1D:
    """Uniform 1D grid, symmetric about ``center``.

    The node coordinates are x_j = center + (j - (n_points-1)/2) * spacing,
    so a grid of "box length" L corresponds to n_points = L/spacing + 1 nodes
    covering [center - L/2, center + L/2].
    """

    n_points: int
    spacing: float
    center: float = 0.0

    def __post_init__(self):
        if self.n_points < 3:
            raise ValueError("grid needs at least 3 points")
        if self.spacing <= 0:
            raise ValueError("grid spacing must be positive")

    @classmethod
    def from_length(cls, length: float, spacing: float, center: float = 0.0) -> "Grid1D":
        """Grid covering a box of full extent ``length``."""
        n = int(round(length / spacing)) + 1
        return cls(n, spacing, center)

    @property
    def points(self) -> np.ndarray:
        j = np.arange(self.n_points)
        return self.center + (j - (self.n_points - 1) / 2.0) * self.spacing

    @property
    def length(self) -> float:
        return (self.n_points - 1) * self.spacing


def laplacian_matrix(n_points: int, spacing: float) -> np.ndarray:
    """Dense 4th-order FD Laplacian with zero (Dirichlet) boundary values."""
    lap = np.zeros((n_points, n_points))
    for off, c in zip(range(-2, 3), _FD4):
        m = n_points - abs(off)
        lap += np.diag(np.full(m, c / spacing**2), off)
    return lap


def kinetic_matrix(grid: Grid1D) -> np.ndarray:
    """Matrix of -1/2 d^2/dx^2 on the grid."""
    return -0.5 * laplacian_matrix(grid.n_points, grid.spacing)


@dataclass(frozen=True)
class SoftPotential:
    """Sum of softened Coulomb wells, v(x) = -sum_k Z_k / sqrt((x-R_k)^2 + eps^2)."""

    charges: tuple  # of (Z, position) pairs
    softening: float = 1.0

    def __post_init__(self):
        if self.softening <= 0:
            raise ValueError("softening must be positive")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        v = np.zeros_like(x)
        for z, pos in self.charges:
            v -= z / np.sqrt((x - pos) ** 2 + self.softening**2)
        return v

    def nuclear_repulsion(self) -> float:
        """Softened charge-charge repulsion of the fixed centers."""
        e = 0.0
        for i, (zi, ri) in enumerate(self.charges):
            for zj, rj in self.charges[i + 1:]:
                e += zi * zj / np.sqrt((ri - rj) ** 2 + self.softening**2)
        return e


@dataclass(frozen=True)
class SoftInteraction:
    """Softened Coulomb repulsion w(x,x') = 1/sqrt((x-x')^2 + eps_C^2)."""

    softening: float = 1.0

    def __post_init__(self):
        if self.softening <= 0:
            raise ValueError("softening must be positive")

    def __call__(self, x, xp):
        return soft_interaction(x, xp, self.softening)

    def matrix(self, grid: Grid1D) -> np.ndarray:
        x = grid.points
        return soft_interaction(x[:, None], x[None, :], self.softening)


def soft_interaction(x, xp, softening: float):
    """Evaluate 1/sqrt((x-x')^2 + eps_C^2); symmetric, bounded by 1/eps_C."""
    if softening <= 0:
        raise ValueError("softening must be positive")
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    return 1.0 / np.sqrt((x - xp) ** 2 + softening**2)


@dataclass(frozen=True)
class CavityMode:
    """One effective cavity mode: frequency omega and scalar coupling lambda.

    In 1D the polarization direction collapses to a sign, which is absorbed
    into the (nonnegative) coupling; both sign choices give identical
    observables.
    """

    omega: float
    coupling: float = 0.0

    def __post_init__(self):
        if self.omega <= 0:
            raise ValueError("mode frequency must be positive")
        if self.coupling < 0:
            raise ValueError("coupling must be nonnegative")

    @classmethod
    def from_ratio(cls, omega: float, g_over_omega: float) -> "CavityMode":
        """Build from the dimensionless ratio g/omega with g = lambda*sqrt(omega/2)."""
        return cls(omega, g_over_omega * np.sqrt(2.0 * omega))

    @property
    def g_over_omega(self) -> float:
        return self.coupling / np.sqrt(2.0 * self.omega)


def _as_modes(modes) -> tuple:
    if isinstance(modes, CavityMode):
        return (modes,)
    return tuple(modes)


def dressed_potential(x, q, potential, modes, n_electrons: int):
    """Dressed one-body potential v'(x, q).

    v'(x,q) = v(x) + sum_a [ omega_a^2 q_a^2 / 2
                             - (omega_a/sqrt(N)) q_a lambda_a x
                             + (lambda_a x)^2 / 2 ].

    ``q`` is a scalar for one mode or an array over modes; ``potential`` may
    be any callable v(x) (or None for v = 0).
    """
    if n_electrons < 1:
        raise ValueError("need at least one electron")
    modes = _as_modes(modes)
    x = np.asarray(x, dtype=float)
    qs = np.atleast_1d(np.asarray(q, dtype=float))
    if qs.shape[0] != len(modes):
        raise ValueError("one q coordinate per mode required")
    v = potential(x) if potential is not None else np.zeros_like(x)
    rootn = np.sqrt(float(n_electrons))
    for mode, qa in zip(modes, qs):
        lam = mode.coupling
        v = v + 0.5 * mode.omega**2 * qa**2 \
            - (mode.omega / rootn) * qa * lam * x \
            + 0.5 * (lam * x) ** 2
    return v


def dressed_interaction(x, q, xp, qp, modes, n_electrons: int, interaction=None):
    """Dressed two-body kernel w'(z, z') for z = (x, q).

    w'(z,z') = w(x,x') + sum_a [ -(omega_a/sqrt(N)) (q_a lambda_a x' + q'_a lambda_a x)
                                 + lambda_a^2 x x' ].

    Symmetric under (x,q) <-> (x',q').  ``interaction`` is a callable
    w(x,x') or None for w = 0 (e.g. the lattice benchmark systems).
    """
    if n_electrons < 1:
        raise ValueError("need at least one electron")
    modes = _as_modes(modes)
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    qs = np.atleast_1d(np.asarray(q, dtype=float))
    qps = np.atleast_1d(np.asarray(qp, dtype=float))
    w = interaction(x, xp) if interaction is not None else np.zeros(np.broadcast(x, xp).shape)
    rootn = np.sqrt(float(n_electrons))
    for mode, qa, qpa in zip(modes, qs, qps):
        lam = mode.coupling
        w = w - (mode.omega / rootn) * lam * (qa * xp + qpa * x) + lam**2 * x * xp
    return w


@dataclass(frozen=True)
class DressedKernels:
    """Dressed one-/two-body kernels of an N-electron, M-mode problem.

    Bundles the callables v'(x,q) and w'(xq,x'q') together with the
    bookkeeping constant (N-1)*sum_a omega_a/2 that converts auxiliary into
    physical energies.
    """

    potential: object  # callable v(x) or None
    interaction: object  # callable w(x,x') or None
    modes: tuple
    n_electrons: int

    def v_dressed(self, x, q):
        return dressed_potential(x, q, self.potential, self.modes, self.n_electrons)

    def w_dressed(self, x, q, xp, qp):
        return dressed_interaction(x, q, xp, qp, self.modes, self.n_electrons,
                                   self.interaction)

    @property
    def zero_point_shift(self) -> float:
        """(N-1) * sum_a omega_a / 2, subtracted from auxiliary energies."""
        return (self.n_electrons - 1) * 0.5 * sum(m.omega for m in self.modes)


def photon_displacement_matrix(n_fock: int, omega: float) -> np.ndarray:
    """Matrix of the displacement coordinate p = (a^dag + a)/sqrt(2 omega)
    in the photon-number basis {|0>, ..., |n_fock-1>}."""
    if n_fock < 1:
        raise ValueError("need at least one photon basis state")
    if omega <= 0:
        raise ValueError("mode frequency must be positive")
    p = np.zeros((n_fock, n_fock))
    for beta in range(n_fock - 1):
        p[beta + 1, beta] = p[beta, beta + 1] = np.sqrt(beta + 1.0) / np.sqrt(2.0 * omega)
    return p


def photon_energy_matrix(n_fock: int, omega: float) -> np.ndarray:
    """Diagonal matrix of omega*(n + 1/2) in the photon-number basis."""
    return np.diag(omega * (np.arange(n_fock) + 0.5))


@dataclass(frozen=True)
class LatticeModel:
    """Tight-binding chain coupled to one cavity mode.

    Sites carry coordinates x_i = i - x_0 centered on the middle of the
    chain; hopping t corresponds to a grid spacing via t = 1/(2 dx^2).  The
    matter two-body (Coulomb) term is zero; the mode induces a dipole-dipole
    interaction through its self-energy term.
    """

    n_sites: int
    hopping: float
    onsite: tuple
    mode: CavityMode
    n_photon: int = 5
    n_electrons: int = 2

    def __post_init__(self):
        if self.n_sites < 2:
            raise ValueError("lattice needs at least 2 sites")
        if len(self.onsite) != self.n_sites:
            raise ValueError("onsite potential must have one entry per site")
        if self.hopping <= 0:
            raise ValueError("hopping must be positive")
        if self.n_photon < 1:
            raise ValueError("need at least one photon basis state")
        if self.n_electrons % 2 or self.n_electrons <= 0:
            raise ValueError("spin-restricted formalism: even electron count")
        if self.n_electrons > 2 * self.n_sites:
            raise ValueError("more electrons than spin orbitals")

    @classmethod
    def uniform(cls, n_sites: int, hopping: float, mode: CavityMode,
                n_photon: int = 5, n_electrons: int = 2) -> "LatticeModel":
        return cls(n_sites, hopping, (0.0,) * n_sites, mode, n_photon, n_electrons)

    @property
    def site_coordinates(self) -> np.ndarray:
        i = np.arange(self.n_sites, dtype=float)
        return i - (self.n_sites - 1) / 2.0

    @property
    def n_basis(self) -> int:
        return self.n_sites * self.n_photon

    def matter_hamiltonian(self) -> np.ndarray:
        """Electronic tight-binding matrix -t on nearest neighbours + onsite."""
        h = np.diag(np.asarray(self.onsite, dtype=float))
        off = np.full(self.n_sites - 1, -self.hopping)
        h += np.diag(off, 1) + np.diag(off, -1)
        return h


def lattice_one_body_matrix(model: LatticeModel) -> np.ndarray:
    """Dressed one-body matrix (t'+v') on the combined site x photon basis.

    Index order is site-major: row = i * n_photon + alpha.  Contains the
    tight-binding matter part, the photon energy omega*(alpha+1/2), the
    one-body half of the dipole self term, and the bilinear coupling
    -(omega/sqrt(N)) * lambda x * p with p the displacement matrix.
    """
    bm, bph = model.n_sites, model.n_photon
    mode, x = model.mode, model.site_coordinates
    im, iph = np.eye(bm), np.eye(bph)
    p = photon_displacement_matrix(bph, mode.omega)
    h = np.kron(model.matter_hamiltonian(), iph)
    h += np.kron(im, photon_energy_matrix(bph, mode.omega))
    h += np.kron(np.diag(0.5 * mode.coupling**2 * x**2), iph)
    h -= (mode.omega / np.sqrt(model.n_electrons)) * mode.coupling * np.kron(np.diag(x), p)
    return h


def lattice_two_body_pairs(model: LatticeModel) -> list:
    """Dressed two-body operator as a symmetric list of separable pairs.

    W' = sum_t A_t (x) B_t with A_t, B_t one-particle matrices on the
    combined basis:  lambda^2 X(x)X  -  (omega lambda/sqrt(N)) [Q(x)X + X(x)Q],
    where X = diag(x) (x) 1 and Q = 1 (x) p.
    """
    bm, bph = model.n_sites, model.n_photon
    mode, x = model.mode, model.site_coordinates
    lam = mode.coupling
    xop = np.kron(np.diag(x), np.eye(bph))
    qop = np.kron(np.eye(bm), photon_displacement_matrix(bph, mode.omega))
    c = mode.omega / np.sqrt(model.n_electrons) * lam
    return [
        (lam**2, xop, xop),
        (-c, qop, xop),
        (-c, xop, qop),
    ]


def lattice_two_body_tensor(model: LatticeModel) -> np.ndarray:
    """Dense rank-4 tensor w[a,b,c,d] = <a b|W'|c d> on the combined basis.

    Convention: indices (a,c) belong to the first particle, (b,d) to the
    second, i.e. w[a,b,c,d] = sum_t A_t[a,c] * B_t[b,d].  Symmetric under
    particle-pair exchange (a,c) <-> (b,d).
    """
    b = model.n_basis
    w = np.zeros((b, b, b, b))
    for coef, a_op, b_op in lattice_two_body_pairs(model):
        w += coef * np.einsum("ac,bd->abcd", a_op, b_op)
    return w


def he_model(softening: float = 1.0):
    """1D helium: a softened charge Z=2 at the origin."""
    return SoftPotential(charges=((2.0, 0.0),), softening=softening)


def h2_model(separation: float, softening: float = 1.0):
    """1D hydrogen molecule with internuclear separation d (nuclei at +-d/2)."""
    half = 0.5 * separation
    return SoftPotential(charges=((1.0, -half), (1.0, half)), softening=softening)
