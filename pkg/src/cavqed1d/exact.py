"""Exact ground states used as reference for every approximate method.

Two oracles are provided: a configuration-interaction solver for the lattice
plus single-mode systems (Slater determinants times photon number states) and
a direct grid solver for two electrons coupled to one mode, where the full
wave function psi(x1, q1, x2, q2) is represented on the product grid.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.linalg import LinearOperator, eigsh

from .model import Grid1D, LatticeModel, kinetic_matrix, photon_displacement_matrix
from .problems import DressedGridProblem

__all__ = [
    "CIBasis",
    "LatticeGroundState",
    "GridGroundState",
    "exact_lattice_ground_state",
    "exact_lattice_electronic_energy",
    "exact_grid_ground_state",
    "exact_two_electron_energy",
    "lattice_observables",
    "grid_observables",
]

DIMENSION_CAP = 10**7
DEGENERACY_TOL = 1e-10


@dataclass(frozen=True)
class CIBasis:
    """Determinant basis for N electrons in 2*B_m spin orbitals.

    Spin orbital 2*i + s is site i with spin s (s = 0 up, 1 down).
    Determinants are ordered tuples of spin-orbital indices, enumerated in
    lexicographic order (itertools.combinations), which is stable.
    """

    n_sites: int
    n_electrons: int
    determinants: tuple

    @classmethod
    def build(cls, n_sites: int, n_electrons: int) -> "CIBasis":
        dets = tuple(itertools.combinations(range(2 * n_sites), n_electrons))
        return cls(n_sites, n_electrons, dets)

    @property
    def size(self) -> int:
        return len(self.determinants)


def _one_body_ci(basis: CIBasis, h_site: np.ndarray) -> csr_matrix:
    """Spin-free one-body operator sum_ij h_ij c+_is c_js over determinants."""
    index = {d: k for k, d in enumerate(basis.determinants)}
    rows, cols, vals = [], [], []
    for k, det in enumerate(basis.determinants):
        occ = set(det)
        # diagonal
        diag = sum(h_site[so // 2, so // 2] for so in det)
        rows.append(k)
        cols.append(k)
        vals.append(diag)
        # single excitations within the same spin channel
        for pos, so in enumerate(det):
            i, s = so // 2, so % 2
            for j in range(basis.n_sites):
                to = 2 * j + s
                if to in occ or h_site[j, i] == 0.0:
                    continue
                new = sorted(occ - {so} | {to})
                # sign: parity of moving so out and to in
                perm = _excitation_parity(det, so, to)
                rows.append(index[tuple(new)])
                cols.append(k)
                vals.append(perm * h_site[j, i])
    n = basis.size
    return csr_matrix((vals, (rows, cols)), shape=(n, n))


def _excitation_parity(det, removed, added) -> int:
    """Fermionic sign of c+_added c_removed acting on |det>."""
    pos_r = det.index(removed)
    rest = det[:pos_r] + det[pos_r + 1:]
    pos_a = sum(1 for so in rest if so < added)
    return -1 if (pos_r + pos_a) % 2 else 1


def _dipole_diagonal(basis: CIBasis, x: np.ndarray) -> np.ndarray:
    """Total dipole sum_i x_i n_i, diagonal over determinants."""
    d = np.zeros(basis.size)
    for k, det in enumerate(basis.determinants):
        d[k] = sum(x[so // 2] for so in det)
    return d


@dataclass
class LatticeGroundState:
    energy: float
    vector: np.ndarray            # shape (n_det, n_photon)
    basis: CIBasis
    model: LatticeModel
    degenerate: bool = False


def exact_lattice_ground_state(model: LatticeModel,
                               dimension_cap: int = DIMENSION_CAP) -> LatticeGroundState:
    """Lowest eigenpair of the second-quantized lattice + mode Hamiltonian.

    H = H_m + (lambda^2/2) D^2 - omega * lambda * D p + omega (n_ph + 1/2),
    with D the total-dipole operator (diagonal over determinants) and p the
    displacement matrix in the number basis.  Energies include the omega/2
    zero-point term.
    """
    basis = CIBasis.build(model.n_sites, model.n_electrons)
    nd, nph = basis.size, model.n_photon
    if nd * nph > dimension_cap:
        raise ValueError(f"CI dimension {nd * nph} exceeds cap {dimension_cap}")
    hm = _one_body_ci(basis, model.matter_hamiltonian())
    dip = _dipole_diagonal(basis, model.site_coordinates)
    lam, omega = model.mode.coupling, model.mode.omega
    diag_m = 0.5 * lam**2 * dip**2
    p = photon_displacement_matrix(nph, omega)
    eph = omega * (np.arange(nph) + 0.5)

    if nd * nph <= 4000:
        hm_d = hm.toarray()
        h = np.kron(hm_d + np.diag(diag_m), np.eye(nph))
        h += np.kron(np.eye(nd), np.diag(eph))
        h -= omega * lam * np.kron(np.diag(dip), p)
        evals, evecs = np.linalg.eigh(h)
        e0 = evals[0]
        vec = evecs[:, 0]
        degenerate = bool(evals[1] - evals[0] < DEGENERACY_TOL)
    else:
        def matvec(v):
            m = v.reshape(nd, nph)
            out = hm @ m
            out += diag_m[:, None] * m
            out += m * eph[None, :]
            out -= omega * lam * (dip[:, None] * (m @ p.T))
            return out.reshape(-1)

        op = LinearOperator((nd * nph, nd * nph), matvec=matvec, dtype=float)
        evals, evecs = eigsh(op, k=2, which="SA", maxiter=20000)
        order = np.argsort(evals)
        e0 = evals[order[0]]
        vec = evecs[:, order[0]]
        degenerate = bool(evals[order[1]] - e0 < DEGENERACY_TOL)
    vec = vec / np.linalg.norm(vec)
    # deterministic overall sign
    k = int(np.argmax(np.abs(vec)))
    if vec[k] < 0:
        vec = -vec
    return LatticeGroundState(float(e0), vec.reshape(nd, nph), basis, model,
                              degenerate)


def exact_lattice_electronic_energy(model: LatticeModel) -> float:
    """Ground-state energy of the matter part alone (no mode, no coupling)."""
    basis = CIBasis.build(model.n_sites, model.n_electrons)
    hm = _one_body_ci(basis, model.matter_hamiltonian()).toarray()
    return float(np.linalg.eigvalsh(hm)[0])


def lattice_observables(state: LatticeGroundState) -> dict:
    """Electronic 1RDM, photon number and mode occupation of a CI state."""
    model, basis = state.model, state.basis
    vec = state.vector
    nph = model.n_photon
    # electronic 1RDM gamma[i, j] = sum_s <c+_is c_js>
    bm = model.n_sites
    gamma = np.zeros((bm, bm))
    index = {d: k for k, d in enumerate(basis.determinants)}
    rho_ph = vec.T @ vec  # photonic density matrix over number states
    for k, det in enumerate(basis.determinants):
        occ = set(det)
        wk = vec[k]
        for so in det:
            i, s = so // 2, so % 2
            gamma[i, i] += float(wk @ wk)
            for j in range(bm):
                to = 2 * j + s
                if to in occ:
                    continue
                new = tuple(sorted(occ - {so} | {to}))
                sign = _excitation_parity(det, so, to)
                gamma[j, i] += sign * float(vec[index[new]] @ wk)
    n_ph = float(np.arange(nph) @ np.diag(rho_ph))
    occ_e = np.linalg.eigvalsh(gamma)[::-1]
    return {
        "gamma_e": gamma,
        "photon_number": n_ph,
        "electronic_occupations": occ_e,
        "photon_density_matrix": rho_ph,
    }


def exact_dressed_lattice_ground_state(model: LatticeModel,
                                       dimension_cap: int = DIMENSION_CAP):
    """CI ground state of the auxiliary N-polariton lattice problem.

    Determinants over the 2 * B_m * B_ph polaritonic spin orbitals with the
    dressed one-body matrix and the separable two-body pairs.  Because the
    dressed construction is exact, the returned auxiliary energy minus
    (N-1) omega/2 agrees with the physical oracle to solver precision; this
    is used as a consistency check of the kernels.  Returns (E_physical,
    E_auxiliary).
    """
    from .model import lattice_one_body_matrix, lattice_two_body_pairs

    nb = model.n_basis
    n_el = model.n_electrons
    h1 = lattice_one_body_matrix(model)
    pairs = lattice_two_body_pairs(model)
    w4 = np.zeros((nb, nb, nb, nb))
    for coef, a_op, b_op in pairs:
        w4 += coef * np.einsum("pr,qs->pqrs", a_op, b_op)

    dets = list(itertools.combinations(range(2 * nb), n_el))
    ndet = len(dets)
    if ndet > dimension_cap:
        raise ValueError(f"dressed CI dimension {ndet} exceeds cap")
    index = {d: k for k, d in enumerate(dets)}
    ham = np.zeros((ndet, ndet))
    for k, det in enumerate(dets):
        occ = set(det)
        orbs = [(so // 2, so % 2) for so in det]
        # diagonal
        e = sum(h1[p, p] for p, _ in orbs)
        for i in range(n_el):
            pi, si = orbs[i]
            for j in range(i + 1, n_el):
                pj, sj = orbs[j]
                e += w4[pi, pj, pi, pj]
                if si == sj:
                    e -= w4[pi, pj, pj, pi]
        ham[k, k] = e
        # single excitations
        for so in det:
            p, s = so // 2, so % 2
            for a in range(nb):
                to = 2 * a + s
                if to in occ:
                    continue
                val = h1[a, p]
                for so2 in det:
                    if so2 == so:
                        continue
                    q, s2 = so2 // 2, so2 % 2
                    val += w4[a, q, p, q]
                    if s2 == s:
                        val -= w4[a, q, q, p]
                if val == 0.0:
                    continue
                new = tuple(sorted(occ - {so} | {to}))
                sign = _excitation_parity(det, so, to)
                ham[index[new], k] += sign * val
        # double excitations: replace (so1, so2) by (a, b), paired in order
        for (so1, so2) in itertools.combinations(det, 2):
            p1, s1 = so1 // 2, so1 % 2
            p2, s2 = so2 // 2, so2 % 2
            for a in range(2 * nb):
                if a in occ:
                    continue
                pa, sa = a // 2, a % 2
                for b in range(a + 1, 2 * nb):
                    if b in occ:
                        continue
                    pb, sb = b // 2, b % 2
                    val = 0.0
                    if sa == s1 and sb == s2:
                        val += w4[pa, pb, p1, p2]
                    if sa == s2 and sb == s1:
                        val -= w4[pa, pb, p2, p1]
                    if val == 0.0:
                        continue
                    new, sign = _apply_ordered(det, (so2, so1), (a, b))
                    ham[index[new], k] += sign * val
    evals = np.linalg.eigvalsh(ham)
    e_aux = float(evals[0])
    shift = (n_el - 1) * 0.5 * model.mode.omega
    return e_aux - shift, e_aux


def _apply_ordered(det, removed, added):
    """Sign and resulting determinant of c+_{a2} c+_{a1} c_{r1} c_{r2} |det>
    for removed = (r1, r2) applied right-to-left and added = (a1, a2)."""
    lst = list(det)
    sign = 1
    for r in reversed(removed):
        pos = lst.index(r)
        if pos % 2 == 1:
            sign = -sign
        lst.pop(pos)
    for a in added:
        pos = 0
        while pos < len(lst) and lst[pos] < a:
            pos += 1
        if pos % 2 == 1:
            sign = -sign
        lst.insert(pos, a)
    return tuple(lst), sign


@dataclass
class GridGroundState:
    energy: float                 # physical energy (shift applied)
    auxiliary_energy: float
    vector: np.ndarray            # psi(z1, z2) as an (n_z, n_z) matrix
    problem: object


def exact_grid_ground_state(problem: DressedGridProblem, tol: float = 1e-10,
                            memory_cap: float = 2.0e8) -> GridGroundState:
    """Ground state of the dressed two-particle problem on the (x,q) grid.

    Solves H' psi = E' psi for psi(x1,q1,x2,q2) with a matrix-free Lanczos
    iteration; the reported energy is E' - (N-1) omega/2 plus any constant
    shift carried by the problem.  The two-particle wave function of the
    (spatially symmetric) singlet ground state needs no explicit
    symmetrization: the nodeless lowest state is symmetric.
    """
    if problem.n_electrons != 2:
        raise ValueError("grid oracle is implemented for two electrons")
    nz = problem.n_basis
    if nz * nz > memory_cap:
        raise MemoryError(f"two-particle grid dimension {nz}^2 exceeds budget")
    nx, nq = problem.shape
    dv = problem.weight

    # interaction diagonal w'(z1, z2) on the product of flattened z grids
    x = problem.x
    q = problem.q
    xz = np.broadcast_to(x[:, None], (nx, nq)).reshape(-1)
    qz = np.broadcast_to(q[None, :], (nx, nq)).reshape(-1)
    lam = problem.mode.coupling
    c = problem.mode.omega / np.sqrt(problem.n_electrons) * lam
    wdiag = -c * (np.outer(qz, xz) + np.outer(xz, qz)) + lam**2 * np.outer(xz, xz)
    if problem.wmat_x is not None:
        wx = problem.wmat_x
        wdiag += np.repeat(np.repeat(wx, nq, axis=0), nq, axis=1)

    tx, tq, vxq = problem.tx, problem.tq, problem.vxq

    def matvec(v):
        m = v.reshape(nx, nq, nx, nq)
        out = np.tensordot(tx, m, axes=(1, 0))
        out += np.moveaxis(np.tensordot(tq, m, axes=(1, 1)), 0, 1)
        out += np.moveaxis(np.tensordot(tx, m, axes=(1, 2)), 0, 2)
        out += np.moveaxis(np.tensordot(tq, m, axes=(1, 3)), 0, 3)
        out += vxq[:, :, None, None] * m
        out += vxq[None, None, :, :] * m
        out += wdiag.reshape(nx, nq, nx, nq) * m
        return out.reshape(-1)

    op = LinearOperator((nz * nz, nz * nz), matvec=matvec, dtype=float)
    # symmetric product of the lowest dressed orbital: large ground-state
    # overlap, cuts the Lanczos iteration count considerably
    _, orb = problem.ip_orbitals(1, tol=1e-8)
    v0 = np.outer(orb[:, 0], orb[:, 0]).reshape(-1)
    evals, evecs = eigsh(op, k=1, which="SA", tol=tol, maxiter=50000,
                         v0=v0, ncv=16)
    e_aux = float(evals[0])
    psi = evecs[:, 0].reshape(nz, nz)
    psi = psi / (np.linalg.norm(psi) * dv)  # grid normalization over both z
    k = int(np.argmax(np.abs(psi)))
    if psi.flat[k] < 0:
        psi = -psi
    return GridGroundState(e_aux + problem.energy_shift, e_aux, psi, problem)


def exact_two_electron_energy(grid: Grid1D, potential, interaction,
                              sparse_cutoff: int = 3600) -> float:
    """Exact ground-state energy of two electrons on an electronic grid."""
    n = grid.n_points
    x = grid.points
    h = kinetic_matrix(grid) + np.diag(potential(x))
    wd = interaction(x[:, None], x[None, :]) if interaction is not None else 0.0

    def matvec(v):
        m = v.reshape(n, n)
        out = h @ m
        out += (h @ m.T).T
        out += wd * m
        return out.reshape(-1)

    if n <= 60:
        hm = np.kron(h, np.eye(n)) + np.kron(np.eye(n), h) + np.diag(np.ravel(wd * np.ones((n, n))))
        return float(np.linalg.eigvalsh(hm)[0])
    op = LinearOperator((n * n, n * n), matvec=matvec, dtype=float)
    return float(eigsh(op, k=1, which="SA", tol=1e-11, maxiter=50000,
                       return_eigenvectors=False)[0])


def grid_observables(state: GridGroundState) -> dict:
    """Densities, 1RDMs and photon observables of a two-particle grid state."""
    problem: DressedGridProblem = state.problem
    psi = state.vector
    nx, nq = problem.shape
    dv = problem.weight
    dx, dq = problem.grid_x.spacing, problem.grid_q.spacing

    # polaritonic (spin-summed) 1RDM gamma(z, z') = 2 int psi(z,z2) psi(z',z2) dz2
    gamma = 2.0 * (psi @ psi.T) * dv
    den_z = np.diag(gamma).reshape(nx, nq)
    rho_x = den_z.sum(axis=1) * dq
    rho_q = den_z.sum(axis=0) * dx

    # electronic 1RDM gamma_e(x, x') = int gamma(xq, x'q) dq
    g4 = gamma.reshape(nx, nq, nx, nq)
    gamma_e = np.einsum("iaja->ij", g4) * dq

    # photon-mode energy from the auxiliary oscillator of each polariton
    hq = problem.hq_energy
    g_q = np.einsum("iaib->ab", g4) * dx   # photonic reduced matrix over q
    e_ph_aux = float(np.einsum("ab,ba->", hq * dq, g_q))
    n_elec = problem.n_electrons
    omega = problem.mode.omega
    e_ph = e_ph_aux - (n_elec - 1) * 0.5 * omega
    n_ph = e_ph_aux / omega - n_elec / 2.0

    occ_e = np.sort(np.linalg.eigvalsh(gamma_e * dx))[::-1]
    return {
        "density_x": rho_x,
        "density_q": rho_q,
        "gamma": gamma,
        "gamma_e": gamma_e,
        "electronic_occupations": occ_e,
        "photon_energy": e_ph,
        "photon_number": max(n_ph, 0.0) if n_ph > -1e-10 else n_ph,
        "mode_occupation": n_ph,
    }
