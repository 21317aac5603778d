"""Mueller-functional RDMFT: occupation optimization and two orbital solvers.

The functional is
    E[{phi}, {n}] = sum_i n_i <phi_i|h|phi_i>
                    + 1/2 sum_ij n_i n_j (ii|w|jj)
                    - 1/2 sum_ij sqrt(n_i n_j) (ij|w|ji),
with spin-summed occupations 0 <= n_i <= 2, sum_i n_i = N.  Occupations are
parametrized as n = 2 sin^2(2 pi theta), which enforces the bounds exactly;
the sum rule is handled by a chemical potential found with bisection.  Two
interchangeable orbital optimizers are provided: iterative diagonalization of
the auxiliary F matrix built from the Lagrange-multiplier asymmetry (basis-set
path) and direct conjugate-gradient minimization on the grid (real orbitals).
Integer occupations reduce everything to restricted HF.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hf import SCFConfig

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

__all__ = [
    "RDMFTConfig",
    "IntegralTables",
    "RDMFTResult",
    "mueller_energy_tables",
    "mueller_energy",
    "occupation_gradient",
    "occupation_lagrangian_minimize",
    "occupation_sum_mismatch",
    "occupation_optimize",
    "initial_occupations",
    "piris_orbital_step",
    "cg_minimize_orbitals",
    "rdmft_driver",
]

N_FLOOR = 1e-8          # occupations below this are frozen in n-space gradients
N_THRESH = 1e-5         # initialization offset away from pinned values


@dataclass(frozen=True)
class RDMFTConfig:
    """Settings of the alternating occupation/orbital minimization."""

    energy_tol: float = 1e-9        # relative, |E - E_occ| / |E|
    lagrange_tol: float = 1e-6      # F_max threshold of the basis-set path
    orbital_tol: float = 1e-9      # squared CG residual threshold
    mu_tol: float = 1e-9            # |sum n - N| at the bisection root
    theta_gtol: float = 1e-11       # gradient norm of the inner minimizer
    max_outer: int = 60
    max_piris: int = 200
    max_cg_sweeps: int = 3
    max_cg: int = 30


# ---------------------------------------------------------------------------
# occupation-number machinery
# ---------------------------------------------------------------------------

def _theta_from_n(n: np.ndarray) -> np.ndarray:
    n = np.clip(np.asarray(n, dtype=float), 0.0, 2.0)
    return np.arcsin(np.sqrt(n / 2.0)) / (2.0 * np.pi)


def _n_from_theta(theta: np.ndarray) -> np.ndarray:
    return 2.0 * np.sin(2.0 * np.pi * theta) ** 2


def _fold_theta(theta: np.ndarray) -> np.ndarray:
    """Fold angles into [0, 1/4], where n(theta) is monotone increasing."""
    t = np.remainder(theta, 0.5)
    return np.where(t > 0.25, 0.5 - t, t)


def mueller_energy_tables(n, h_ii, hartree, exchange) -> float:
    """Mueller energy for fixed orbitals from precomputed integral tables."""
    n = np.asarray(n, dtype=float)
    sq = np.sqrt(np.maximum(n, 0.0))
    return float(n @ h_ii + 0.5 * n @ hartree @ n - 0.5 * sq @ exchange @ sq)


def occupation_gradient(n, h_ii, hartree, exchange, floor: float = N_FLOOR):
    """dE/dn_i = h_ii + sum_j n_j (ii|jj) - 1/2 sum_j sqrt(n_j/n_i) (ij|ji).

    The exchange term carries the factor 1/2 that differentiating
    -1/2 sum_jk sqrt(n_j n_k) (jk|kj) actually produces (the symmetric
    double sum doubles the Hartree derivative but only compensates half of
    the square-root chain rule); verified against finite differences.
    Components with n_i below ``floor`` are frozen (returned as zero); the
    remaining square roots are evaluated with n_i clipped at the floor.
    """
    n = np.asarray(n, dtype=float)
    active = n > floor
    nc = np.maximum(n, floor)
    grad = h_ii + hartree @ n - 0.5 * (exchange @ np.sqrt(nc)) / np.sqrt(nc)
    return np.where(active, grad, 0.0)


def _theta_gradient(theta, mu, h_ii, hartree, exchange):
    """Gradient of L = E - mu (sum n - N) with respect to theta.

    Uses dn/dtheta and d(sqrt n)/dtheta directly, so no occupation floor is
    needed: the exchange term stays finite at n = 0.
    """
    n = _n_from_theta(theta)
    s, c = np.sin(2.0 * np.pi * theta), np.cos(2.0 * np.pi * theta)
    dn = 8.0 * np.pi * s * c
    dsqrt = 2.0 * np.sqrt(2.0) * np.pi * c * np.sign(s)
    hart = h_ii + hartree @ n - mu
    exch = exchange @ (np.sqrt(2.0) * np.abs(s))
    return hart * dn - exch * dsqrt


@njit(cache=True)
def _descend_theta(theta, mu, h_ii, hartree, exchange, gtol, max_iter):
    """Backtracking gradient descent on the occupation Lagrangian in theta.

    Slow but monotone by construction; quasi-Newton steps are deliberately
    avoided because approximate Hessians mislocate the boundary minima where
    occupations pin at 0 or 2, corrupting the root search over mu.
    """
    m = theta.size
    two_pi = 2.0 * np.pi
    sqrt2 = np.sqrt(2.0)

    def fold(t):
        out = np.empty(m)
        for i in range(m):
            x = t[i] % 0.5
            out[i] = 0.5 - x if x > 0.25 else x
        return out

    def lagr(t):
        n = 2.0 * np.sin(two_pi * t) ** 2
        sq = sqrt2 * np.abs(np.sin(two_pi * t))
        e = n @ h_ii + 0.5 * (n @ (hartree @ n)) - 0.5 * (sq @ (exchange @ sq))
        return e - mu * n.sum()

    theta = fold(theta)
    for i in range(m):
        if theta[i] < 1e-7:
            theta[i] = 1e-7
        elif theta[i] > 0.25 - 1e-7:
            theta[i] = 0.25 - 1e-7

    f = lagr(theta)
    step = 1e-2
    theta_prev = theta.copy()
    grad_prev = np.zeros(m)
    have_prev = False
    fails = 0
    descent_tol = max(gtol, 1e-6)
    for _ in range(max_iter):
        s = np.sin(two_pi * theta)
        c = np.cos(two_pi * theta)
        n = 2.0 * s * s
        dn = 8.0 * np.pi * s * c
        dsqrt = sqrt2 * two_pi * c * np.sign(s)
        grad = (h_ii + hartree @ n - mu) * dn \
            - (exchange @ (sqrt2 * np.abs(s))) * dsqrt
        gnorm = np.max(np.abs(grad))
        if gnorm < descent_tol:
            break
        # spectral (Barzilai-Borwein) scalar step along the plain gradient,
        # kept monotone by Armijo backtracking
        if have_prev:
            dth = theta - theta_prev
            dg = grad - grad_prev
            denom = dth @ dg
            if denom > 1e-300:
                step = min(max((dth @ dth) / denom, 1e-10), 10.0)
            else:
                step = max(step, 1e-3)  # negative curvature: fresh step
        theta_prev = theta.copy()
        grad_prev = grad.copy()
        have_prev = True
        improved = False
        gsq = grad @ grad
        for _ in range(100):
            trial = fold(theta - step * grad)
            ft = lagr(trial)
            if ft <= f - 1e-4 * step * gsq:
                theta = trial
                f = ft
                improved = True
                break
            step *= 0.5
        if not improved:
            fails += 1
            step = 1e-3 / fails
            if fails > 3:
                break
        else:
            fails = 0

    # Diagonal Newton polish: the monotone descent cannot certify progress
    # once Lagrangian differences fall below machine precision, so the
    # stationarity condition is refined as a root-finding problem within the
    # basin found above (steps capped, reverted if the gradient grows).
    for _ in range(80):
        s = np.sin(two_pi * theta)
        c = np.cos(two_pi * theta)
        n = 2.0 * s * s
        dn = 8.0 * np.pi * s * c
        d2n = 16.0 * np.pi**2 * np.cos(2.0 * two_pi * theta)
        dsq = sqrt2 * two_pi * c * np.sign(s)
        d2sq = -sqrt2 * two_pi**2 * s * np.sign(s)
        a_vec = h_ii + hartree @ n - mu
        x_vec = exchange @ (sqrt2 * np.abs(s))
        grad = a_vec * dn - x_vec * dsq
        gnorm = np.max(np.abs(grad))
        if gnorm < gtol:
            break
        hd = np.diag(hartree)
        xd = np.diag(exchange)
        hess = (a_vec * d2n + hd * dn * dn
                - x_vec * d2sq - xd * dsq * dsq)
        moved = False
        for i in range(m):
            if np.abs(hess[i]) < 1e-14:
                continue
            dt = -grad[i] / hess[i]
            if dt > 1e-3:
                dt = 1e-3
            elif dt < -1e-3:
                dt = -1e-3
            ti = theta[i] + dt
            if ti < 1e-9:
                ti = 1e-9
            elif ti > 0.25:
                ti = 0.25
            if ti != theta[i]:
                theta[i] = ti
                moved = True
        if not moved:
            break
        s = np.sin(two_pi * theta)
        c = np.cos(two_pi * theta)
        n = 2.0 * s * s
        dn = 8.0 * np.pi * s * c
        dsq = sqrt2 * two_pi * c * np.sign(s)
        g_new = (h_ii + hartree @ n - mu) * dn \
            - (exchange @ (sqrt2 * np.abs(s))) * dsq
        if np.max(np.abs(g_new)) > gnorm:
            theta = theta_prev.copy()
            break
        theta_prev = theta.copy()
    return theta, lagr(theta)


def occupation_lagrangian_minimize(mu, theta0, h_ii, hartree, exchange,
                                   gtol: float = 1e-11, max_iter: int = 5000):
    """Minimize L(n; mu) = E[n] - mu sum n over theta (bounds built in)."""
    theta = np.ascontiguousarray(np.asarray(theta0, dtype=float))
    theta, f = _descend_theta(theta, float(mu), np.ascontiguousarray(h_ii),
                              np.ascontiguousarray(hartree),
                              np.ascontiguousarray(exchange),
                              float(gtol), int(max_iter))
    return _fold_theta(theta), f


def occupation_sum_mismatch(mu, theta0, n_electrons, h_ii, hartree, exchange,
                            gtol: float = 1e-11):
    """S(mu) = sum_i n_i*(mu) - N with n*(mu) the inner minimizer."""
    theta, _ = occupation_lagrangian_minimize(mu, theta0, h_ii, hartree,
                                              exchange, gtol=gtol)
    return float(np.sum(_n_from_theta(theta))) - n_electrons, theta


def occupation_optimize(h_ii, hartree, exchange, n_electrons,
                        n_start=None, mu_tol: float = 1e-9,
                        theta_gtol: float = 1e-11,
                        max_expand: int = 60, max_bisect: int = 200):
    """Find occupations summing to N and the chemical potential mu*.

    An initial bracket with S(mu_lo) < 0 < S(mu_hi) is found by expansion
    around the range of diagonal matrix elements, then refined by bisection.
    Returns (n*, mu*, diagnostics).
    """
    m = len(h_ii)
    if n_start is None:
        n_start = initial_occupations(m, n_electrons)
    # every node restarts the inner minimizer from the same deterministic
    # point: warm-starting across mu can hand a pinned configuration to the
    # next node and produce spurious jumps in S(mu)
    theta0 = _theta_from_n(n_start)

    def s_of(mu):
        s, theta = occupation_sum_mismatch(mu, theta0, n_electrons,
                                           h_ii, hartree, exchange, theta_gtol)
        return s, theta

    lo = float(np.min(h_ii)) - 1.0
    hi = float(np.max(h_ii) + np.abs(hartree).sum(axis=1).max()) + 1.0
    s_lo, _ = s_of(lo)
    width = max(hi - lo, 1.0)
    for _ in range(max_expand):
        if s_lo < 0:
            break
        lo -= width
        width *= 2.0
        s_lo, _ = s_of(lo)
    else:
        raise RuntimeError("no lower bracket for the chemical potential")
    s_hi, _ = s_of(hi)
    width = max(hi - lo, 1.0)
    for _ in range(max_expand):
        if s_hi > 0:
            break
        hi += width
        width *= 2.0
        s_hi, _ = s_of(hi)
    else:
        raise RuntimeError("no upper bracket for the chemical potential")

    trace = [(lo, s_lo), (hi, s_hi)]
    theta_mid = theta0
    mu_mid, s_mid = lo, s_lo
    for _ in range(max_bisect):
        mu_mid = 0.5 * (lo + hi)
        s_mid, theta_mid = s_of(mu_mid)
        trace.append((mu_mid, s_mid))
        if abs(s_mid) < mu_tol or 0.5 * (hi - lo) < 1e-13:
            break
        if s_mid < 0:
            lo = mu_mid
        else:
            hi = mu_mid
    n_opt = _n_from_theta(theta_mid)
    diag = {"trace": sorted(trace), "mu": mu_mid, "mismatch": s_mid}
    return n_opt, mu_mid, diag


def initial_occupations(n_orbitals: int, n_electrons: int,
                        thresh: float = N_THRESH) -> np.ndarray:
    """Aufbau start nudged off the pinned values by ``thresh``."""
    n = np.full(n_orbitals, thresh)
    n[: n_electrons // 2] = 2.0 - thresh
    return n


# ---------------------------------------------------------------------------
# integral tables in a fixed orbital basis (basis-set path)
# ---------------------------------------------------------------------------

class IntegralTables:
    """One- and two-body integrals of a problem in a fixed orthonormal basis.

    The two-body tensor uses the convention
        w4[a, b, c, d] = <chi_a chi_b | w | chi_c chi_d>
                       = int chi_a(z) chi_c(z) w(z,z') chi_b(z') chi_d(z').
    """

    def __init__(self, problem, basis: np.ndarray):
        self.problem = problem
        self.basis = basis
        m = basis.shape[1]
        w = problem.weight
        self.m = m
        self.h1 = w * (basis.T @ problem.h_apply(basis))
        pair = np.einsum("za,zc->zac", basis, basis).reshape(basis.shape[0], m * m)
        applied = _apply_pairs(problem, pair)
        # the matmul yields axes (a, c, b, d); permute to the documented order
        self.w4 = (w * pair.T @ applied).reshape(m, m, m, m).transpose(0, 2, 1, 3)
        self.w4 = np.ascontiguousarray(self.w4)
        # symmetrize against roundoff: particle exchange (a,c) <-> (b,d)
        self.w4 = 0.5 * (self.w4 + self.w4.transpose(1, 0, 3, 2))

    def coulomb_fixed(self, dmat: np.ndarray) -> np.ndarray:
        """J[a,c] = sum_bd w4[a,b,c,d] D[b,d]."""
        return np.tensordot(self.w4, dmat, axes=([1, 3], [0, 1]))

    def exchange_fixed(self, dmat: np.ndarray) -> np.ndarray:
        """X[a,d] = sum_bc w4[a,b,c,d] D[c,b]."""
        return np.tensordot(self.w4, dmat, axes=([2, 1], [0, 1]))

    def orbital_tables(self, coeff: np.ndarray):
        """(h_ii, hartree, exchange) tables for orbitals phi_i = basis @ C."""
        phi = self.basis @ coeff
        return _grid_tables(self.problem, phi)

    def energy(self, coeff: np.ndarray, n: np.ndarray) -> float:
        """Mueller energy from the fixed-basis density matrices (no tables)."""
        sq = np.sqrt(np.maximum(n, 0.0))
        dmat = (coeff * n) @ coeff.T
        dsq = (coeff * sq) @ coeff.T
        e = float(np.einsum("ab,ba->", self.h1, dmat))
        e += 0.5 * float(np.einsum("abcd,ca,db->", self.w4, dmat, dmat, optimize=True))
        e -= 0.5 * float(np.einsum("abcd,ad,cb->", self.w4, dsq, dsq, optimize=True))
        return e

    def lagrange_matrix(self, coeff: np.ndarray, n: np.ndarray) -> np.ndarray:
        """eps[k,i] = <phi_k| dE/dphi_i*> in the current orbital basis."""
        sq = np.sqrt(np.maximum(n, 0.0))
        dmat = (coeff * n) @ coeff.T
        dsq = (coeff * sq) @ coeff.T
        hj = self.h1 + self.coulomb_fixed(dmat)
        xf = self.exchange_fixed(dsq)
        ht = coeff.T @ hj @ coeff
        xt = coeff.T @ xf @ coeff
        return ht * n[None, :] - xt * sq[None, :]


def piris_orbital_step(tables: IntegralTables, coeff: np.ndarray,
                       n: np.ndarray, f_diag: np.ndarray):
    """One diagonalization of the auxiliary F matrix.

    Off-diagonals carry the asymmetry of the Lagrange-multiplier matrix
    (zero at stationarity); the diagonal is prescribed externally.  Returns
    the rotated coefficients, F_max = max |off-diagonal|, and the rotation.
    """
    eps = tables.lagrange_matrix(coeff, n)
    asym = eps.T - eps
    fmat = np.triu(asym, 1)
    fmat = fmat + fmat.T
    f_max = float(np.max(np.abs(fmat))) if fmat.size else 0.0
    fmat[np.diag_indices_from(fmat)] = f_diag
    _, rot = np.linalg.eigh(fmat)
    # fix eigenvector signs for determinism
    signs = np.sign(rot[np.argmax(np.abs(rot), axis=0), np.arange(rot.shape[1])])
    rot = rot * signs
    return coeff @ rot, f_max, eps


# ---------------------------------------------------------------------------
# conjugate-gradient orbital minimization on the grid (real orbitals)
# ---------------------------------------------------------------------------

def _hartree_potential(problem, occupations, orbitals):
    den = np.einsum("i,zi->z", occupations, orbitals**2)
    return problem.w_apply_pair(den)


def _h1_apply(problem, occupations, orbitals, v_h, i, phi=None):
    """H^1 phi_i = n_i (h + v_H) phi_i - sqrt(n_i) sum_j sqrt(n_j) phi_j W[phi_j phi_i]."""
    ni = occupations[i]
    target = orbitals[:, i] if phi is None else phi
    out = ni * (problem.h_apply(target) + v_h * target)
    if ni == 0.0:
        return out
    sq = np.sqrt(np.maximum(occupations, 0.0))
    acc = np.zeros_like(target)
    for j in range(orbitals.shape[1]):
        if sq[j] == 0.0:
            continue
        pj = orbitals[:, j]
        acc += sq[j] * pj * problem.w_apply_pair(pj * target)
    return out - np.sqrt(ni) * acc


def mueller_energy(problem, occupations, orbitals) -> float:
    """Mueller energy of grid orbitals (auxiliary scale, no shift)."""
    w = problem.weight
    n = np.asarray(occupations, dtype=float)
    sq = np.sqrt(np.maximum(n, 0.0))
    e = float(n @ (w * np.einsum("zi,zi->i", orbitals, problem.h_apply(orbitals))))
    m = orbitals.shape[1]
    for i in range(m):
        if n[i] == 0.0:
            continue
        pi = orbitals[:, i]
        vii = problem.w_apply_pair(pi * pi)
        for j in range(m):
            if n[j] == 0.0:
                continue
            pj = orbitals[:, j]
            e += 0.5 * n[i] * n[j] * w * float(vii @ (pj * pj))
            vij = problem.w_apply_pair(pi * pj)
            e -= 0.5 * sq[i] * sq[j] * w * float(vij @ (pi * pj))
    return e


def _orbital_energy_slice(problem, occupations, orbitals, i, phi_i) -> float:
    """Terms of the Mueller energy that involve orbital i, with phi_i replaced."""
    w = problem.weight
    n = occupations
    sq = np.sqrt(np.maximum(n, 0.0))
    e = n[i] * w * float(phi_i @ (problem.h_apply(phi_i)))
    vii = problem.w_apply_pair(phi_i * phi_i)
    e += 0.5 * n[i] ** 2 * w * float(vii @ (phi_i * phi_i))
    e -= 0.5 * n[i] * w * float(vii @ (phi_i * phi_i))
    for j in range(orbitals.shape[1]):
        if j == i or n[j] == 0.0:
            continue
        pj = orbitals[:, j]
        e += n[i] * n[j] * w * float(vii @ (pj * pj))
        vij = problem.w_apply_pair(phi_i * pj)
        e -= sq[i] * sq[j] * w * float(vij @ (phi_i * pj))
    return e


def line_minimization_derivative(problem, occupations, orbitals, i, xi,
                                 theta: float = 0.0) -> float:
    """dE/dTheta for phi_i(Theta) = cos(Theta) phi_i + sin(Theta) xi.

    The derivative is 2 <dphi/dTheta | H^1[phi(Theta)] phi(Theta)> for real
    orbitals, with the one-body Hamiltonian rebuilt on the trial set.
    """
    phi = np.cos(theta) * orbitals[:, i] + np.sin(theta) * xi
    dphi = -np.sin(theta) * orbitals[:, i] + np.cos(theta) * xi
    trial = orbitals.copy()
    trial[:, i] = phi
    v_h = _hartree_potential(problem, occupations, trial)
    h1phi = _h1_apply(problem, occupations, trial, v_h, i)
    return 2.0 * problem.weight * float(dphi @ h1phi)


def cg_minimize_orbitals(problem, occupations, orbitals, config: SCFConfig | RDMFTConfig,
                         sweeps: int | None = None):
    """Relax all orbitals by per-orbital conjugate-gradient line minimization.

    Real orbitals; each orbital's search direction is orthogonalized against
    itself and the already-optimized lower states, the Lagrange-multiplier
    couplings to every state are estimated from the cross-gradient
    projections eps_ik = <H^1 phi_i, phi_k>.  The angle of the analytic
    first-order Fourier line minimum is safeguarded by a backtracking energy
    check, so the energy sequence is non-increasing.
    """
    w = problem.weight
    orbitals = orbitals.copy()
    m = orbitals.shape[1]
    max_cg = getattr(config, "max_cg", 30)
    orb_tol = getattr(config, "orbital_tol", 1e-9)
    den_tol = getattr(config, "density_tol", 1e-8)
    if sweeps is None:
        sweeps = getattr(config, "max_outer", 50)
    energy = mueller_energy(problem, occupations, orbitals)
    density = np.einsum("i,zi->z", occupations, orbitals**2)
    history = [energy]
    converged = False
    it_count = 0
    for _ in range(sweeps):
        max_res = 0.0
        for k in range(m):
            # Gram-Schmidt against previously optimized states
            for i in range(k):
                orbitals[:, k] -= w * (orbitals[:, i] @ orbitals[:, k]) * orbitals[:, i]
            norm = np.sqrt(w) * np.linalg.norm(orbitals[:, k])
            orbitals[:, k] /= norm
            xi_prev = None
            zeta_prev_sq = None
            res_prev = None
            for _ in range(max_cg):
                it_count += 1
                v_h = _hartree_potential(problem, occupations, orbitals)
                h1 = np.stack([_h1_apply(problem, occupations, orbitals, v_h, i)
                               for i in range(m)], axis=1)
                eps_row = w * (h1.T @ orbitals[:, k])   # eps[i, k] for all i
                zeta = -(h1[:, k] - orbitals @ eps_row)
                res = w * float(zeta @ zeta)
                if res_prev is not None and res < orb_tol and res_prev < orb_tol:
                    break
                res_prev = res
                eta = zeta - w * (orbitals[:, k] @ zeta) * orbitals[:, k]
                for i in range(k):
                    eta -= w * (orbitals[:, i] @ zeta) * orbitals[:, i]
                zeta_sq = w * float(eta @ zeta)
                if xi_prev is not None and zeta_prev_sq and zeta_prev_sq > 0:
                    gamma = zeta_sq / zeta_prev_sq
                    xi = eta + gamma * xi_prev
                else:
                    xi = eta
                zeta_prev_sq = zeta_sq
                xi = xi - w * (orbitals[:, k] @ xi) * orbitals[:, k]
                xin = np.sqrt(w) * np.linalg.norm(xi)
                if xin < 1e-14:
                    break
                xi = xi / xin
                xi_prev = xi
                # first-order Fourier line minimization with energy safeguard
                e0 = _orbital_energy_slice(problem, occupations, orbitals, k,
                                           orbitals[:, k])
                # first-order Fourier model: B1 from the analytic derivative,
                # A1 from the curvature at Theta = 0 (central differences of
                # the analytic derivative)
                deriv = 2.0 * w * float(xi @ h1[:, k])
                b1 = 0.5 * deriv
                dh = 1e-3
                curv = (line_minimization_derivative(problem, occupations,
                                                     orbitals, k, xi, dh)
                        - line_minimization_derivative(problem, occupations,
                                                       orbitals, k, xi, -dh)) / (2 * dh)
                a1 = -0.25 * curv
                if abs(a1) < 1e-15 and abs(b1) < 1e-15:
                    break
                theta = 0.5 * np.arctan2(-b1, -a1)
                if theta <= 0.0:
                    theta += np.pi
                accepted = False
                for _ in range(25):
                    trial = np.cos(theta) * orbitals[:, k] + np.sin(theta) * xi
                    et = _orbital_energy_slice(problem, occupations, orbitals, k, trial)
                    if et <= e0 + 1e-13:
                        orbitals[:, k] = trial
                        accepted = True
                        break
                    theta *= 0.5
                if not accepted:
                    break
            max_res = max(max_res, res_prev if res_prev is not None else 0.0)
        energy_new = mueller_energy(problem, occupations, orbitals)
        history.append(energy_new)
        rel = abs(energy_new - energy) / max(abs(energy_new), 1e-14)
        energy = energy_new
        density_new = np.einsum("i,zi->z", occupations, orbitals**2)
        den_change = w * float(np.sum(np.abs(density_new - density)))
        density = density_new
        if (max_res < orb_tol and rel < getattr(config, "energy_tol", 1e-9)
                and den_change < den_tol):
            converged = True
            break
    return orbitals, {"converged": converged, "iterations": it_count,
                      "history": history, "max_residual": max_res,
                      "density_change": den_change}


# ---------------------------------------------------------------------------
# alternating driver
# ---------------------------------------------------------------------------

@dataclass
class RDMFTResult:
    energy: float                 # physical total energy (shift included)
    auxiliary_energy: float
    occupations: np.ndarray       # descending
    natural_orbitals: np.ndarray  # (n_basis, M) on the grid / lattice basis
    mu: float
    converged: bool
    outer_iterations: int
    f_max: float = np.nan
    history: list = field(default_factory=list)

    def gamma(self) -> np.ndarray:
        """Kernel of the spin-summed 1RDM, sum_i n_i phi_i(z) phi_i(z')."""
        return (self.natural_orbitals * self.occupations) @ self.natural_orbitals.T


def _sorted_by_occupation(n, orbitals):
    order = np.lexsort((np.arange(len(n)), -n))
    return n[order], orbitals[:, order]


def rdmft_driver(problem, n_orbitals: int, optimizer: str = "piris",
                 config: RDMFTConfig = RDMFTConfig(), basis=None) -> RDMFTResult:
    """Alternate occupation and orbital optimization until self-consistency.

    ``n_orbitals`` is the number of natural orbitals M; for the basis-set
    (Piris) path the same M independent-particle states form the fixed basis
    unless ``basis`` is supplied.
    """
    if optimizer not in ("piris", "cg"):
        raise ValueError("optimizer must be 'piris' or 'cg'")
    n_el = problem.n_electrons
    if basis is None:
        _, basis_orbs = problem.ip_orbitals(n_orbitals)
    else:
        basis_orbs = basis
    m = basis_orbs.shape[1]

    history = []
    converged = False
    f_max = np.nan
    mu = 0.0

    if optimizer == "piris":
        tables = IntegralTables(problem, basis_orbs)
        coeff = np.eye(m)
        n = initial_occupations(m, n_el)
        e_prev = np.inf
        energy = np.inf
        for outer in range(1, config.max_outer + 1):
            h_ii, eh, ex = tables.orbital_tables(coeff)
            n, mu, _ = occupation_optimize(h_ii, eh, ex, n_el, n_start=n,
                                           mu_tol=config.mu_tol,
                                           theta_gtol=config.theta_gtol)
            e_occ = mueller_energy_tables(n, h_ii, eh, ex)
            # orbital optimization: iterate the F diagonalization with an
            # adaptive off-diagonal scaling that keeps the energy descending
            eps = tables.lagrange_matrix(coeff, n)
            f_diag = np.sort(np.linalg.eigvalsh(0.5 * (eps + eps.T)))
            scale = 1.0
            e_orb = e_occ
            f_max = np.inf
            for _ in range(config.max_piris):
                eps = tables.lagrange_matrix(coeff, n)
                asym = np.triu(eps.T - eps, 1)
                f_max = float(np.abs(asym).max()) if m > 1 else 0.0
                if f_max < config.lagrange_tol:
                    break
                fmat = asym * scale + (asym * scale).T
                fmat[np.diag_indices_from(fmat)] = f_diag
                _, rot = np.linalg.eigh(fmat)
                signs = np.sign(rot[np.argmax(np.abs(rot), axis=0), np.arange(m)])
                new_coeff = coeff @ (rot * signs)
                e_new = tables.energy(new_coeff, n)
                if e_new <= e_orb + 1e-13:
                    coeff = new_coeff
                    e_orb = e_new
                    scale = min(1.0, scale * 1.5)
                else:
                    scale *= 0.4
                    if scale < 1e-6:
                        break
            energy = e_orb
            history.append((energy, e_occ, f_max))
            if (f_max < config.lagrange_tol
                    and abs(energy - e_occ) < abs(energy) * config.energy_tol
                    and abs(energy - e_prev) < abs(energy) * config.energy_tol
                    and outer > 1):
                converged = True
                break
            e_prev = energy
        natural = basis_orbs @ coeff
    else:
        orbitals = basis_orbs.copy()
        n = initial_occupations(m, n_el)
        e_prev = np.inf
        energy = np.inf
        for outer in range(1, config.max_outer + 1):
            h_ii, eh, ex = _grid_tables(problem, orbitals)
            n, mu, _ = occupation_optimize(h_ii, eh, ex, n_el, n_start=n,
                                           mu_tol=config.mu_tol,
                                           theta_gtol=config.theta_gtol)
            e_occ = mueller_energy_tables(n, h_ii, eh, ex)
            orbitals, info = cg_minimize_orbitals(problem, n, orbitals, config,
                                                  sweeps=config.max_cg_sweeps)
            energy = info["history"][-1]
            f_max = info["max_residual"]
            history.append((energy, e_occ, f_max))
            if (abs(energy - e_occ) < abs(energy) * config.energy_tol
                    and abs(energy - e_prev) < abs(energy) * config.energy_tol
                    and info["max_residual"] < config.orbital_tol * 10):
                converged = True
                break
            e_prev = energy
        natural = orbitals

    n_sorted, nat_sorted = _sorted_by_occupation(np.asarray(n), natural)
    return RDMFTResult(
        energy=energy + problem.energy_shift,
        auxiliary_energy=energy,
        occupations=n_sorted,
        natural_orbitals=nat_sorted,
        mu=mu,
        converged=converged,
        outer_iterations=len(history),
        f_max=f_max,
        history=history,
    )


def _apply_pairs(problem, pair_columns: np.ndarray) -> np.ndarray:
    """Apply the interaction kernel to many pair densities (columns)."""
    apply_many = getattr(problem, "w_apply_pairs", None)
    if apply_many is not None:
        return apply_many(pair_columns)
    out = np.empty_like(pair_columns)
    for col in range(pair_columns.shape[1]):
        out[:, col] = problem.w_apply_pair(pair_columns[:, col])
    return out


def _grid_tables(problem, orbitals):
    """Integral tables straight from grid orbitals (CG path)."""
    w = problem.weight
    m = orbitals.shape[1]
    h_ii = w * np.einsum("zi,zi->i", orbitals, problem.h_apply(orbitals))
    pair = np.einsum("zi,zj->zij", orbitals, orbitals).reshape(orbitals.shape[0], m * m)
    applied = _apply_pairs(problem, pair)
    gram = (w * pair.T @ applied).reshape(m, m, m, m)
    eh = np.einsum("iijj->ij", gram)
    ex = np.einsum("ijji->ij", gram)
    return h_ii, 0.5 * (eh + eh.T), 0.5 * (ex + ex.T)
