"""Polaritonic HF with the polariton ansatz on lattice problems.

The hybrid Fermi-Bose statistics of the auxiliary polaritons is enforced
through the electronic-Pauli inequality constraints g_i = 2 - n_i^e >= 0,
where the n_i^e are the largest eigenvalues of the electronic 1RDM.  An
augmented-Lagrangian outer loop (penalty parameter mu, multipliers nu_i >= 0)
wraps a penalty-corrected conjugate-gradient inner SCF with three nested
loops: dressed-orbital relaxation (DO), natural-orbital refresh (NO) and
Fock-operator update (PCG).  Running with the penalty disabled yields the
plain fermion-ansatz dressed HF.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .problems import LatticePolaritonProblem

__all__ = [
    "PenaltyConfig",
    "PenaltyState",
    "PHFResult",
    "constraint_values",
    "g_operator_apply",
    "phf_gradient",
    "line_minimize",
    "pcg_inner",
    "augmented_lagrangian_outer",
    "lattice_hartree_fock",
]

MU_CAP = 1e10


@dataclass(frozen=True)
class PenaltyConfig:
    """Parameters of the augmented-Lagrangian outer loop."""

    total_tol: float = 1e-4       # split half/half between residue and dL
    mu0: float = 10.0
    alpha_mu: float = 1.5         # growth when feasibility is acceptable
    beta_mu: float = 20.0         # growth when the violation is too large
    n_lm: int = 10                # line-minimization samples per level
    alpha_lm: float = 0.5         # line-minimization interval shrink factor
    max_outer: int = 60
    max_pcg: int = 200
    max_no: int = 100
    max_do: int = 60
    n_constraints: int | None = None   # default min(N, B_m)
    protect_lowest: bool = False  # skip the penalty for the lowest orbital


@dataclass
class PenaltyState:
    """Augmented-Lagrangian parameters carried across outer iterations."""

    mu: float
    nu: np.ndarray
    eps_g: float
    eps_pcg: float
    iteration: int = 0

    @classmethod
    def initial(cls, config: PenaltyConfig, n_constraints: int) -> "PenaltyState":
        mu = config.mu0
        return cls(mu=mu, nu=np.zeros(n_constraints),
                   eps_g=(1.0 / mu) ** 0.1, eps_pcg=1.0 / mu)

    def update(self, g: np.ndarray, config: PenaltyConfig) -> "PenaltyState":
        """Two-branch LANCELOT-style update keyed on the worst violation."""
        violation = float(np.max(np.maximum(-g, 0.0))) if g.size else 0.0
        if violation <= self.eps_g:
            nu = np.maximum(self.nu - self.mu * g, 0.0)
            mu = self.mu * config.alpha_mu
            eps_g = (1.0 / mu) ** 0.9
        else:
            nu = self.nu
            mu = self.mu * config.beta_mu
            eps_g = (1.0 / mu) ** 0.1
        return PenaltyState(mu=mu, nu=nu, eps_g=eps_g,
                            eps_pcg=self.eps_pcg / mu,
                            iteration=self.iteration + 1)


@dataclass
class PHFResult:
    energy: float                  # physical total energy
    auxiliary_energy: float
    orbitals: np.ndarray           # (B, N/2)
    natural_orbitals: np.ndarray   # electronic, (B_m, M)
    electronic_occupations: np.ndarray
    constraints: np.ndarray        # g_i at the solution
    nu: np.ndarray
    mu: float
    residue: float
    feasible: bool
    converged: bool
    outer_iterations: int
    photon_number: float
    history: list = field(default_factory=list)

    def gamma(self) -> np.ndarray:
        return 2.0 * self.orbitals @ self.orbitals.T


def _gamma_e(problem: LatticePolaritonProblem, phi: np.ndarray) -> np.ndarray:
    return problem.electronic_1rdm(2.0 * phi @ phi.T)


def constraint_values(problem, phi: np.ndarray, psi_e: np.ndarray) -> np.ndarray:
    """g_i = 2 - <psi_i^e | gamma_e[phi] | psi_i^e> for the tracked columns."""
    ge = _gamma_e(problem, phi)
    return 2.0 - np.einsum("im,ij,jm->m", psi_e, ge, psi_e)


def g_operator_apply(problem, psi_i: np.ndarray, phi_k: np.ndarray) -> np.ndarray:
    """Apply G_i = 2 (psi_i psi_i^T) (x) 1_ph: the gradient of n_i wrt phi_k*.

    Projects the electronic content of phi_k at every photon index onto the
    natural orbital psi_i; Hermitian and positive semidefinite.
    """
    bm, bph = problem.shape
    f = phi_k.reshape(bm, bph)
    return (2.0 * np.outer(psi_i, psi_i @ f)).reshape(-1)


def _penalty_weights(state: PenaltyState, g: np.ndarray) -> np.ndarray:
    """nu_i + mu [g_i]^- ; the estimate of the KKT multipliers."""
    return state.nu + state.mu * np.maximum(-g, 0.0)


def _apply_h_pen(problem, h1: np.ndarray, psi_e: np.ndarray,
                 weights: np.ndarray, phi: np.ndarray) -> np.ndarray:
    out = h1 @ phi
    for i, w in enumerate(weights):
        if w != 0.0:
            out += w * g_operator_apply(problem, psi_e[:, i], phi)
    return out


def phf_gradient(problem, h1, psi_e, state: PenaltyState, g, phi_k,
                 weights=None):
    """Steepest-descent vector -(H^1 + sum_i w_i G_i - eps_k) phi_k.

    The multiplier eps_k is estimated by projecting the penalized eigenvalue
    problem onto phi_k; the weights w_i = nu_i + mu [g_i]^- carry the
    augmented-Lagrangian correction (one-sided convention at g_i = 0: the
    penalized branch).
    """
    if weights is None:
        weights = _penalty_weights(state, g)
    hphi = _apply_h_pen(problem, h1, psi_e, weights, phi_k)
    eps_k = float(phi_k @ hphi)
    return -(hphi - eps_k * phi_k), eps_k


def _occupations_fixed_nos(problem, phi: np.ndarray, psi_e: np.ndarray,
                           replace: int | None = None,
                           phi_trial: np.ndarray | None = None) -> np.ndarray:
    """n_i = <psi_i | gamma_e | psi_i> without diagonalizing gamma_e."""
    bm, bph = problem.shape
    n = np.zeros(psi_e.shape[1])
    for k in range(phi.shape[1]):
        col = phi_trial if (replace is not None and k == replace) else phi[:, k]
        f = col.reshape(bm, bph)
        proj = psi_e.T @ f          # (M, bph)
        n += 2.0 * np.einsum("ma,ma->m", proj, proj)
    return n


class _LineModel:
    """Penalized surrogate along phi_k(Theta) = cos(Theta) phi_k + sin(Theta) xi.

    With the Fock-like operator frozen, the orbital part is an exact
    two-term Fourier series; the penalty needs only the projections of
    phi_k and xi onto the tracked natural orbitals, so one sample costs
    O(M * B_ph).  Evaluated without diagonalizing gamma_e.
    """

    def __init__(self, problem, h1, phi, psi_e, state, k, xi):
        bm, bph = problem.shape
        self.state = state
        col = phi[:, k]
        self.e_ff = float(col @ (h1 @ col))
        self.e_fx = float(xi @ (h1 @ col))
        self.e_xx = float(xi @ (h1 @ xi))
        self.a = psi_e.T @ col.reshape(bm, bph)   # (M, bph)
        self.b = psi_e.T @ xi.reshape(bm, bph)
        n_all = _occupations_fixed_nos(problem, phi, psi_e)
        self.n_rest = n_all - 2.0 * np.einsum("ma,ma->m", self.a, self.a)

    def __call__(self, theta: float) -> float:
        c, s = np.cos(theta), np.sin(theta)
        e = c * c * self.e_ff + 2.0 * c * s * self.e_fx + s * s * self.e_xx
        proj = c * self.a + s * self.b
        n = self.n_rest + 2.0 * np.einsum("ma,ma->m", proj, proj)
        g = 2.0 - n
        gm = np.maximum(-g, 0.0)
        return e - float(self.state.nu @ g) + 0.5 * self.state.mu * float(gm @ gm)


def line_minimize(problem, h1, phi, psi_e, state: PenaltyState, k: int,
                  xi: np.ndarray, config: PenaltyConfig,
                  eps_lm: float | None = None):
    """Divide-and-conquer search of Theta in [0, pi/2].

    Samples the penalized surrogate on n_lm points per level, re-centers the
    interval on the best sample, shrinks it by alpha_lm, and stops when the
    half-width falls below eps_lm = 0.1 * eps_pcg.
    """
    if eps_lm is None:
        eps_lm = max(0.1 * state.eps_pcg, 1e-13)
    model = _LineModel(problem, h1, phi, psi_e, state, k, xi)
    if state.mu == 0.0 and not np.any(state.nu):
        # no penalty: the surrogate is an exact two-term Fourier series
        b1 = model.e_fx
        a1 = 0.5 * (model.e_ff - model.e_xx)
        theta = 0.5 * np.arctan2(-2.0 * b1, -2.0 * a1)
        if theta < 0.0:
            theta += np.pi
        return theta, model(theta)
    lo, hi = 0.0, 0.5 * np.pi
    theta_best, e_best = 0.0, np.inf
    for _ in range(200):
        for th in np.linspace(lo, hi, config.n_lm + 1):
            e = model(th)
            if e < e_best:
                e_best, theta_best = e, th
        half = config.alpha_lm * 0.5 * (hi - lo)
        lo = max(theta_best - half, 0.0)
        hi = min(theta_best + half, 0.5 * np.pi)
        if half < eps_lm:
            break
    return theta_best, e_best


def pcg_inner(problem, phi, state: PenaltyState, config: PenaltyConfig,
              n_constraints: int, use_penalty: bool = True):
    """Penalty-corrected conjugate-gradient SCF for fixed (mu, nu).

    Nested loops with the tolerance cascade eps_DO = 1e-2 eps_PCG,
    eps_NO = 1e-1 eps_PCG, eps_SCF = eps_PCG; the Fock-like operator is
    refreshed only in the outermost (PCG) loop, the natural orbitals in the
    NO loop, and single orbitals in the DO loop.
    """
    eps_scf = state.eps_pcg
    eps_no = 0.1 * eps_scf
    eps_do = 0.01 * eps_scf
    nhalf = phi.shape[1]
    gamma = 2.0 * phi @ phi.T
    psi_e = _natural_orbitals(problem, phi, n_constraints)
    diagnostics = {"pcg_iterations": 0, "converged": False}
    best_l = np.inf
    best_iter = None
    # without the penalty the natural orbitals never enter the minimization
    max_no = config.max_no if use_penalty else 1
    for m3 in range(config.max_pcg):
        h1 = 2.0 * problem.h + 2.0 * problem.coulomb_matrix(gamma) \
            - problem.exchange_matrix(gamma)
        ge_prev = _gamma_e(problem, phi)
        for m2 in range(max_no):
            for k in range(nhalf):
                # Gram-Schmidt against previously optimized states
                for i in range(k):
                    phi[:, k] -= (phi[:, i] @ phi[:, k]) * phi[:, i]
                phi[:, k] /= np.linalg.norm(phi[:, k])
                xi_prev = None
                zeta_prev = None
                for m1 in range(config.max_do):
                    g = constraint_values(problem, phi, psi_e)
                    weights = _penalty_weights(state, g) if use_penalty \
                        else np.zeros_like(g)
                    if use_penalty and config.protect_lowest and k == 0:
                        weights = np.zeros_like(g)
                    zeta, eps_k = phf_gradient(problem, h1, psi_e, state, g,
                                               phi[:, k], weights)
                    eta = zeta - (phi[:, k] @ zeta) * phi[:, k]
                    for i in range(k):
                        eta -= (phi[:, i] @ zeta) * phi[:, i]
                    zsq = float(eta @ zeta)
                    xi = eta
                    if (xi_prev is not None and zeta_prev and zeta_prev > 0
                            and m1 % 10 != 0):
                        gamma_fr = zsq / zeta_prev
                        if gamma_fr < 10.0:
                            cand = eta + gamma_fr * xi_prev
                            if float(cand @ zeta) > 0.0:
                                xi = cand     # keep conjugation only while it descends
                    zeta_prev = zsq
                    xi = xi - (phi[:, k] @ xi) * phi[:, k]
                    norm = np.linalg.norm(xi)
                    if norm < 1e-15:
                        break
                    xi /= norm
                    xi_prev = xi
                    theta, _ = line_minimize(problem, h1, phi, psi_e, state, k,
                                             xi, config)
                    new = np.cos(theta) * phi[:, k] + np.sin(theta) * xi
                    change = np.linalg.norm(new - phi[:, k])
                    phi[:, k] = new
                    # a step at the sampler's resolution floor cannot shrink
                    # further: treat it as converged
                    if change < eps_do or theta <= max(0.1 * state.eps_pcg, 1e-13):
                        break
            ge = _gamma_e(problem, phi)
            psi_e = _natural_orbitals(problem, phi, n_constraints)
            dge = np.linalg.norm(ge - ge_prev)
            ge_prev = ge
            if dge < eps_no:
                break
        gamma_new = 2.0 * phi @ phi.T
        dg = np.linalg.norm(gamma_new - gamma)
        gamma = gamma_new
        diagnostics["pcg_iterations"] = m3 + 1
        # the frozen-operator inner minimization is not monotone in the true
        # Lagrangian across operator refreshes; keep the best iterate
        l_cur = _lagrangian(problem, phi, psi_e, state) if use_penalty \
            else hf_energy_lattice(problem, phi)
        if l_cur < best_l:
            best_l = l_cur
            best_iter = (phi.copy(), psi_e.copy(), gamma.copy())
        if dg < eps_scf:
            diagnostics["converged"] = True
            break
    if best_iter is not None:
        l_final = _lagrangian(problem, phi, psi_e, state) if use_penalty \
            else hf_energy_lattice(problem, phi)
        if l_final > best_l:
            phi, psi_e, gamma = best_iter
    return phi, psi_e, gamma, diagnostics


def _natural_orbitals(problem, phi: np.ndarray, n_constraints: int) -> np.ndarray:
    """Eigenvectors of gamma_e for the n_constraints largest occupations."""
    ge = _gamma_e(problem, phi)
    vals, vecs = np.linalg.eigh(ge)
    order = np.argsort(vals)[::-1][:n_constraints]
    vecs = vecs[:, order]
    signs = np.sign(vecs[np.argmax(np.abs(vecs), axis=0), np.arange(vecs.shape[1])])
    return vecs * signs


def hf_energy_lattice(problem, phi: np.ndarray) -> float:
    """Auxiliary HF energy tr(hD) + 1/2 tr(D J[D]) - 1/4 tr(D K[D])."""
    d = 2.0 * phi @ phi.T
    e = float(np.einsum("ab,ba->", problem.h, d))
    e += 0.5 * float(np.einsum("ab,ba->", problem.coulomb_matrix(d), d))
    e -= 0.25 * float(np.einsum("ab,ba->", problem.exchange_matrix(d), d))
    return e


def _lagrangian(problem, phi, psi_e, state: PenaltyState) -> float:
    g = constraint_values(problem, phi, psi_e)
    gm = np.maximum(-g, 0.0)
    return (hf_energy_lattice(problem, phi) - float(state.nu @ g)
            + 0.5 * state.mu * float(gm @ gm))


def _residue_sum(problem, phi, psi_e, state: PenaltyState,
                 use_penalty: bool = True) -> float:
    gamma = 2.0 * phi @ phi.T
    h1 = 2.0 * problem.h + 2.0 * problem.coulomb_matrix(gamma) \
        - problem.exchange_matrix(gamma)
    g = constraint_values(problem, phi, psi_e)
    weights = _penalty_weights(state, g) if use_penalty else np.zeros_like(g)
    r = 0.0
    for k in range(phi.shape[1]):
        zeta, _ = phf_gradient(problem, h1, psi_e, state, g, phi[:, k], weights)
        r += np.linalg.norm(zeta)
    return r


def augmented_lagrangian_outer(problem: LatticePolaritonProblem,
                               config: PenaltyConfig = PenaltyConfig(),
                               initial=None) -> PHFResult:
    """Polariton-ansatz HF: outer penalty loop around the PCG inner SCF.

    Terminates when both the residue sum and the Lagrangian change fall
    below total_tol/2; if mu exceeds its cap without feasibility the best
    feasible iterate seen is returned with ``converged`` False.
    """
    n_el = problem.n_electrons
    nhalf = n_el // 2
    bm = problem.shape[0]
    m_con = config.n_constraints or min(n_el, bm)
    if initial is None:
        _, phi = problem.ip_orbitals(nhalf)
    else:
        phi = initial.copy()
    state = PenaltyState.initial(config, m_con)
    psi_e = _natural_orbitals(problem, phi, m_con)
    l_prev = _lagrangian(problem, phi, psi_e, state)
    history = []
    best = None
    converged = False
    for outer in range(1, config.max_outer + 1):
        phi, psi_e, gamma, diag = pcg_inner(problem, phi, state, config, m_con)
        g = constraint_values(problem, phi, psi_e)
        l_cur = _lagrangian(problem, phi, psi_e, state)
        resid = _residue_sum(problem, phi, psi_e, state)
        dl = abs(l_cur - l_prev)
        l_prev = l_cur
        e_aux = hf_energy_lattice(problem, phi)
        feasible = bool(np.all(g >= -state.eps_g))
        history.append({"outer": outer, "mu": state.mu, "energy": e_aux,
                        "residue": resid, "dL": dl, "g_min": float(g.min()),
                        "eps_g": state.eps_g})
        if feasible and (best is None or e_aux < best[0]):
            best = (e_aux, phi.copy(), psi_e.copy(), g.copy(), state)
        if resid < 0.5 * config.total_tol and dl < 0.5 * config.total_tol:
            converged = True
            break
        state = state.update(g, config)
        if state.mu > MU_CAP:
            break
    if not converged and best is not None:
        e_aux, phi, psi_e, g, state = best
    else:
        e_aux = hf_energy_lattice(problem, phi)
    ge = _gamma_e(problem, phi)
    occ = np.sort(np.linalg.eigvalsh(ge))[::-1]
    gamma = 2.0 * phi @ phi.T
    e_ph_aux = problem.photon_mode_energy(gamma)
    omega = problem.model.mode.omega
    n_ph = e_ph_aux / omega - n_el / 2.0
    return PHFResult(
        energy=e_aux + problem.energy_shift,
        auxiliary_energy=e_aux,
        orbitals=phi,
        natural_orbitals=psi_e,
        electronic_occupations=occ,
        constraints=g,
        nu=state.nu,
        mu=state.mu,
        residue=_residue_sum(problem, phi, psi_e, state),
        feasible=bool(np.all(g >= -state.eps_g)),
        converged=converged,
        outer_iterations=len(history),
        photon_number=float(n_ph),
        history=history,
    )


def _packed_guess(problem: LatticePolaritonProblem, nhalf: int) -> np.ndarray:
    """All polaritons share the electronic ground orbital, stacked in photon
    number: the Pauli-violating well the fermion ansatz can fall into."""
    bm, bph = problem.shape
    _, cm = np.linalg.eigh(problem.model.matter_hamiltonian())
    phi = np.zeros((bm * bph, nhalf))
    for k in range(min(nhalf, bph)):
        chi = np.zeros(bph)
        chi[k] = 1.0
        phi[:, k] = np.kron(cm[:, 0], chi)
    return phi


def lattice_hartree_fock(problem: LatticePolaritonProblem,
                         config: PenaltyConfig = PenaltyConfig(),
                         tol: float = 1e-10, initial=None) -> PHFResult:
    """Fermion-ansatz dressed HF: the same inner SCF with the penalty off.

    Without constraints the energy landscape can hold a Pauli-violating
    minimum besides the aufbau-like one, so by default both deterministic
    starting points are relaxed and the lower solution returned.
    """
    n_el = problem.n_electrons
    nhalf = n_el // 2
    m_con = config.n_constraints or min(n_el, problem.shape[0])
    if initial is None:
        _, ip = problem.ip_orbitals(nhalf)
        guesses = [ip, _packed_guess(problem, nhalf)]
    else:
        guesses = [initial.copy()]
    best = None
    for guess in guesses:
        state = PenaltyState(mu=0.0, nu=np.zeros(m_con), eps_g=np.inf,
                             eps_pcg=tol)
        phi, psi_e, gamma, diag = pcg_inner(problem, guess.copy(), state,
                                            config, m_con, use_penalty=False)
        e_aux = hf_energy_lattice(problem, phi)
        if best is None or e_aux < best[0]:
            best = (e_aux, phi, psi_e, gamma, diag, state)
    e_aux, phi, psi_e, gamma, diag, state = best
    g = constraint_values(problem, phi, psi_e)
    ge = _gamma_e(problem, phi)
    occ = np.sort(np.linalg.eigvalsh(ge))[::-1]
    e_ph_aux = problem.photon_mode_energy(gamma)
    omega = problem.model.mode.omega
    return PHFResult(
        energy=e_aux + problem.energy_shift,
        auxiliary_energy=e_aux,
        orbitals=phi,
        natural_orbitals=psi_e,
        electronic_occupations=occ,
        constraints=g,
        nu=state.nu,
        mu=0.0,
        residue=_residue_sum(problem, phi, psi_e, state, use_penalty=False),
        feasible=bool(np.all(g >= -1e-9)),
        converged=diag["converged"],
        outer_iterations=diag["pcg_iterations"],
        photon_number=float(e_ph_aux / omega - n_el / 2.0),
    )
