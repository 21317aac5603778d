import numpy as np
import pytest

from cavqed1d.model import CavityMode, LatticeModel
from cavqed1d.problems import LatticePolaritonProblem
from cavqed1d.polariton_hf import (
    PenaltyConfig,
    PenaltyState,
    augmented_lagrangian_outer,
    constraint_values,
    g_operator_apply,
    hf_energy_lattice,
    lattice_hartree_fock,
    line_minimize,
    pcg_inner,
    phf_gradient,
    _natural_orbitals,
    _penalty_weights,
)

RNG = np.random.default_rng(31)


def benchmark_problem(g_over_omega=0.4, omega=0.4, n_electrons=4, n_sites=6,
                      n_photon=5):
    mode = CavityMode.from_ratio(omega, g_over_omega) if g_over_omega > 0 \
        else CavityMode(omega, 0.0)
    model = LatticeModel.uniform(n_sites, 0.5, mode, n_photon=n_photon,
                                 n_electrons=n_electrons)
    return LatticePolaritonProblem(model)


def random_orthonormal(n, m, seed=0):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.normal(size=(n, m)))
    return q


class TestConstraints:
    def test_two_electron_singlet_trivially_feasible(self):
        prob = benchmark_problem(0.5, n_electrons=2)
        phi = random_orthonormal(prob.n_basis, 1, seed=2)
        psi = _natural_orbitals(prob, phi, 2)
        g = constraint_values(prob, phi, psi)
        assert g[0] == pytest.approx(0.0, abs=1e-10)
        assert np.all(g >= -1e-10)

    def test_noninteracting_aufbau(self):
        prob = benchmark_problem(0.0)
        _, phi = prob.ip_orbitals(2)
        psi = _natural_orbitals(prob, phi, 4)
        g = constraint_values(prob, phi, psi)
        assert np.allclose(np.sort(g)[:2], 0.0, atol=1e-10)
        assert np.allclose(np.sort(g)[2:], 2.0, atol=1e-10)

    def test_pauli_violating_trial_detected(self):
        prob = benchmark_problem(0.3)
        bm, bph = prob.shape
        _, cm = np.linalg.eigh(prob.model.matter_hamiltonian())
        chi0 = np.zeros(bph); chi0[0] = 1
        chi1 = np.zeros(bph); chi1[1] = 1
        phi = np.stack([np.kron(cm[:, 0], chi0), np.kron(cm[:, 0], chi1)], axis=1)
        psi = _natural_orbitals(prob, phi, 4)
        g = constraint_values(prob, phi, psi)
        assert g.min() == pytest.approx(-2.0, abs=1e-10)


class TestGOperator:
    def test_orthogonal_content_gives_zero(self):
        prob = benchmark_problem()
        bm, bph = prob.shape
        psi = np.zeros(bm); psi[0] = 1.0
        phi = np.zeros(bm * bph)
        phi.reshape(bm, bph)[1, :] = RNG.normal(size=bph)
        assert np.allclose(g_operator_apply(prob, psi, phi), 0.0)

    def test_hermitian(self):
        prob = benchmark_problem()
        psi = RNG.normal(size=prob.shape[0])
        psi /= np.linalg.norm(psi)
        for seed in range(10):
            a = random_orthonormal(prob.n_basis, 2, seed)[:, 0]
            b = random_orthonormal(prob.n_basis, 2, seed + 100)[:, 1]
            lhs = a @ g_operator_apply(prob, psi, b)
            rhs = b @ g_operator_apply(prob, psi, a)
            assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_finite_difference_gradient_of_occupation(self):
        """Acceptance 7b: dn_i/dphi matches 2 G_i phi (real-derivative factor)."""
        prob = benchmark_problem()
        worst = 0.0
        for seed in range(20):
            phi = random_orthonormal(prob.n_basis, 2, seed)
            psi = _natural_orbitals(prob, phi, 4)
            k = int(RNG.integers(0, 2))
            i = int(RNG.integers(0, 4))

            def n_of(p):
                trial = phi.copy()
                trial[:, k] = p
                bm, bph = prob.shape
                proj = psi[:, i] @ p.reshape(bm, bph)
                rest = 0.0
                for j in range(2):
                    if j == k:
                        continue
                    pj = psi[:, i] @ trial[:, j].reshape(bm, bph)
                    rest += 2 * float(pj @ pj)
                return rest + 2 * float(proj @ proj)

            direction = RNG.normal(size=prob.n_basis)
            direction /= np.linalg.norm(direction)
            h = 1e-6
            fd = (n_of(phi[:, k] + h * direction)
                  - n_of(phi[:, k] - h * direction)) / (2 * h)
            analytic = 2.0 * float(direction @ g_operator_apply(prob, psi[:, i],
                                                                phi[:, k]))
            worst = max(worst, abs(fd - analytic))
        assert worst < 1e-6


class TestGradient:
    def test_feasible_interior_reduces_to_hf_gradient(self):
        prob = benchmark_problem(0.2)
        phi = random_orthonormal(prob.n_basis, 2, seed=5)
        psi = _natural_orbitals(prob, phi, 4)
        gamma = 2 * phi @ phi.T
        h1 = 2 * prob.h + 2 * prob.coulomb_matrix(gamma) - prob.exchange_matrix(gamma)
        g = np.abs(constraint_values(prob, phi, psi))  # pretend all feasible
        state = PenaltyState(mu=10.0, nu=np.zeros(4), eps_g=0.1, eps_pcg=0.1)
        zeta, eps_k = phf_gradient(prob, h1, psi, state, g, phi[:, 0])
        plain = -(h1 @ phi[:, 0] - (phi[:, 0] @ (h1 @ phi[:, 0])) * phi[:, 0])
        assert np.allclose(zeta, plain, atol=1e-12)

    def test_full_lagrangian_gradient_finite_difference(self):
        """Acceptance 7 family: the penalized gradient matches FD of L."""
        prob = benchmark_problem(0.5)
        phi0 = random_orthonormal(prob.n_basis, 2, seed=8)
        psi = _natural_orbitals(prob, phi0, 4)
        state = PenaltyState(mu=7.0, nu=np.array([0.3, 0.1, 0.0, 0.0]),
                             eps_g=0.1, eps_pcg=0.1)
        gamma = 2 * phi0 @ phi0.T
        h1 = 2 * prob.h + 2 * prob.coulomb_matrix(gamma) - prob.exchange_matrix(gamma)

        def lagr(phi_k):
            # quadratic-form part frozen at h1, exact penalty at fixed NOs
            trial = phi0.copy()
            trial[:, 0] = phi_k
            e = sum(float(trial[:, j] @ (h1 @ trial[:, j])) for j in range(2))
            g = constraint_values(prob, trial, psi)
            gm = np.maximum(-g, 0.0)
            return e - float(state.nu @ g) + 0.5 * state.mu * float(gm @ gm)

        g = constraint_values(prob, phi0, psi)
        weights = _penalty_weights(state, g)
        hphi = h1 @ phi0[:, 0]
        for i, w in enumerate(weights):
            if w:
                hphi = hphi + w * g_operator_apply(prob, psi[:, i], phi0[:, 0])
        worst = 0.0
        h = 1e-6
        for seed in range(10):
            d = np.random.default_rng(seed).normal(size=prob.n_basis)
            d /= np.linalg.norm(d)
            fd = (lagr(phi0[:, 0] + h * d) - lagr(phi0[:, 0] - h * d)) / (2 * h)
            worst = max(worst, abs(fd - 2 * float(d @ hphi)))
        assert worst < 1e-5


class TestLineMinimize:
    def test_quadratic_oracle(self):
        """Penalty off: the sampled minimum must match the analytic angle of
        the quadratic form, which a dense scan of the model confirms."""
        prob = benchmark_problem(0.3)
        phi = random_orthonormal(prob.n_basis, 2, seed=11)
        psi = _natural_orbitals(prob, phi, 4)
        gamma = 2 * phi @ phi.T
        h1 = 2 * prob.h + 2 * prob.coulomb_matrix(gamma) - prob.exchange_matrix(gamma)
        xi = random_orthonormal(prob.n_basis, 3, seed=12)[:, 2]
        xi -= (phi[:, 0] @ xi) * phi[:, 0]
        xi /= np.linalg.norm(xi)
        state = PenaltyState(mu=5.0, nu=np.zeros(4), eps_g=0.1, eps_pcg=1e-6)
        cfg = PenaltyConfig()
        theta, e_best = line_minimize(prob, h1, phi, psi, state, 0, xi, cfg)
        from cavqed1d.polariton_hf import _LineModel
        model = _LineModel(prob, h1, phi, psi, state, 0, xi)
        dense = min(model(t) for t in np.linspace(0, np.pi / 2, 4001))
        assert e_best <= dense + 1e-9

    def test_monotone_and_zero_direction(self):
        prob = benchmark_problem(0.3)
        phi = random_orthonormal(prob.n_basis, 2, seed=13)
        psi = _natural_orbitals(prob, phi, 4)
        gamma = 2 * phi @ phi.T
        h1 = 2 * prob.h + 2 * prob.coulomb_matrix(gamma) - prob.exchange_matrix(gamma)
        xi = random_orthonormal(prob.n_basis, 3, seed=14)[:, 2]
        xi -= (phi[:, 0] @ xi) * phi[:, 0]
        xi /= np.linalg.norm(xi)
        state = PenaltyState(mu=20.0, nu=np.array([0.5, 0, 0, 0.0]),
                             eps_g=0.1, eps_pcg=1e-5)
        cfg = PenaltyConfig()
        theta, e_best = line_minimize(prob, h1, phi, psi, state, 0, xi, cfg)
        from cavqed1d.polariton_hf import _LineModel
        model = _LineModel(prob, h1, phi, psi, state, 0, xi)
        assert e_best <= model(0.0) + 1e-12


class TestPenaltyState:
    def test_update_branches(self):
        cfg = PenaltyConfig()
        state = PenaltyState.initial(cfg, 3)
        assert state.mu == 10.0 and np.all(state.nu == 0)
        # feasible-enough: multipliers move, mu grows slowly
        g = np.array([0.01, 0.5, 1.9])
        new = state.update(g, cfg)
        assert new.mu == pytest.approx(15.0)
        assert np.all(new.nu >= 0.0)
        assert new.eps_pcg == pytest.approx(state.eps_pcg / 15.0)
        # strongly infeasible: mu jumps, nu frozen
        g2 = np.array([-1.0, 0.5, 1.9])
        new2 = state.update(g2, cfg)
        assert new2.mu == pytest.approx(new.mu * cfg.beta_mu)
        assert np.array_equal(new2.nu, new.nu)

    def test_nu_never_negative(self):
        cfg = PenaltyConfig()
        state = PenaltyState.initial(cfg, 2)
        g = np.array([1.5, 0.0])  # strictly feasible: raw update would be < 0
        new = state.update(g, cfg)
        assert np.all(new.nu >= 0.0)


class TestSolvers:
    def test_two_electron_penalty_irrelevant(self):
        prob = benchmark_problem(0.4, n_electrons=2, n_sites=4, n_photon=4)
        fhf = lattice_hartree_fock(prob, tol=1e-9)
        phf = augmented_lagrangian_outer(prob)
        assert phf.energy == pytest.approx(fhf.energy, abs=1e-5)
        assert np.all(phf.nu == 0.0)

    def test_lambda_zero_equals_electronic_hf(self):
        prob = benchmark_problem(0.0)
        out = lattice_hartree_fock(prob, tol=1e-10)
        e = np.linalg.eigvalsh(prob.model.matter_hamiltonian())
        expected = 2 * (e[0] + e[1]) + 0.5 * 0.4
        assert out.energy == pytest.approx(expected, abs=1e-9)

    def test_orthonormality_maintained(self):
        prob = benchmark_problem(0.6)
        out = augmented_lagrangian_outer(prob)
        overlap = out.orbitals.T @ out.orbitals
        assert np.allclose(overlap, np.eye(2), atol=1e-10)

    def test_phf_feasible_and_complementary(self):
        prob = benchmark_problem(0.4)
        out = augmented_lagrangian_outer(prob)
        assert out.feasible
        assert np.all(out.electronic_occupations <= 2.0 + 0.05)
        slack = float(np.abs(out.nu * out.constraints).sum())
        assert slack < 10 * max((1 / out.mu) ** 0.9, 1e-4) + 0.05

    def test_phf_above_fermionic(self):
        prob = benchmark_problem(0.4)
        fhf = lattice_hartree_fock(prob, tol=1e-9)
        phf = augmented_lagrangian_outer(prob)
        assert phf.energy >= fhf.energy - 1e-8
