import numpy as np
import pytest

from cavqed1d.model import Grid1D, SoftInteraction, he_model
from cavqed1d.problems import ElectronicGridProblem
from cavqed1d.exact import exact_two_electron_energy
from cavqed1d.hf import SCFConfig, fock_apply, hf_energy, hf_scf

RNG = np.random.default_rng(7)


@pytest.fixture(scope="module")
def he_small():
    grid = Grid1D.from_length(10, 0.2)
    return ElectronicGridProblem(grid, he_model(), SoftInteraction(), 2)


@pytest.fixture(scope="module")
def he_converged(he_small):
    return hf_scf(he_small, SCFConfig(max_outer=250, orbital_tol=1e-10))


def random_orthonormal(problem, m, seed=0):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.normal(size=(problem.n_basis, m)))
    return q / np.sqrt(problem.weight)


class TestFockApply:
    def test_interaction_off_reduces_to_one_body(self):
        grid = Grid1D.from_length(10, 0.2)
        prob = ElectronicGridProblem(grid, he_model(), None, 2)
        orbs = random_orthonormal(prob, 1)
        phi = random_orthonormal(prob, 1, seed=3)[:, 0]
        assert np.allclose(fock_apply(prob, orbs, phi), prob.h_apply(phi))

    def test_hermitian_on_random_orbitals(self, he_small):
        orbs = random_orthonormal(he_small, 1, seed=1)
        a = random_orthonormal(he_small, 1, seed=2)[:, 0]
        b = random_orthonormal(he_small, 1, seed=3)[:, 0]
        w = he_small.weight
        lhs = w * float(a @ fock_apply(he_small, orbs, b))
        rhs = w * float(b @ fock_apply(he_small, orbs, a))
        assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_dimension_mismatch(self, he_small):
        orbs = random_orthonormal(he_small, 1)
        with pytest.raises(ValueError):
            fock_apply(he_small, orbs, np.zeros(3))


class TestHFEnergy:
    def test_two_electron_expansion(self, he_small):
        # N=2 single orbital: E = 2<h> + (11|11), exchange halves the direct term
        orbs = random_orthonormal(he_small, 1, seed=5)
        phi = orbs[:, 0]
        w = he_small.weight
        one = 2 * w * float(phi @ he_small.h_apply(phi))
        coul = w * float((phi * phi) @ he_small.w_apply_pair(phi * phi))
        assert hf_energy(he_small, orbs) == pytest.approx(one + coul, abs=1e-11)

    def test_invariant_under_occupied_rotation(self):
        grid = Grid1D.from_length(8, 0.25)
        prob = ElectronicGridProblem(grid, he_model(), SoftInteraction(), 4)
        orbs = random_orthonormal(prob, 2, seed=9)
        theta = 0.37
        rot = np.array([[np.cos(theta), -np.sin(theta)],
                        [np.sin(theta), np.cos(theta)]])
        assert hf_energy(prob, orbs @ rot) == pytest.approx(
            hf_energy(prob, orbs), abs=1e-10)


class TestSCF:
    def test_noninteracting_converges_to_ip(self):
        grid = Grid1D.from_length(10, 0.2)
        prob = ElectronicGridProblem(grid, he_model(), None, 2)
        out = hf_scf(prob, SCFConfig(max_outer=30))
        e_ip, _ = prob.ip_orbitals(1)
        assert out.energy == pytest.approx(2 * e_ip[0], abs=1e-10)

    def test_variational_vs_exact(self, he_small, he_converged):
        e_exact = exact_two_electron_energy(he_small.grid, he_model(),
                                            SoftInteraction())
        assert he_converged.energy >= e_exact

    def test_energy_monotone_history(self, he_converged):
        h = np.array(he_converged.history)
        assert np.all(np.diff(h) <= 1e-10)

    def test_gamma_idempotent(self, he_small, he_converged):
        w = he_small.weight
        gamma = he_converged.gamma()
        # kernel composition carries the grid weight: gamma o gamma = 2 gamma
        g2 = gamma @ gamma * w
        assert np.allclose(g2, 2 * gamma, atol=1e-8)
        evals = np.linalg.eigvalsh(gamma * w)
        big = evals[np.abs(evals) > 1e-8]
        assert np.allclose(big, 2.0, atol=1e-8)

    def test_orbitals_orthonormal(self, he_small, he_converged):
        orbs = he_converged.orbitals
        overlap = he_small.weight * orbs.T @ orbs
        assert np.allclose(overlap, np.eye(orbs.shape[1]), atol=1e-10)

    def test_residual_small(self, he_small, he_converged):
        phi = he_converged.orbitals[:, 0]
        fphi = fock_apply(he_small, he_converged.orbitals, phi)
        eps = he_small.weight * float(phi @ fphi)
        res = he_small.weight * float(np.sum((fphi - eps * phi) ** 2))
        assert res < 1e-8
