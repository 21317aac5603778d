import numpy as np
import pytest

from cavqed1d.model import (
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
    kinetic_matrix,
    lattice_one_body_matrix,
    lattice_two_body_pairs,
    lattice_two_body_tensor,
    photon_displacement_matrix,
    soft_interaction,
)

RNG = np.random.default_rng(42)


class TestSoftInteraction:
    def test_zero_separation_identity(self):
        assert soft_interaction(0.0, 0.0, 1.0) == 1.0

    def test_direct_evaluation(self):
        assert soft_interaction(3.0, 0.0, 1.0) == pytest.approx(1 / np.sqrt(10), abs=1e-12)

    def test_symmetry_random(self):
        x, xp = RNG.normal(size=(2, 1000))
        assert np.allclose(soft_interaction(x, xp, 0.7), soft_interaction(xp, x, 0.7))

    def test_bounded_by_inverse_softening(self):
        x, xp = RNG.normal(size=(2, 1000)) * 5
        w = soft_interaction(x, xp, 0.5)
        assert np.all(w > 0) and np.all(w <= 2.0 + 1e-15)

    def test_rejects_bad_softening(self):
        with pytest.raises(ValueError):
            soft_interaction(0, 0, 0.0)


class TestDressedKernels:
    def test_potential_zero_coupling_reduction(self):
        mode = CavityMode(0.7, 0.0)
        x, q = 1.3, -0.4
        v = dressed_potential(x, q, None, mode, 2)
        assert v == pytest.approx(0.5 * 0.7**2 * q**2, abs=1e-14)

    def test_potential_dipole_terms_vanish_at_origin(self):
        mode = CavityMode(1.0, 0.5)
        v = dressed_potential(0.0, 0.9, None, mode, 3)
        assert v == pytest.approx(0.5 * 0.9**2, abs=1e-14)

    def test_potential_direct_value(self):
        mode = CavityMode(1.0, 0.1)
        v = dressed_potential(1.0, 1.0, None, mode, 2)
        assert v == pytest.approx(0.5 - 0.1 / np.sqrt(2) + 0.005, abs=1e-12)

    def test_interaction_zero_coupling_is_bare(self):
        mode = CavityMode(1.0, 0.0)
        w = SoftInteraction(1.0)
        for x, q, xp, qp in RNG.normal(size=(50, 4)):
            assert dressed_interaction(x, q, xp, qp, mode, 2, w) == \
                pytest.approx(w(x, xp), abs=1e-14)

    def test_interaction_direct_value(self):
        mode = CavityMode(1.0, 0.1)
        w = SoftInteraction(1.0)
        val = dressed_interaction(1.0, 1.0, -1.0, 0.0, mode, 2, w)
        assert val == pytest.approx(1 / np.sqrt(5) + 0.1 / np.sqrt(2) - 0.01, abs=1e-12)

    def test_interaction_exchange_symmetry_many(self):
        mode = CavityMode(0.6, 0.3)
        w = SoftInteraction(1.2)
        pts = RNG.normal(size=(10**4, 4))
        a = dressed_interaction(pts[:, 0], pts[:, 1], pts[:, 2], pts[:, 3], mode, 4, w)
        b = dressed_interaction(pts[:, 2], pts[:, 3], pts[:, 0], pts[:, 1], mode, 4, w)
        assert np.allclose(a, b, atol=1e-13)

    def test_bookkeeping_constant(self):
        k = DressedKernels(None, None, (CavityMode(0.5535, 0.1),), 2)
        assert k.zero_point_shift == pytest.approx(0.27675)


class TestGrid:
    def test_points_symmetric(self):
        g = Grid1D.from_length(20, 0.1)
        x = g.points
        assert g.n_points == 201
        assert np.allclose(x + x[::-1], 0.0)

    def test_invalid(self):
        with pytest.raises(ValueError):
            Grid1D(2, 0.1)
        with pytest.raises(ValueError):
            Grid1D(10, -0.1)

    def test_hopping_spacing_relation(self):
        # nearest-neighbour hopping of the FD kinetic operator: t = 1/(2 dx^2)
        dx = 0.5
        t = kinetic_matrix(Grid1D(11, dx))
        # the 4th-order stencil has -1/2 * 4/3 / dx^2 on the first off-diagonal;
        # a second-order discretization corresponds to t = 1/(2 dx^2)
        assert -t[0, 1] * 3 / 4 == pytest.approx(1 / (2 * dx**2))


class TestPhotonMatrices:
    def test_vacuum_only(self):
        assert photon_displacement_matrix(1, 1.0) == pytest.approx(np.zeros((1, 1)))

    def test_offdiagonal_value(self):
        p = photon_displacement_matrix(2, 0.5)
        assert p[0, 1] == pytest.approx(1.0)

    def test_symmetric(self):
        for n in (1, 2, 5, 9):
            p = photon_displacement_matrix(n, 0.37)
            assert np.array_equal(p, p.T)


class TestLattice:
    def make(self, n_sites=6, coupling=0.1, omega=1.0, n_ph=3):
        return LatticeModel.uniform(n_sites, 0.5, CavityMode(omega, coupling),
                                    n_photon=n_ph, n_electrons=2)

    def test_decoupled_block_structure(self):
        model = self.make(coupling=0.0)
        h = lattice_one_body_matrix(model)
        hm = model.matter_hamiltonian()
        bph = model.n_photon
        for alpha in range(bph):
            block = h[alpha::bph, :][:, alpha::bph]
            assert np.allclose(block, hm + np.eye(6) * (alpha + 0.5) * 1.0)

    def test_two_site_eigenvalues(self):
        model = LatticeModel.uniform(2, 0.5, CavityMode(1.0, 0.0),
                                     n_photon=1, n_electrons=2)
        evals = np.linalg.eigvalsh(lattice_one_body_matrix(model))
        assert np.allclose(evals, [0.0, 1.0], atol=1e-14)

    def test_hermitian_randomized(self):
        for _ in range(20):
            sites = int(RNG.integers(2, 7))
            model = LatticeModel(
                sites, float(RNG.uniform(0.1, 2)),
                tuple(RNG.normal(size=sites)),
                CavityMode(float(RNG.uniform(0.1, 2)), float(RNG.uniform(0, 1))),
                int(RNG.integers(1, 5)), 2)
            h = lattice_one_body_matrix(model)
            assert np.allclose(h, h.T, atol=1e-13)

    def test_rejects_small_lattice(self):
        with pytest.raises(ValueError):
            LatticeModel.uniform(1, 0.5, CavityMode(1.0, 0.0))

    def test_two_body_zero_coupling(self):
        model = self.make(coupling=0.0)
        w = lattice_two_body_tensor(model)
        assert np.allclose(w, 0.0)

    def test_two_body_pair_exchange_symmetry(self):
        model = self.make(coupling=0.3, omega=0.7)
        w = lattice_two_body_tensor(model)
        assert np.allclose(w, w.transpose(1, 0, 3, 2), atol=1e-13)

    def test_dipole_self_entry(self):
        model = LatticeModel.uniform(2, 0.5, CavityMode(1.0, 0.1),
                                     n_photon=1, n_electrons=2)
        w = lattice_two_body_tensor(model)
        # lambda^2 x1 x2 with x = (-1/2, +1/2)
        assert w[0, 1, 0, 1] == pytest.approx(-0.0025, abs=1e-15)

    def test_site_coordinates_centered(self):
        model = self.make(5)
        assert np.allclose(model.site_coordinates, [-2, -1, 0, 1, 2])


class TestPotentials:
    def test_he_strictly_negative(self):
        v = he_model()
        x = np.linspace(-8, 8, 100)
        assert np.all(v(x) < 0)

    def test_h2_nuclear_repulsion(self):
        m = h2_model(1.6)
        assert m.nuclear_repulsion() == pytest.approx(1 / np.sqrt(1.6**2 + 1))

    def test_softening_validation(self):
        with pytest.raises(ValueError):
            SoftPotential(((1.0, 0.0),), softening=0.0)
