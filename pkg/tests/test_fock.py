"""Fock-space foundation: operators, wavefunctions, projections."""

import numpy as np
import pytest

from cubist import (
    DimensionError,
    OverflowGuardError,
    PreconditionError,
    StateVector,
    fock_state,
    hermite_wavefunction,
    homodyne_pdf,
    ladder_ops,
    project_quadrature,
    quadrature_ops,
    tensor,
    vacuum,
)
from cubist.fock import quadrature_product

from conftest import random_state


class TestLadder:
    def test_lowering_single_photon(self):
        a, _ = ladder_ops(2)
        one = fock_state(1, 2)
        out = a.entries @ one.amplitudes.ravel()
        assert abs(out[0] - 1.0) < 1e-15

    def test_raising_matrix_element(self):
        _, ad = ladder_ops(5)
        assert abs(ad.entries[3, 2] - np.sqrt(3)) < 1e-15

    def test_truncated_commutator_diagonal(self):
        a, ad = ladder_ops(4)
        comm = a.entries @ ad.entries - ad.entries @ a.entries
        assert np.allclose(np.diag(comm), [1, 1, 1, -3], atol=1e-14)
        assert np.allclose(comm - np.diag(np.diag(comm)), 0.0, atol=1e-14)

    def test_dim_guard(self):
        with pytest.raises(DimensionError):
            ladder_ops(1)


class TestQuadratures:
    def test_vacuum_variance(self):
        x, _ = quadrature_ops(10)
        xsq = quadrature_product(10, "xx")
        assert abs(xsq.expectation(vacuum(10)).real - 0.5) < 1e-14

    def test_one_photon_variance(self):
        xsq = quadrature_product(10, "xx")
        assert abs(xsq.expectation(fock_state(1, 10)).real - 1.5) < 1e-14

    def test_vacuum_fourth_moment(self):
        # direct matrix product at padded dimension equals 3 * (1/2)^2
        x4 = quadrature_product(12, "xxxx")
        assert abs(x4.expectation(vacuum(12)).real - 0.75) < 1e-13

    def test_commutator_block(self):
        # [X, P] = i on the untruncated block, so i (PX - XP) is the identity
        dim = 14
        x, p = quadrature_ops(dim)
        comm = x.entries @ p.entries - p.entries @ x.entries
        block = comm[: dim - 2, : dim - 2]
        assert np.max(np.abs(block - 1j * np.eye(dim - 2))) < 1e-12

    def test_hermitian_tags(self):
        x, p = quadrature_ops(6)
        assert x.hermitian and p.hermitian


class TestHermiteWavefunction:
    def test_ground_state_at_origin(self):
        assert abs(hermite_wavefunction(0, 0.0) - np.pi ** -0.25) < 1e-14

    def test_odd_node(self):
        assert hermite_wavefunction(1, 0.0) == 0.0

    def test_second_level_at_origin(self):
        # H_2(0) = -2 in the physicists' convention, normalized
        expected = -np.pi ** -0.25 / np.sqrt(2.0)
        assert abs(hermite_wavefunction(2, 0.0) - expected) < 1e-14

    def test_against_scipy_hermites(self):
        from scipy.special import factorial, hermite

        xs = np.linspace(-3.5, 3.5, 11)
        for n in (0, 1, 3, 7, 12):
            ref = (
                np.pi ** -0.25
                / np.sqrt(2.0 ** n * factorial(n))
                * hermite(n)(xs)
                * np.exp(-xs ** 2 / 2)
            )
            got = hermite_wavefunction(n, xs)
            assert np.max(np.abs(got - ref)) < 1e-10

    def test_orthonormality(self):
        xs = np.arange(-12.0, 12.0 + 1e-9, 1e-3)
        table = np.array([hermite_wavefunction(n, xs) for n in range(21)])
        gram = np.trapezoid(table[:, None, :] * table[None, :, :], xs, axis=-1)
        assert np.max(np.abs(gram - np.eye(21))) < 1e-8

    def test_overflow_guard(self):
        with pytest.raises(OverflowGuardError):
            hermite_wavefunction(401, 0.0)


class TestTensor:
    def test_two_mode_placement(self):
        st = tensor([fock_state(0, 2), fock_state(1, 3)])
        assert st.mode_dims == (2, 3)
        assert abs(st.amplitudes[0, 1] - 1.0) < 1e-15
        assert np.sum(np.abs(st.amplitudes) ** 2) == pytest.approx(1.0)

    def test_norm_multiplicative(self, rng):
        a = StateVector((4,), random_state(rng, 4))
        b = StateVector((5,), random_state(rng, 5))
        assert tensor([a, b]).norm() == pytest.approx(a.norm() * b.norm(), abs=1e-12)

    def test_three_vacua(self):
        st = tensor([vacuum(8)] * 3)
        assert st.mode_dims == (8, 8, 8)
        assert abs(st.amplitudes[0, 0, 0] - 1.0) < 1e-15

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            tensor([])


class TestHomodynePdf:
    def test_vacuum_peak(self):
        pdf = homodyne_pdf(vacuum(6), 0, 0.0, np.array([0.0, 1.0]))
        assert abs(pdf[0] - 1.0 / np.sqrt(np.pi)) < 1e-12

    def test_single_photon_node(self):
        pdf = homodyne_pdf(fock_state(1, 6), 0, 1.234, np.array([0.0, 1.0]))
        assert pdf[0] < 1e-28

    @pytest.mark.parametrize("angle", [0.0, 0.7, np.pi / 2])
    def test_normalization(self, angle):
        grid = np.arange(-6.0, 6.0 + 1e-12, 0.01)
        pdf = homodyne_pdf(vacuum(8), 0, angle, grid)
        assert abs(np.trapezoid(pdf, grid) - 1.0) < 1e-6

    def test_requires_normalized(self):
        bad = StateVector((3,), np.array([0.5, 0.0, 0.0]), normalized=False)
        with pytest.raises(PreconditionError):
            homodyne_pdf(bad, 0, 0.0, np.array([0.0, 1.0]))

    def test_mode_out_of_range(self):
        with pytest.raises(IndexError):
            homodyne_pdf(vacuum(4), 1, 0.0, np.array([0.0, 1.0]))

    def test_reduced_density_path_matches_direct(self, rng):
        # both evaluation routes must agree on a state with a large idle sector
        st = StateVector((3, 40), random_state(rng, (3, 40)))
        grid = np.linspace(-4, 4, 30)
        small = homodyne_pdf(st, 0, 0.4, grid)
        big = homodyne_pdf(st, 1, 0.4, np.linspace(-9, 9, 300))
        direct = np.array(
            [
                project_quadrature(st, 1, 0.4, v)[1]
                for v in np.linspace(-9, 9, 300)
            ]
        )
        assert np.max(np.abs(big - direct)) < 1e-12
        assert small.shape == (30,)


class TestProjectQuadrature:
    def test_product_state_factorizes(self):
        st = tensor([vacuum(4), vacuum(4)])
        reduced, density = project_quadrature(st, 1, 0.0, 0.0)
        psi0 = hermite_wavefunction(0, 0.0)
        assert abs(density - 1.0 / np.sqrt(np.pi)) < 1e-13
        assert np.allclose(
            reduced.amplitudes.ravel()[0], psi0, atol=1e-13
        )
        assert not reduced.normalized

    def test_correlated_pair(self):
        amps = np.zeros((2, 2), dtype=complex)
        amps[0, 0] = amps[1, 1] = 1.0 / np.sqrt(2.0)
        st = StateVector((2, 2), amps)
        v = 0.37
        reduced, _ = project_quadrature(st, 1, 0.0, v)
        expected = np.array(
            [hermite_wavefunction(0, v), hermite_wavefunction(1, v)]
        ) / np.sqrt(2.0)
        assert np.allclose(reduced.amplitudes.ravel(), expected, atol=1e-13)

    def test_density_matches_pdf(self, rng):
        st = StateVector((3, 4, 5), random_state(rng, (3, 4, 5)))
        grid = np.linspace(-2.0, 2.0, 7)
        pdf = homodyne_pdf(st, 1, 0.9, grid)
        for v, expected in zip(grid, pdf):
            _, density = project_quadrature(st, 1, 0.9, v)
            assert abs(density - expected) < 1e-12

    def test_single_mode_degenerate_case(self):
        reduced, density = project_quadrature(vacuum(5), 0, 0.0, 0.0)
        assert reduced.mode_dims == (1,)
        assert abs(density - 1.0 / np.sqrt(np.pi)) < 1e-13


class TestStateVector:
    def test_serialization_round_trip(self, rng):
        st = StateVector((2, 3), random_state(rng, (2, 3)))
        back = StateVector.from_json(st.to_json())
        assert back.mode_dims == st.mode_dims
        assert np.array_equal(back.amplitudes, st.amplitudes)
        assert back.normalized == st.normalized

    def test_norm_flag_enforced(self):
        with pytest.raises(PreconditionError):
            StateVector((2,), np.array([0.5, 0.0]), normalized=True)

    def test_dim_floor(self):
        with pytest.raises(DimensionError):
            StateVector((1, 4), np.zeros((1, 4)), normalized=False)

    def test_immutability(self):
        st = vacuum(3)
        with pytest.raises(ValueError):
            st.amplitudes[0] = 0.0
