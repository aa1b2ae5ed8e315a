"""Gaussian unitaries: conventions, unitarity, symplectic consistency."""

import numpy as np
import pytest

from cubist import (
    StateVector,
    TruncationRiskWarning,
    beam_splitter_op,
    displacement_op,
    fock_state,
    phase_shift_op,
    quadrature_ops,
    squeeze_op,
    symplectic_of_circuit,
    tensor,
    vacuum,
)
from cubist.fock import quadrature_product
from cubist.gaussian import _symplectic_form


def _mean_xp(state_vec, dim):
    x, p = quadrature_ops(dim)
    return (
        float(np.real(np.vdot(state_vec, x.entries @ state_vec))),
        float(np.real(np.vdot(state_vec, p.entries @ state_vec))),
    )


class TestDisplacement:
    def test_zero_is_identity(self):
        d = displacement_op(0.0, 8)
        assert np.max(np.abs(d.entries - np.eye(8))) < 1e-14

    def test_coherent_first_moment(self):
        d = displacement_op(0.5, 30)
        vec = d.entries[:, 0]
        xm, pm = _mean_xp(vec, 30)
        assert abs(xm - np.sqrt(2) * 0.5) < 1e-8
        assert abs(pm) < 1e-8

    def test_inverse(self):
        alpha = 0.3 + 0.2j
        d1 = displacement_op(alpha, 30)
        d2 = displacement_op(-alpha, 30)
        assert np.max(np.abs(d1.entries @ d2.entries - np.eye(30))) < 1e-10

    def test_truncation_risk_warning(self):
        with pytest.warns(TruncationRiskWarning):
            displacement_op(3.0, 8)


class TestSqueeze:
    def test_unit_scale_is_identity(self):
        s = squeeze_op(1.0, 12)
        assert np.max(np.abs(s.entries - np.eye(12))) < 1e-14

    def test_ten_db_variance(self):
        s = squeeze_op(10 ** (-10 / 20), 60)
        vec = s.entries[:, 0]
        xsq = quadrature_product(60, "xx").entries
        var = float(np.real(np.vdot(vec, xsq @ vec)))
        assert abs(var - 0.05) < 1e-4

    def test_inverse(self):
        s1 = squeeze_op(1.3, 40)
        s2 = squeeze_op(1 / 1.3, 40)
        assert np.max(np.abs(s1.entries @ s2.entries - np.eye(40))) < 1e-8

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            squeeze_op(0.0, 8)


class TestPhaseShift:
    def test_zero_identity(self):
        r = phase_shift_op(0.0, 9)
        assert np.max(np.abs(r.entries - np.eye(9))) < 1e-15

    def test_two_pi_identity(self):
        r = phase_shift_op(2 * np.pi, 9)
        assert np.max(np.abs(r.entries - np.eye(9))) < 1e-12

    def test_quarter_turn_swaps_quadratures(self):
        dim = 30
        coherent = displacement_op(0.4 + 0.1j, dim).entries[:, 0]
        xm, pm = _mean_xp(coherent, dim)
        rotated = phase_shift_op(np.pi / 2, dim).entries @ coherent
        xm2, pm2 = _mean_xp(rotated, dim)
        assert abs(xm2 - pm) < 1e-10
        assert abs(pm2 + xm) < 1e-10


class TestBeamSplitter:
    def test_single_photon_balanced_split(self):
        u = beam_splitter_op(0.5, 3, 3)
        st = tensor([fock_state(1, 3), fock_state(0, 3)])
        out = u.entries @ st.amplitudes.ravel()
        out = out.reshape(3, 3)
        assert abs(out[1, 0] - 1 / np.sqrt(2)) < 1e-12
        assert abs(out[0, 1] - 1 / np.sqrt(2)) < 1e-12

    def test_photon_number_conserved(self, rng):
        da, db = 5, 6
        psi = rng.normal(size=da * db) + 1j * rng.normal(size=da * db)
        psi /= np.linalg.norm(psi)
        n_a = np.diag(np.arange(da)).astype(complex)
        n_b = np.diag(np.arange(db)).astype(complex)
        n_tot = np.kron(n_a, np.eye(db)) + np.kron(np.eye(da), n_b)
        u = beam_splitter_op(0.37, da, db).entries
        before = np.vdot(psi, n_tot @ psi)
        after = np.vdot(u @ psi, n_tot @ (u @ psi))
        assert abs(before - after) < 1e-10

    def test_unitarity_via_inverse_product(self):
        u = beam_splitter_op(0.5, 4, 4)
        prod = u.entries.conj().T @ u.entries
        assert np.max(np.abs(prod - np.eye(16))) < 1e-10

    def test_heisenberg_action_on_coherent_means(self):
        dim = 22
        t = 0.7
        alpha, beta = 0.4, -0.3 + 0.5j
        st = tensor(
            [
                StateVector((dim,), displacement_op(alpha, dim).entries[:, 0]),
                StateVector((dim,), displacement_op(beta, dim).entries[:, 0]),
            ]
        )
        u = beam_splitter_op(t, dim, dim)
        out = (u.entries @ st.amplitudes.ravel()).reshape(dim, dim)
        x, p = quadrature_ops(dim)
        rho_a = out @ out.conj().T
        rho_b = out.T @ out.conj()
        xa = float(np.real(np.trace(x.entries @ rho_a)))
        xb = float(np.real(np.trace(x.entries @ rho_b)))
        expect_xa = np.sqrt(t) * np.sqrt(2) * alpha.real - np.sqrt(1 - t) * np.sqrt(2) * beta.real
        expect_xb = np.sqrt(1 - t) * np.sqrt(2) * alpha.real + np.sqrt(t) * np.sqrt(2) * beta.real
        assert abs(xa - expect_xa) < 1e-8
        assert abs(xb - expect_xb) < 1e-8

    def test_rejects_bad_transmittance(self):
        with pytest.raises(ValueError):
            beam_splitter_op(1.0, 4, 4)


class TestCircuitSymplectic:
    def test_balanced_row_mode0(self):
        s = symplectic_of_circuit(0.5, 0.5)
        row = s.matrix[0]
        expected = np.array([1 / np.sqrt(2), 0, -1 / np.sqrt(2), 0, 0, 0])
        assert np.max(np.abs(row - expected)) < 1e-14

    def test_balanced_row_mode2(self):
        s = symplectic_of_circuit(0.5, 0.5)
        row = s.matrix[4]
        expected = np.array([0.5, 0, 0.5, 0, 1 / np.sqrt(2), 0])
        assert np.max(np.abs(row - expected)) < 1e-14

    @pytest.mark.parametrize("t1,t2", [(0.2, 0.9), (0.61, 0.33), (0.5, 0.5)])
    def test_symplectic_condition(self, t1, t2):
        s = symplectic_of_circuit(t1, t2)
        j = _symplectic_form(3)
        assert np.max(np.abs(s.matrix @ j @ s.matrix.T - j)) < 1e-12

    def test_fock_vs_symplectic_first_moments(self):
        dim = 18
        t1, t2 = 0.6, 0.4
        alphas = [0.3, -0.2 + 0.25j, 0.15j]
        modes = [
            StateVector((dim,), displacement_op(a, dim).entries[:, 0]) for a in alphas
        ]
        st = tensor(modes)
        from cubist.gate import _apply_bs

        amps = _apply_bs(st.amplitudes.ravel(), (dim, dim, dim), (0, 1), t1)
        amps = _apply_bs(amps, (dim, dim, dim), (1, 2), t2)
        out = StateVector((dim, dim, dim), amps.reshape(dim, dim, dim))

        means_in = []
        for a in alphas:
            means_in.extend([np.sqrt(2) * a.real, np.sqrt(2) * a.imag])
        expected = symplectic_of_circuit(t1, t2).apply(np.array(means_in))

        from cubist.fock import rotated_quadrature_moments

        got = []
        for mode in range(3):
            got.append(rotated_quadrature_moments(out, mode, 0.0)[0])
            got.append(rotated_quadrature_moments(out, mode, np.pi / 2)[0])
        assert np.max(np.abs(np.array(got) - expected)) < 1e-8
