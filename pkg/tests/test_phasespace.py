"""Wigner machinery, Airy evaluation, measurement projectors."""

import numpy as np
import pytest

from cubist import (
    CoverageError,
    OverflowGuardError,
    ProjectorParams,
    SingularPhaseError,
    StateVector,
    WignerGrid,
    airy,
    fock_state,
    generalized_projector_wigner,
    hermite_wavefunction,
    ideal_cubic_wigner,
    projector_wigner,
    pure_projection_state,
    squeeze_op,
    vacuum,
    wigner_of_state,
)
from cubist.phasespace import sign_changes_along_p

from conftest import random_state

AXES = ((-6.0, 6.0, 301), (-6.0, 6.0, 301))


def _laguerre_wigner(n, xs, ps):
    """Closed-form Fock-state Wigner: (-1)^n/pi L_n(2r^2) e^(-r^2)."""
    from numpy.polynomial.laguerre import lagval

    r2 = xs[:, None] ** 2 + ps[None, :] ** 2
    coeffs = np.zeros(n + 1)
    coeffs[n] = 1.0
    return (-1.0) ** n / np.pi * lagval(2 * r2, coeffs) * np.exp(-r2)


class TestWignerOfState:
    def test_vacuum_peak(self):
        w = wigner_of_state(vacuum(6), AXES)
        assert abs(w.values[150, 150] - 1 / np.pi) < 1e-12

    def test_single_photon_negativity(self):
        w = wigner_of_state(fock_state(1, 6), AXES)
        assert abs(w.values[150, 150] + 1 / np.pi) < 1e-12

    def test_two_photon_normalization(self):
        w = wigner_of_state(fock_state(2, 8), AXES)
        assert abs(w.integral() - 1.0) < 0.005

    @pytest.mark.parametrize("n", [0, 1, 2])
    def test_against_laguerre_closed_form(self, n):
        w = wigner_of_state(fock_state(n, 9), AXES)
        ref = _laguerre_wigner(n, w.x_values(), w.p_values())
        assert np.max(np.abs(w.values - ref)) < 1e-9

    def test_multimode_rejected(self):
        from cubist import tensor

        with pytest.raises(ValueError):
            wigner_of_state(tensor([vacuum(3), vacuum(3)]), AXES)

    def test_parity_phase_structure_symmetry(self, rng, optimum_cache):
        # even coefficients real, odd imaginary  =>  W(-x, p) = W(x, p)
        states = [optimum_cache(3).state()]
        re = rng.normal(size=3)
        im = rng.normal(size=3)
        c = np.zeros(6, dtype=complex)
        c[0::2] = re
        c[1::2] = 1j * im
        states.append(StateVector((6,), c / np.linalg.norm(c)))
        for st in states:
            w = wigner_of_state(st, AXES)
            assert np.max(np.abs(w.values - w.values[::-1, :])) < 1e-9


class TestAiry:
    def test_value_at_zero(self):
        assert abs(airy(0.0) - 0.3550280539) < 1e-10

    def test_value_at_one(self):
        assert abs(airy(1.0) - 0.1352924163) < 1e-10

    def test_right_tail_decay(self):
        assert airy(10.0) < airy(5.0) < airy(1.0)

    def test_against_scipy_dense(self):
        from scipy.special import airy as sp_airy

        xs = np.linspace(-40.0, 40.0, 8001)
        errs = [abs(airy(float(x)) - sp_airy(x)[0]) for x in xs]
        assert max(errs) < 1e-10

    @pytest.mark.parametrize("seam", [6.0, -6.0])
    def test_switchover_continuity(self, seam):
        # series and asymptotic answers agree across the seam
        lo, hi = airy(seam - 1e-9), airy(seam + 1e-9)
        assert abs(lo - hi) < 1e-9

    def test_domain_guard(self):
        with pytest.raises(OverflowGuardError):
            airy(40.5)


class TestIdealCubicWigner:
    def test_x_symmetry_exact(self):
        w = ideal_cubic_wigner(0.1, AXES)
        assert np.array_equal(w.values, w.values[::-1, :])

    def test_normalized_on_grid(self):
        w = ideal_cubic_wigner(0.1, AXES)
        assert abs(w.integral() - 1.0) < 1e-9

    def test_ridge_follows_parabola(self):
        gamma = 0.1
        w = ideal_cubic_wigner(gamma, AXES)
        ps = w.p_values()
        scale = np.cbrt(4.0 / (3.0 * gamma))
        airy_peak_offset = 1.0188 / scale
        for ix in (150, 180, 210):
            x = w.x_values()[ix]
            p_star = ps[np.argmax(w.values[ix])]
            assert abs(p_star - (3 * gamma * x ** 2 + airy_peak_offset)) < 0.1

    def test_gamma_zero_rejected(self):
        with pytest.raises(ValueError):
            ideal_cubic_wigner(0.0, AXES)


class TestPureProjectionState:
    def test_trivial_results_give_conjugation(self):
        # real even ancilla: q = y = 0 projects onto the ancilla itself
        st = fock_state(2, 8)
        proj = pure_projection_state(st, 0.0, 0.0)
        overlap = np.vdot(
            proj.amplitudes.ravel()[:8], st.amplitudes.ravel()
        )
        assert abs(abs(overlap) - 1.0) < 1e-10

    def test_vacuum_shift_rule(self):
        phi = pure_projection_state(lambda u: np.pi ** -0.25 * np.exp(-u ** 2 / 2), 1.0, 0.0)
        us = np.linspace(-2, 6, 200)
        vals = np.abs(phi(us))
        assert abs(us[np.argmax(vals)] - np.sqrt(2)) < 0.05

    def test_norm_preserved(self, rng):
        st = StateVector((5,), random_state(rng, 5))
        for q, y in [(0.5, -0.3), (1.2, 0.8)]:
            proj = pure_projection_state(st, q, y)
            assert abs(proj.norm() - 1.0) < 1e-10

    def test_statevector_path_matches_wavefunction_formula(self, rng):
        st = StateVector((4,), random_state(rng, 4))
        q, y = 0.4, -0.6

        def psi(u):
            total = np.zeros_like(u, dtype=complex)
            for n, c in enumerate(st.amplitudes.ravel()):
                total += c * hermite_wavefunction(n, u)
            return total

        phi = pure_projection_state(psi, q, y)
        proj = pure_projection_state(st, q, y)
        us = np.arange(-12.0, 12.0, 0.002)
        # re-expand the callable in the Fock basis and compare up to global phase
        coeffs = []
        for n in range(proj.mode_dims[0]):
            coeffs.append(np.trapezoid(hermite_wavefunction(n, us) * phi(us), us))
        coeffs = np.array(coeffs)
        inner = np.vdot(proj.amplitudes.ravel(), coeffs)
        assert abs(abs(inner) - 1.0) < 1e-6


class TestProjectorWigner:
    def test_trivial_is_reflection_times_two(self):
        w = wigner_of_state(fock_state(1, 6), AXES)
        proj = projector_wigner(w, 0.0, 0.0)
        assert np.max(np.abs(proj.values - 2.0 * w.values[:, ::-1])) < 1e-12

    def test_vacuum_shift_peak(self):
        w = wigner_of_state(vacuum(6), ((-9, 9, 451), (-9, 9, 451)))
        proj = projector_wigner(w, 1.0, 0.0, axes=((-4, 4, 161), (-4, 4, 161)))
        xs, ps = proj.x_values(), proj.p_values()
        i, j = np.unravel_index(np.argmax(proj.values), proj.values.shape)
        assert abs(xs[i] - np.sqrt(2)) < 0.06
        assert abs(ps[j]) < 0.06
        assert abs(proj.values[i, j] - 2 / np.pi) < 2e-3

    def test_double_reflection_restores(self):
        w = wigner_of_state(fock_state(2, 7), AXES)
        twice = projector_wigner(projector_wigner(w, 0.0, 0.0), 0.0, 0.0)
        assert np.max(np.abs(twice.values - 4.0 * w.values)) < 1e-12

    def test_coverage_error(self):
        w = wigner_of_state(vacuum(6), ((-3, 3, 61), (-3, 3, 61)))
        with pytest.raises(CoverageError):
            projector_wigner(w, 5.0, 0.0)


class TestGeneralizedProjector:
    def test_reduces_to_balanced(self, rng):
        st = StateVector((5,), random_state(rng, 5))
        w = wigner_of_state(st, ((-9, 9, 361), (-9, 9, 361)))
        target_axes = ((-5, 5, 201), (-5, 5, 201))
        q, y = 0.35, -0.2
        a = projector_wigner(w, q, y, axes=target_axes)
        b = generalized_projector_wigner(
            w, ProjectorParams(q=q, y=y, T=0.5, theta=0.0), axes=target_axes
        )
        assert np.max(np.abs(a.values - b.values)) < 1e-6

    def test_pure_squeeze_case_against_fock_route(self):
        # T = 0.8, theta = 0, q = y = 0: the projector is (twice) the Wigner
        # function of the ancilla squeezed by z1 = 2 along x
        w = wigner_of_state(vacuum(8), ((-8, 8, 641), (-8, 8, 641)))
        target_axes = ((-3, 3, 121), (-3, 3, 121))
        proj = generalized_projector_wigner(
            w, ProjectorParams(q=0.0, y=0.0, T=0.8, theta=0.0), axes=target_axes
        )
        squeezed = StateVector((24,), squeeze_op(0.5, 24).entries[:, 0])
        ref = wigner_of_state(squeezed, target_axes)
        assert np.max(np.abs(proj.values - 2.0 * ref.values)) < 1e-4

    def test_integral_preserved(self, rng):
        st = StateVector((4,), random_state(rng, 4))
        w = wigner_of_state(st, ((-10, 10, 501), (-10, 10, 501)))
        params = ProjectorParams(q=0.3, y=0.4, T=0.5, theta=0.2)
        proj = generalized_projector_wigner(w, params, axes=((-7, 7, 351), (-7, 7, 351)))
        # prefactor convention: grid integral matches the ancilla's (times 2
        # normalization of the projector) within interpolation error
        assert abs(proj.integral() - 2.0 * w.integral()) < 1e-3 * 2

    def test_singular_phase_rejected(self):
        with pytest.raises(SingularPhaseError):
            ProjectorParams(q=0.0, y=0.0, T=0.5, theta=np.pi / 2)


class TestWignerGridIO:
    def test_csv_round_trip_bit_exact(self, tmp_path, rng):
        st = StateVector((4,), random_state(rng, 4))
        w = wigner_of_state(st, ((-4, 4, 41), (-4, 4, 37)))
        path = tmp_path / "grid.csv"
        w.to_csv(path)
        back = WignerGrid.from_csv(path)
        assert back.x_axis == w.x_axis
        assert back.p_axis == w.p_axis
        assert np.array_equal(back.values, w.values)

    def test_json_round_trip(self, tmp_path):
        w = wigner_of_state(vacuum(5), ((-3, 3, 21), (-3, 3, 23)))
        path = tmp_path / "grid.json"
        w.to_json(path)
        back = WignerGrid.from_json(path)
        assert np.array_equal(back.values, w.values)


def test_sign_change_counter():
    vals = np.zeros((3, 7))
    vals[1] = [1, -1, 1, 1, -2, 0.5, 0.3]
    grid = WignerGrid((-1.0, 1.0, 3), (-3.0, 3.0, 7), vals)
    assert sign_changes_along_p(grid, x=0.0) == 4
