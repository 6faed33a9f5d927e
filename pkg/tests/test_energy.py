"""Discrete rod energy, gradient, minimizer and the straight-rod second variation."""

import numpy as np
import pytest
from scipy.linalg import eigh

from conftest import random_rotation
from rodstab.coefficients import RodCoefficients
from rodstab.critical_force import f_crit_analytic, force_scale
from rodstab.energy import (
    BC_TAGS, Clamped, ClampedClamped, RotationCurve, WeakClamped, WeakFree, bc_from_tag,
    curved_beam, el_residual, elastic_energy, energy, gradient, gradient_norm,
    lowest_eigenvalue, lumped_mass, minimize, random_curve, second_variation_dofs,
    second_variation_matrix, second_variation_parts, straight, strains,
)
from rodstab.errors import BcViolation, FrameJump, NoConvergence, UnsupportedBc
from rodstab.so3 import E1, exp_skew

# --- parameters ---
N_SMALL = 40
FD_EPS = 1e-6
FD_FORCE = 3.0
RL_TILT = np.array([0.1, 0.2, -0.1])
N_FD_CURVES = 20
N_MINIMIZE = 200


def all_bcs():
    return [WeakFree(), Clamped(), ClampedClamped(np.eye(3), exp_skew(RL_TILT)), WeakClamped()]


def perturb(curve, eta, eps):
    return RotationCurve(curve.samples @ exp_skew(eps * eta), curve.length_L)


def smooth_field(xs, L):
    s = xs / L
    return np.column_stack([
        0.2 * np.sin(0.5 * np.pi * s),
        0.2 * np.sin(np.pi * s),
        0.1 * np.sin(2.0 * np.pi * s),
    ])


class TestBoundaryConditions:

    def test_tags(self):
        for tag in BC_TAGS:
            assert bc_from_tag(tag).tag == tag
        with pytest.raises(ValueError):
            bc_from_tag("pinned")

    def test_clamp_must_be_rotation(self):
        with pytest.raises(ValueError):
            Clamped(2.0 * np.eye(3))

    def test_violation(self, strip_coeffs):
        rod = straight(1.0, N_SMALL)
        with pytest.raises(BcViolation):
            energy(rod, strip_coeffs, 0.0, Clamped(exp_skew([0.1, 0.0, 0.0])))
        with pytest.raises(BcViolation):
            energy(curved_beam(strip_coeffs, 1.0, N_SMALL), strip_coeffs, 0.0, WeakClamped())

    def test_weak_clamped_allows_twist(self, strip_coeffs):
        rod = straight(1.0, N_SMALL)
        rod.samples[-1] = exp_skew([0.7, 0.0, 0.0])
        energy(rod, strip_coeffs, 1.0, WeakClamped())


class TestRotationCurve:

    def test_too_few_elements(self):
        with pytest.raises(ValueError):
            RotationCurve(np.tile(np.eye(3), (4, 1, 1)), 1.0)

    def test_not_rotations(self):
        samples = np.tile(np.eye(3), (6, 1, 1))
        samples[2] *= 1.01
        with pytest.raises(ValueError):
            RotationCurve(samples, 1.0)

    def test_bad_length(self):
        with pytest.raises(ValueError):
            RotationCurve(np.tile(np.eye(3), (6, 1, 1)), 0.0)

    def test_grid(self):
        rod = straight(2.0, 8)
        assert rod.h == 0.25
        np.testing.assert_allclose(rod.xs, np.linspace(0.0, 2.0, 9))
        assert rod.weights.sum() == pytest.approx(2.0)


class TestEnergy:

    def test_straight_rod(self, strip_coeffs):
        rod = straight(1.0, N_SMALL)
        expected = 0.5 * strip_coeffs.c13 * strip_coeffs.k ** 2
        assert energy(rod, strip_coeffs, 0.0, WeakFree()) == pytest.approx(expected, rel=1e-13)
        assert energy(rod, strip_coeffs, 2.5, WeakFree()) == pytest.approx(expected - 2.5, rel=1e-13)

    def test_curved_beam_is_free_of_stress(self, strip_coeffs):
        beam = curved_beam(strip_coeffs, 1.0, N_SMALL)
        assert elastic_energy(beam, strip_coeffs) == pytest.approx(0.0, abs=1e-18)

    def test_curved_beam_strains(self, strip_coeffs):
        beam = curved_beam(strip_coeffs, 1.0, N_SMALL)
        expected = np.tile([0.0, strip_coeffs.k, 0.0], (N_SMALL, 1))
        np.testing.assert_allclose(strains(beam).omegas, expected, atol=1e-10)

    def test_frame_jump(self, strip_coeffs):
        samples = np.tile(np.eye(3), (N_SMALL + 1, 1, 1))
        samples[3:] = exp_skew([0.0, 0.0, 2.0])
        with pytest.raises(FrameJump):
            strains(RotationCurve(samples, 1.0))

    def test_frame_indifference(self, strip_coeffs, rng):
        curve = random_curve(1.0, N_SMALL, WeakFree(), rng)
        turned = RotationCurve(random_rotation(rng) @ curve.samples, 1.0)
        assert elastic_energy(turned, strip_coeffs) == pytest.approx(
            elastic_energy(curve, strip_coeffs), rel=1e-10)


class TestGradient:

    @pytest.mark.parametrize("seed", range(N_FD_CURVES))
    @pytest.mark.parametrize("bc_index", range(4))
    def test_finite_differences(self, strip_coeffs, bc_index, seed):
        bc = all_bcs()[bc_index]
        rng = np.random.default_rng(seed)
        curve = random_curve(1.0, N_SMALL, bc, rng)
        eta = rng.standard_normal((N_SMALL + 1, 3)) * bc.free_mask(N_SMALL + 1)
        g = gradient(curve, strip_coeffs, FD_FORCE, bc)
        fd = (energy(perturb(curve, eta, FD_EPS), strip_coeffs, FD_FORCE, bc)
              - energy(perturb(curve, eta, -FD_EPS), strip_coeffs, FD_FORCE, bc)) / (2 * FD_EPS)
        assert fd == pytest.approx(float(np.sum(g * eta)), rel=1e-6, abs=1e-6)

    def test_constrained_components_vanish(self, strip_coeffs, rng):
        bc = WeakClamped()
        g = gradient(random_curve(1.0, N_SMALL, bc, rng), strip_coeffs, FD_FORCE, bc)
        assert np.all(g[0, 1:] == 0.0)
        assert np.all(g[-1, 1:] == 0.0)

    def test_curved_beam_is_stationary(self, strip_coeffs):
        beam = curved_beam(strip_coeffs, 1.0, N_SMALL)
        g = gradient(beam, strip_coeffs, 0.0, WeakFree())
        assert gradient_norm(g, beam.weights) < 1e-9


class TestElResidual:

    def test_curved_beam(self, strip_coeffs):
        interior, natural = el_residual(curved_beam(strip_coeffs, 1.0, 64), strip_coeffs,
                                        0.0, WeakFree())
        assert interior < 1e-9
        assert natural < 1e-9

    def test_straight_rod_natural_condition(self, strip_coeffs):
        interior, natural = el_residual(straight(1.0, 64), strip_coeffs, 4.0, WeakFree())
        assert interior == pytest.approx(0.0, abs=1e-12)
        assert natural == pytest.approx(2.0 * strip_coeffs.c13 * strip_coeffs.k, rel=1e-12)

    def test_needs_eight_elements(self, strip_coeffs):
        with pytest.raises(ValueError):
            el_residual(straight(1.0, 6), strip_coeffs, 0.0, WeakFree())


class TestMinimize:

    @pytest.mark.slow
    @pytest.mark.parametrize("seed", range(1, 6))
    def test_clamped_free_reaches_curved_beam(self, strip_coeffs, seed):
        bc = Clamped()
        start = random_curve(1.0, N_MINIMIZE, bc, np.random.default_rng(seed))
        curve, trace = minimize(start, strip_coeffs, 0.0, bc, tol=1e-7)
        assert trace.converged
        assert energy(curve, strip_coeffs, 0.0, bc) <= 1e-6
        expected = np.tile([0.0, strip_coeffs.k, 0.0], (N_MINIMIZE, 1))
        np.testing.assert_allclose(strains(curve).omegas, expected, atol=1e-3)

    def test_energy_is_non_increasing(self, strip_coeffs, rng):
        bc = Clamped()
        _, trace = minimize(random_curve(1.0, 60, bc, rng), strip_coeffs, 0.0, bc, tol=1e-6)
        e = np.array(trace.energies)
        assert np.all(np.diff(e) <= 1e-12 * max(1.0, abs(e[0])))
        assert len(trace.grad_norms) == len(trace.energies) == trace.iterations + 1

    def test_straight_start_without_curvature(self):
        coeffs = RodCoefficients.from_moduli(0.2, 0.3, 0.1, 0.0)
        curve, trace = minimize(straight(1.0, N_SMALL), coeffs, 0.0, Clamped())
        assert trace.iterations == 0
        assert trace.converged
        np.testing.assert_array_equal(curve.samples, straight(1.0, N_SMALL).samples)

    def test_stable_straight_rod_is_recovered(self, strip_coeffs, rng):
        bc = WeakClamped()
        f = 2.0 * f_crit_analytic(strip_coeffs, bc).f_crit
        start = random_curve(1.0, 60, bc, rng, amplitude=0.05)
        curve, trace = minimize(start, strip_coeffs, f, bc, tol=1e-6)
        assert trace.converged
        tangents = curve.samples @ E1
        assert np.max(np.linalg.norm(tangents - E1, axis=1)) < 1e-3

    def test_no_convergence_carries_result(self, strip_coeffs, rng):
        bc = Clamped()
        start = random_curve(1.0, 60, bc, rng)
        with pytest.raises(NoConvergence) as info:
            minimize(start, strip_coeffs, 0.0, bc, max_iter=2)
        curve, trace = info.value.result
        assert info.value.iterations == 2
        assert trace.iterations == 2
        assert isinstance(curve, RotationCurve)
        assert trace.energies[-1] < trace.energies[0]

    def test_start_must_satisfy_bc(self, strip_coeffs):
        with pytest.raises(BcViolation):
            minimize(curved_beam(strip_coeffs, 1.0, N_SMALL), strip_coeffs, 1.0, WeakClamped())


class TestSecondVariation:

    N = 200

    @pytest.mark.parametrize("bc", [WeakClamped(), ClampedClamped()])
    def test_symmetric_and_affine(self, strip_coeffs, bc):
        K1 = second_variation_matrix(strip_coeffs, 1.0, 1.0, bc, self.N)
        K3 = second_variation_matrix(strip_coeffs, 3.0, 1.0, bc, self.N)
        K2 = second_variation_matrix(strip_coeffs, 2.0, 1.0, bc, self.N)
        np.testing.assert_array_equal(K2, K2.T)
        np.testing.assert_allclose(K1 + K3, 2.0 * K2, atol=1e-12)

    def test_dof_count(self):
        N = 10
        assert len(second_variation_dofs(ClampedClamped(), N)) == 3 * (N - 1)
        assert len(second_variation_dofs(WeakClamped(), N)) == 3 * N - 2
        assert len(lumped_mass(1.0, WeakClamped(), N)) == 3 * N - 2

    @pytest.mark.parametrize("bc", [WeakClamped(), ClampedClamped()])
    def test_sign_change_at_critical_force(self, strip_coeffs, bc):
        br = f_crit_analytic(strip_coeffs, bc)
        margin = 0.1 * force_scale(strip_coeffs, br.f_crit)
        above = second_variation_matrix(strip_coeffs, br.f_crit + margin, 1.0, bc, self.N)
        below = second_variation_matrix(strip_coeffs, br.f_crit - margin, 1.0, bc, self.N)
        assert lowest_eigenvalue(above) > 0.0
        assert lowest_eigenvalue(below) < 0.0

    def test_banded_eigenvalue_matches_dense(self, strip_coeffs):
        K = second_variation_matrix(strip_coeffs, 40.0, 1.0, WeakClamped(), 120)
        dense = eigh(K, eigvals_only=True)[0]
        assert lowest_eigenvalue(K) == pytest.approx(dense, rel=1e-8, abs=1e-10)

    @pytest.mark.parametrize("bc", [WeakClamped(), ClampedClamped()])
    def test_second_difference_of_energy(self, strip_coeffs, bc):
        N, f, eps = 100, 30.0, 1e-3
        rod = straight(1.0, N)
        keep = second_variation_dofs(bc, N)
        eta = np.zeros(3 * (N + 1))
        eta[keep] = smooth_field(rod.xs, 1.0).ravel()[keep]
        eta = eta.reshape(N + 1, 3)
        e0 = energy(rod, strip_coeffs, f, bc)
        second = (energy(perturb(rod, eta, eps), strip_coeffs, f, bc)
                  + energy(perturb(rod, eta, -eps), strip_coeffs, f, bc) - 2.0 * e0) / eps ** 2
        v = eta.ravel()[keep]
        K = second_variation_matrix(strip_coeffs, f, 1.0, bc, N)
        assert second == pytest.approx(v @ K @ v, rel=1e-4)

    @pytest.mark.parametrize("bc", [WeakClamped(), ClampedClamped()])
    def test_second_difference_error_is_quadratic(self, strip_coeffs, bc):
        N, f = 100, 30.0
        rod = straight(1.0, N)
        keep = second_variation_dofs(bc, N)
        eta = np.zeros(3 * (N + 1))
        eta[keep] = 25.0 * smooth_field(rod.xs, 1.0).ravel()[keep]
        eta = eta.reshape(N + 1, 3)
        v = eta.ravel()[keep]
        exact = v @ second_variation_matrix(strip_coeffs, f, 1.0, bc, N) @ v
        e0 = energy(rod, strip_coeffs, f, bc)

        def error(eps):
            second = (energy(perturb(rod, eta, eps), strip_coeffs, f, bc)
                      + energy(perturb(rod, eta, -eps), strip_coeffs, f, bc) - 2.0 * e0) / eps ** 2
            return abs(second - exact)

        assert error(1e-2) / error(1e-3) == pytest.approx(100.0, rel=0.2)

    @pytest.mark.parametrize("bc", [WeakFree(), Clamped()])
    def test_unsupported(self, strip_coeffs, bc):
        with pytest.raises(UnsupportedBc):
            second_variation_parts(strip_coeffs, 1.0, bc, 50)

    def test_clamps_must_be_identity(self, strip_coeffs):
        with pytest.raises(UnsupportedBc):
            second_variation_parts(strip_coeffs, 1.0, ClampedClamped(np.eye(3), exp_skew(RL_TILT)), 50)
