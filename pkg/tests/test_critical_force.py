"""Critical force of the straight rod: closed formula, numeric bisection and kernel."""

import numpy as np
import pytest

from rodstab.coefficients import RodCoefficients, default_coefficients
from rodstab.critical_force import (
    X_STAR_THRESHOLD, CriticalForceBreakdown, analytic_kernel, bifurcation_kernel_check,
    blind_bracket, f_crit_analytic, f_crit_numeric, find_x_star, force_scale,
    g_functions, local_global_gap, relative_gap, straight_rod_status,
)
from rodstab.energy import (
    Clamped, ClampedClamped, WeakClamped, WeakFree, lowest_eigenvalue,
    second_variation_matrix,
)
from rodstab.errors import BracketFailure, DegenerateCase, UnsupportedBc
from rodstab.so3 import exp_skew

# --- parameters ---
STRIP_WEAK_FCRIT = 53.29
N_DRAWS = 20
GAP_TOL = 5e-3
N_GRID_A = 100
N_UNIQUENESS = 10_000


def draw_coefficients(rng, x_star_side):
    """Random moduli with a = c12 c23 / (c13 k)^2 on the requested side of the threshold."""
    c12, c13, c23 = rng.uniform(0.1, 1.0, 3)
    a = rng.uniform(0.03, 0.2) if x_star_side else rng.uniform(0.005, 0.02)
    k = np.sqrt(c12 * c23 / a) / c13
    return RodCoefficients.from_moduli(c12, c13, c23, k)


class TestXStar:

    def test_g1_vanishes_at_two_pi(self):
        for a in (0.01, 0.05, 0.3):
            assert g_functions(2 * np.pi, a)[0] == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("a", [0.03, 0.05, 0.1, 0.5, 2.0])
    def test_common_zero(self, a):
        x = find_x_star(a)
        assert np.pi < x < 2 * np.pi
        g1, g2 = g_functions(x, a)
        assert abs(g1) < 1e-8
        assert abs(g2) < 1e-8

    @pytest.mark.parametrize("a", [0.001, 0.01, 0.025])
    def test_below_threshold(self, a):
        assert find_x_star(a) is None

    def test_grid_above_threshold(self):
        xs = np.linspace(np.pi + 1e-6, 2 * np.pi, N_UNIQUENESS)
        for a in np.geomspace(X_STAR_THRESHOLD * (1 + 1e-3), 100 * X_STAR_THRESHOLD, N_GRID_A):
            x = find_x_star(a)
            assert np.pi < x < 2 * np.pi
            g1 = g_functions(x, a)[0]
            assert abs(g1) <= 1e-9 * (2.0 + abs(x - a * x ** 3))
            g2 = g_functions(xs, a)[1]
            assert np.count_nonzero(np.sign(g2[:-1]) != np.sign(g2[1:])) == 1

    def test_grid_below_threshold(self):
        for a in np.geomspace(X_STAR_THRESHOLD * 1e-3, X_STAR_THRESHOLD * (1 - 1e-3), N_GRID_A):
            assert find_x_star(a) is None

    def test_approaches_two_pi(self):
        x = find_x_star(X_STAR_THRESHOLD * (1 + 1e-4))
        assert x == pytest.approx(2 * np.pi, abs=1e-2)

    def test_invalid(self):
        with pytest.raises(ValueError):
            find_x_star(0.0)
        with pytest.raises(ValueError):
            find_x_star(-1.0)


class TestAnalytic:

    def test_strip_weak_clamped(self, strip_coeffs):
        br = f_crit_analytic(strip_coeffs, WeakClamped())
        assert br.branch == "weak"
        assert br.dominant == "f1"
        assert br.f_crit == pytest.approx(STRIP_WEAK_FCRIT, rel=2e-3)
        assert br.a_param < X_STAR_THRESHOLD
        assert br.x_star is None

    def test_two_pi_against_weak(self, strip_coeffs):
        weak = f_crit_analytic(strip_coeffs, WeakClamped())
        clamped = f_crit_analytic(strip_coeffs, ClampedClamped())
        assert clamped.branch == "two-pi"
        assert clamped.f1_crit - weak.f1_crit == pytest.approx(
            -3 * np.pi ** 2 * strip_coeffs.c12, rel=1e-12)

    def test_x_star_branch(self):
        coeffs = default_coefficients(0.6, 1.0)
        br = f_crit_analytic(coeffs, ClampedClamped())
        assert br.branch == "x-star"
        coupling = (coeffs.c13 * coeffs.k) ** 2 / coeffs.c23
        assert br.f1_crit == pytest.approx(coupling - br.x_star ** 2 * coeffs.c12, rel=1e-12)
        assert br.f2_crit == pytest.approx(-np.pi ** 2 * coeffs.c13)
        assert br.f_crit == max(br.f1_crit, br.f2_crit)

    def test_uncoupled(self):
        coeffs = RodCoefficients.from_moduli(0.2, 0.3, 0.1, 0.0)
        br = f_crit_analytic(coeffs, ClampedClamped())
        assert br.branch == "uncoupled"
        assert br.a_param is None
        assert br.f_crit == pytest.approx(-np.pi ** 2 * 0.2)
        assert br.dominant == "f1"

    def test_length_scaling(self, strip_coeffs):
        br1 = f_crit_analytic(strip_coeffs, WeakClamped())
        br2 = f_crit_analytic(strip_coeffs.with_length(2.0), WeakClamped())
        assert br2.f2_crit == pytest.approx(br1.f2_crit / 4)
        assert br2.length_L == 2.0

    def test_increasing_in_curvature(self):
        values = [f_crit_analytic(RodCoefficients.from_moduli(0.2, 0.4, 0.15, k),
                                  WeakClamped()).f_crit for k in (1.0, 2.0, 4.0, 8.0)]
        assert all(b > a for a, b in zip(values, values[1:]))

    @pytest.mark.parametrize("bc", [WeakFree(), Clamped(),
                                    ClampedClamped(np.eye(3), exp_skew([0.0, 0.1, 0.0]))])
    def test_unsupported_bc(self, strip_coeffs, bc):
        with pytest.raises(UnsupportedBc):
            f_crit_analytic(strip_coeffs, bc)

    def test_dict_round_trip(self, strip_coeffs):
        for bc in (WeakClamped(), ClampedClamped()):
            br = f_crit_analytic(strip_coeffs, bc)
            assert CriticalForceBreakdown.from_dict(br.to_dict()) == br
        br = f_crit_analytic(default_coefficients(0.6, 1.0), ClampedClamped())
        assert "x_star" in br.to_dict()
        assert CriticalForceBreakdown.from_dict(br.to_dict()) == br


class TestNumeric:

    @pytest.mark.parametrize("bc", [WeakClamped(), ClampedClamped()])
    def test_strip(self, strip_coeffs, bc):
        br = f_crit_analytic(strip_coeffs, bc)
        numeric = f_crit_numeric(strip_coeffs, bc)
        assert abs(relative_gap(numeric, br, strip_coeffs)) <= GAP_TOL

    def test_random_draws(self):
        rng = np.random.default_rng(7)
        branches = []
        for i in range(N_DRAWS):
            coeffs = draw_coefficients(rng, x_star_side=i % 2 == 1)
            for bc in (ClampedClamped(), WeakClamped()):
                br = f_crit_analytic(coeffs, bc)
                branches.append(br.branch)
                numeric = f_crit_numeric(coeffs, bc)
                assert abs(relative_gap(numeric, br, coeffs)) <= GAP_TOL, coeffs
        assert branches.count("x-star") >= 5

    def test_blind_bracket(self, strip_coeffs):
        bc = WeakClamped()
        guided = f_crit_numeric(strip_coeffs, bc)
        blind = f_crit_numeric(strip_coeffs, bc, bracket=blind_bracket(strip_coeffs))
        assert blind == pytest.approx(guided, rel=1e-6)

    def test_bracket_failure(self, strip_coeffs):
        bc = WeakClamped()
        f = f_crit_analytic(strip_coeffs, bc).f_crit
        scale = force_scale(strip_coeffs, f)
        with pytest.raises(BracketFailure):
            f_crit_numeric(strip_coeffs, bc, bracket=(f + scale, f + 2 * scale))

    @pytest.mark.parametrize("bc", [WeakClamped(), ClampedClamped()])
    def test_sign_consistency(self, strip_coeffs, bc):
        f = f_crit_analytic(strip_coeffs, bc).f_crit
        eps = 1e-2 * force_scale(strip_coeffs, f)
        assert lowest_eigenvalue(second_variation_matrix(strip_coeffs, f + eps, 1.0, bc, 400)) > 0
        assert lowest_eigenvalue(second_variation_matrix(strip_coeffs, f - eps, 1.0, bc, 400)) < 0

    def test_grid_too_coarse(self, strip_coeffs):
        with pytest.raises(ValueError):
            f_crit_numeric(strip_coeffs, WeakClamped(), N=50)


class TestStraightRodStatus:

    def test_statuses(self, strip_coeffs):
        bc = WeakClamped()
        f = f_crit_analytic(strip_coeffs, bc).f_crit
        assert straight_rod_status(strip_coeffs, bc, f + 1.0) == "stable"
        assert straight_rod_status(strip_coeffs, bc, f - 1.0) == "unstable"
        assert straight_rod_status(strip_coeffs, bc, f) == "marginal"


class TestKernel:

    def test_kernel_vanishes_at_ends(self, strip_coeffs):
        xs = np.array([0.0, 1.0])
        for bc in (ClampedClamped(), WeakClamped()):
            w = analytic_kernel(strip_coeffs, None, bc, xs)
            np.testing.assert_allclose(w[0], 0.0, atol=1e-12)
            np.testing.assert_allclose(w[1, 1:], 0.0, atol=1e-12)

    @pytest.mark.parametrize("bc", [WeakClamped(), ClampedClamped()])
    def test_strip(self, strip_coeffs, bc):
        check = bifurcation_kernel_check(strip_coeffs, bc=bc)
        assert check.kernel_dim == 1
        assert check.kernel_match_error <= 1e-3
        assert abs(check.relative_gap) <= GAP_TOL

    def test_x_star(self):
        coeffs = default_coefficients(0.6, 1.0)
        check = bifurcation_kernel_check(coeffs, bc=ClampedClamped())
        assert check.kernel_dim == 1
        assert check.kernel_match_error <= 1e-3

    def test_degenerate(self):
        # weak-clamped f1 = k^2 - 2 pi^2 = -pi^2 = f2
        coeffs = RodCoefficients.from_moduli(2.0, 1.0, 1.0, np.pi)
        with pytest.raises(DegenerateCase):
            bifurcation_kernel_check(coeffs, bc=WeakClamped())


class TestLocalGlobalGap:

    def test_full_turn_beam(self):
        coeffs = RodCoefficients.from_moduli(1.0, 0.5, 1.0, 2 * np.pi)
        gap = local_global_gap(coeffs)
        assert gap.curved_admissible
        assert gap.f_crit < 0.0
        assert gap.energy_curved == pytest.approx(0.0, abs=1e-12)
        assert gap.energy_straight == pytest.approx(np.pi ** 2, rel=1e-12)

    def test_curved_beam_not_admissible(self, strip_coeffs):
        assert not local_global_gap(strip_coeffs).curved_admissible
