"""Tests for one-homogeneous maps and the closed-form planar maps."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from onehomog.errors import DimensionMismatch, NoLinearSolution, ZeroGradient
from onehomog.homog import (
    FourierMap,
    HomogMap,
    IdentityMap,
    PerturbedMap,
    RadialTwist,
    cartesian_coefficients,
    conservation_identity_gap,
    conservation_residual,
    conservation_terms,
    construct_solution,
    covering_map,
    fd_gradient,
    g_eval,
    gradient_polar,
    h_norm,
    identity_map,
    jacobian,
    lift_k,
    residual_lower_bound,
    rotate_target,
    strong_residual,
)
from onehomog.quadrature import make_bump
from onehomog.spectral import (
    SkewCoefficients,
    build_lambda,
    power_law,
    quadratic,
    quartic,
)

from .factories import make_skew


class TestConstructSolution:
    """Test cases for the stationary map of mode k."""

    def test_flagship_amplitude(self, flagship_lambda, profile):
        """Test that the flagship map has t = 1 and a = 5^(-1/2)."""
        u = construct_solution(flagship_lambda, profile, 2)
        assert u.branch == "covering"
        assert u.t == pytest.approx(1.0, abs=1e-12)
        assert u.a == pytest.approx(5**-0.5, abs=1e-12)

    def test_flagship_invariants(self, flagship_lambda, profile):
        """Test |x| = |y|, x.y = 0 and c^2 = (1 + k^2)|x|^2."""
        u = construct_solution(flagship_lambda, profile, 2)
        for name, gap in u.invariant_gaps().items():
            assert gap <= 1e-12, name

    def test_flagship_residuals(self, flagship_lambda, profile):
        """Test that the constructed map solves the ODE and conserves |g|^2+|g'|^2."""
        u = construct_solution(flagship_lambda, profile, 2)
        assert conservation_residual(u) <= 1e-12
        assert strong_residual(u, profile, flagship_lambda) <= 1e-10

    @pytest.mark.parametrize("k", [2, 3, 5])
    @pytest.mark.parametrize("m", [2, 4, 6])
    def test_strong_residual_vanishes(self, m, k):
        """Test the strong residual for random Lambda, several k and m."""
        lam = make_skew(m, seed=10 * m + k)
        u = construct_solution(lam, power_law(3.0), k)
        scale = max(1.0, u.c**2)
        assert strong_residual(u, power_law(3.0), lam) <= 1e-10 * scale
        assert conservation_residual(u) <= 1e-10 * scale

    def test_opposite_rho_sign_fails(self, flagship_lambda, profile):
        """Test that flipping y breaks the strong residual."""
        u = construct_solution(flagship_lambda, profile, 2)
        flipped = HomogMap(u.m, u.k, u.x, -u.y, u.c, u.t, u.a, u.branch)
        assert strong_residual(flipped, profile, flagship_lambda) > 1e-3

    def test_linear_branch(self):
        """Test k = 1 on an odd-dimensional Lambda with a kernel."""
        lam = make_skew(3, seed=7)
        u = construct_solution(lam, quartic(), 1, amplitude=2.0)
        assert u.branch == "linear"
        np.testing.assert_allclose(u.x, u.y)
        assert np.linalg.norm(u.x) == pytest.approx(2.0 / np.sqrt(2.0))
        assert strong_residual(u, quartic(), lam) <= 1e-10

    def test_linear_branch_needs_kernel(self, flagship_lambda, profile):
        """Test that k = 1 on a nonsingular Lambda raises NoLinearSolution."""
        with pytest.raises(NoLinearSolution, match="non-trivial kernel"):
            construct_solution(flagship_lambda, profile, 1)

    def test_eig_index_out_of_range(self, flagship_lambda, profile):
        """Test that eig_index beyond the nonzero eigenvalues is rejected."""
        with pytest.raises(ValueError, match="eig_index 2 out of range"):
            construct_solution(flagship_lambda, profile, 2, eig_index=2)

    def test_zero_lambda_covering(self, profile):
        """Test that the covering branch needs a nonzero Lambda."""
        lam = build_lambda(SkewCoefficients(2, {}))
        with pytest.raises(ValueError, match="nonzero Lambda"):
            construct_solution(lam, profile, 2)

    def test_quadratic_profile_propagates_degenerate(self, flagship_lambda):
        """Test that the degenerate amplitude equation surfaces as ValueError."""
        with pytest.raises(ValueError, match="constant"):
            construct_solution(flagship_lambda, quadratic(), 2)


class TestResidualGuards:
    """Test cases for the guards on the pointwise residuals."""

    def test_zero_gradient(self, flagship_lambda, profile):
        """Test that c = 0 raises ZeroGradient."""
        zero = HomogMap(2, 2, np.zeros(2), np.zeros(2), 0.0, 0.0, 0.0, "covering")
        with pytest.raises(ZeroGradient):
            strong_residual(zero, profile, flagship_lambda)

    def test_dimension_mismatch(self, u_bar, profile):
        """Test that a Lambda of the wrong size is rejected."""
        with pytest.raises(DimensionMismatch, match="Lambda is 3x3"):
            strong_residual(u_bar, profile, make_skew(3))

    def test_theta_sample_floor(self, u_bar):
        """Test that fewer than eight angular samples are rejected."""
        with pytest.raises(ValueError, match="at least 8"):
            conservation_residual(u_bar, n_theta=4)


class TestCoveringMap:
    """Test cases for u_bar = a R e_R(k theta)."""

    def test_default_amplitude(self):
        """Test that a defaults to k^(-1/2)."""
        assert covering_map(4).a == pytest.approx(0.5)

    def test_identity(self):
        """Test that the identity map is the 1-covering map with a = 1."""
        u = identity_map()
        R = np.array([0.3, 0.7])
        theta = np.array([0.1, 2.0])
        value, _, _ = u.evaluate(R, theta)
        expected, _, _ = IdentityMap().evaluate(R, theta)
        np.testing.assert_allclose(value, expected, atol=1e-15)

    @pytest.mark.parametrize("k", [2, 3, 5])
    def test_jacobian_is_constant(self, k):
        """Test that det grad u_bar = a^2 k away from the origin."""
        u = covering_map(k)
        theta = np.linspace(0.0, 2.0 * np.pi, 17)
        det = jacobian(u, 0.4, theta)
        np.testing.assert_allclose(det, u.a**2 * k, atol=1e-12)

    def test_gradient_matches_finite_differences(self, u_bar):
        """Test the analytic Cartesian gradient against central differences."""
        point = np.array([0.3, -0.2])
        R, theta = np.hypot(*point), np.arctan2(point[1], point[0])
        analytic = gradient_polar(u_bar, R, theta)
        numeric = fd_gradient(u_bar, point, 1e-6)
        np.testing.assert_allclose(analytic, numeric, atol=1e-8)

    def test_gradient_needs_positive_radius(self, u_bar):
        """Test that R <= 0 is rejected."""
        with pytest.raises(ValueError, match="R > 0"):
            gradient_polar(u_bar, 0.0, 0.0)

    def test_g_second_derivative(self, u_bar):
        """Test that g'' = -k^2 g."""
        g, _, gpp = g_eval(u_bar, np.linspace(0.0, 1.0, 5))
        np.testing.assert_allclose(gpp, -4.0 * g)

    def test_jacobian_planar_only(self):
        """Test that jacobian rejects m != 2."""
        u = construct_solution(make_skew(4, seed=1), quartic(), 2)
        with pytest.raises(DimensionMismatch, match="planar"):
            jacobian(u, 0.5, 0.0)


class TestPlanarMaps:
    """Test cases for twists, perturbations and lifts."""

    def test_lift_of_identity_is_covering(self):
        """Test that the k-lift of the identity equals u_bar with a = k^(-1/2)."""
        R = np.linspace(0.1, 1.0, 7)[:, None]
        theta = np.linspace(0.0, 2.0 * np.pi, 11)[None, :]
        lifted = lift_k(IdentityMap(), 3).evaluate(R, theta)
        expected = covering_map(3).evaluate(R, theta)
        for got, want in zip(lifted, expected):
            np.testing.assert_allclose(got, want, atol=1e-14)

    def test_lift_index_guard(self):
        """Test that k < 1 is rejected."""
        with pytest.raises(ValueError, match="positive integer"):
            lift_k(IdentityMap(), 0)

    def test_twist_is_identity_outside_support(self):
        """Test that the twist leaves R >= support untouched."""
        twist = RadialTwist(0.4, 0.5)
        R = np.array([0.5, 0.8])
        theta = np.array([0.3, 1.9])
        expected = IdentityMap().evaluate(R, theta)
        for got, want in zip(twist.evaluate(R, theta), expected):
            np.testing.assert_allclose(got, want, atol=1e-15)

    @settings(max_examples=50, deadline=None)
    @given(
        st.floats(min_value=0.01, max_value=0.99),
        st.floats(min_value=0.0, max_value=2.0 * np.pi),
        st.floats(min_value=-1.0, max_value=1.0),
    )
    def test_twist_preserves_area(self, R, theta, s0):
        """Test that radial twists have unit Jacobian."""
        twist = RadialTwist(s0, 0.7)
        assert jacobian(twist, R, theta) == pytest.approx(1.0, abs=1e-12)

    def test_twist_gradient_matches_finite_differences(self):
        """Test the twist's analytic gradient against central differences."""
        twist = RadialTwist(0.5, 0.8)
        point = np.array([0.2, 0.25])
        R, theta = np.hypot(*point), np.arctan2(point[1], point[0])
        np.testing.assert_allclose(
            gradient_polar(twist, R, theta), fd_gradient(twist, point, 1e-6), atol=1e-7
        )

    def test_perturbed_map_adds_bump(self, u_bar):
        """Test that the perturbation adds amplitude times the bump."""
        bump = make_bump([0.3, 0.0], 0.2, 4, [0.0, 1.0])
        perturbed = PerturbedMap(u_bar, bump, 0.5)
        value, _, _ = perturbed.evaluate(np.array(0.3), np.array(0.0))
        base, _, _ = u_bar.evaluate(np.array(0.3), np.array(0.0))
        np.testing.assert_allclose(value - base, [0.0, 0.5], atol=1e-15)

    def test_perturbed_gradient_matches_finite_differences(self, u_bar):
        """Test the perturbed map's polar partials through its Cartesian gradient."""
        bump = make_bump([0.3, 0.1], 0.2, 4, [1.0, 1.0])
        perturbed = PerturbedMap(u_bar, bump, 0.3)
        point = np.array([0.32, 0.05])
        R, theta = np.hypot(*point), np.arctan2(point[1], point[0])
        np.testing.assert_allclose(
            gradient_polar(perturbed, R, theta),
            fd_gradient(perturbed, point, 1e-6),
            atol=1e-7,
        )

    def test_perturbed_dimension_mismatch(self, u_bar):
        """Test that a bump of another target dimension is rejected."""
        bump = make_bump([0.3, 0.0], 0.2, 4, [0.0, 1.0, 0.0])
        with pytest.raises(DimensionMismatch, match="m=3"):
            PerturbedMap(u_bar, bump, 0.1)


class TestFourierMap:
    """Test cases for u = R g(theta) with a truncated Fourier profile."""

    def test_one_mode_matches_homog_map(self, u_bar):
        """Test that from_homog reproduces g, g' and g''."""
        theta = np.linspace(0.0, 2.0 * np.pi, 37)
        fourier = FourierMap.from_homog(u_bar)
        for got, expected in zip(fourier.profile(theta), g_eval(u_bar, theta)):
            np.testing.assert_allclose(got, expected, atol=1e-14)

    def test_with_mode_extends_coefficients(self, u_bar):
        """Test that adding mode 4 to a mode-2 map keeps the old rows."""
        fourier = FourierMap.from_homog(u_bar).with_mode(
            4, np.array([0.1, 0.0]), np.array([0.0, -0.2])
        )
        assert fourier.cos_coeffs.shape == (5, 2)
        np.testing.assert_allclose(fourier.cos_coeffs[2], u_bar.x)
        np.testing.assert_allclose(fourier.sin_coeffs[4], [0.0, -0.2])

    def test_gradient_matches_finite_differences(self, u_bar):
        """Test the polar derivatives of a two-mode map."""
        fourier = FourierMap.from_homog(u_bar).with_mode(
            3, np.array([0.05, 0.1]), np.array([-0.1, 0.02])
        )
        point = np.array([0.3, -0.4])
        grad = gradient_polar(fourier, 0.5, np.arctan2(-0.4, 0.3))
        np.testing.assert_allclose(grad, fd_gradient(fourier, point, 1e-6), atol=1e-8)

    def test_shape_mismatch(self):
        """Test that unequal coefficient arrays are rejected."""
        with pytest.raises(DimensionMismatch, match="matching"):
            FourierMap(np.zeros((3, 2)), np.zeros((2, 2)))


class TestConservationLaw:
    """Test cases for the conservation terms of a general profile."""

    @pytest.fixture
    def flagship_u(self, flagship_lambda, profile):
        return construct_solution(flagship_lambda, profile, 2)

    @pytest.fixture
    def two_mode(self, flagship_u):
        return FourierMap.from_homog(flagship_u).with_mode(
            3, np.array([0.03, -0.02]), np.array([0.01, 0.04])
        )

    def test_reduces_to_strong_residual(self, flagship_lambda, profile, u_bar):
        """Test that with constant |grad u| the residual is the one-mode one."""
        terms = conservation_terms(u_bar, profile, flagship_lambda)
        sup = float(np.max(np.linalg.norm(terms.residual, axis=-1)))
        assert sup == pytest.approx(
            strong_residual(u_bar, profile, flagship_lambda), rel=1e-12
        )
        assert np.ptp(terms.P) <= 1e-14

    def test_vanishes_at_constructed_map(self, flagship_u, flagship_lambda, profile):
        """Test that the constructed map has zero residual and zero drift."""
        terms = conservation_terms(flagship_u, profile, flagship_lambda)
        assert np.max(np.abs(terms.residual)) <= 1e-10
        assert np.max(np.abs(terms.dP)) <= 1e-12

    def test_identity_holds_off_solutions(self, two_mode, flagship_lambda, profile):
        """Test residual . g' = P'/2 * bracket for a non-solution."""
        terms = conservation_terms(two_mode, profile, flagship_lambda)
        assert conservation_identity_gap(terms) <= 1e-12
        assert np.max(np.abs(terms.residual)) > 1e-3

    @pytest.mark.parametrize("gamma", [quartic(), power_law(3.0), quadratic()])
    def test_bracket_is_positive(self, two_mode, flagship_lambda, gamma):
        """Test the bracket for convex profiles with f'(0) = 0."""
        terms = conservation_terms(two_mode, gamma, flagship_lambda)
        assert np.min(terms.bracket) > 0.0

    def test_quadratic_bracket_is_constant(self, two_mode, flagship_lambda):
        """Test that f = t^2 gives z = 2 and a constant bracket."""
        terms = conservation_terms(two_mode, quadratic(), flagship_lambda)
        np.testing.assert_allclose(terms.bracket, 2.0, rtol=1e-14)

    def test_drift_forces_a_residual(self, two_mode, flagship_lambda, profile):
        """Test sup |residual| >= sup |P'/2 * bracket| / sup |g'| > 0."""
        terms = conservation_terms(two_mode, profile, flagship_lambda)
        bound = residual_lower_bound(terms)
        assert bound > 0.0
        assert np.max(np.linalg.norm(terms.residual, axis=-1)) >= bound * (1 - 1e-12)

    def test_zero_profile(self, flagship_lambda, profile):
        """Test that g = 0 raises ZeroGradient."""
        zero = FourierMap(np.zeros((2, 2)), np.zeros((2, 2)))
        with pytest.raises(ZeroGradient):
            conservation_terms(zero, profile, flagship_lambda)

    def test_dimension_mismatch(self, two_mode, profile):
        """Test that a Lambda of the wrong size is rejected."""
        with pytest.raises(DimensionMismatch, match="Lambda is 3x3"):
            conservation_terms(two_mode, profile, make_skew(3))


class TestRotateTarget:
    """Test cases for Q u with a planar rotation Q."""

    @pytest.mark.parametrize("angle", [0.7, np.pi / 2, -2.0])
    def test_keeps_jacobian_and_gradient_norm(self, u_bar, angle):
        """Test that det grad u and |grad u| are unchanged."""
        rotated = rotate_target(u_bar, angle)
        R = np.array([0.2, 0.9])[:, None]
        theta = np.linspace(0.0, 2.0 * np.pi, 9)[None, :]
        np.testing.assert_allclose(
            jacobian(rotated, R, theta), jacobian(u_bar, R, theta), atol=1e-14
        )
        assert conservation_residual(rotated) <= 1e-14
        assert rotated.invariant_gaps()["orthogonality"] <= 1e-14

    def test_stays_critical(self, flagship_lambda, profile):
        """Test that rotating the constructed map keeps the strong residual at 0."""
        u = construct_solution(flagship_lambda, profile, 2)
        rotated = rotate_target(u, 0.7)
        assert strong_residual(rotated, profile, flagship_lambda) <= 1e-10

    def test_planar_only(self):
        """Test that m != 2 is rejected."""
        u = construct_solution(make_skew(3, seed=7), quartic(), 1)
        with pytest.raises(DimensionMismatch, match="planar"):
            rotate_target(u, 0.3)


class TestHelpers:
    """Test cases for the small closed-form helpers."""

    def test_h_norm(self):
        """Test h(1) = sqrt(2) and the symmetry h(s) = h(1/s)."""
        assert h_norm(1.0) == pytest.approx(np.sqrt(2.0))
        assert h_norm(2.0) == pytest.approx(h_norm(0.5))

    def test_cartesian_coefficients_k1(self):
        """Test that k = 1 gives the Laplacian coefficients (1, 0, 1)."""
        l1, l2, l3 = cartesian_coefficients(1, np.array([0.3, 1.2]))
        np.testing.assert_allclose(l1, 1.0)
        np.testing.assert_allclose(l2, 0.0)
        np.testing.assert_allclose(l3, 1.0)

    def test_cartesian_coefficients_trace(self):
        """Test that l1 + l3 = k^2 + 1."""
        l1, _, l3 = cartesian_coefficients(3, np.linspace(0.0, 3.0, 9))
        np.testing.assert_allclose(l1 + l3, 10.0)
