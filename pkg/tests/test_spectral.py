"""Tests for skew matrices, the spectrum of -Lambda^2 and the amplitude equation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from onehomog.errors import Degenerate, IndexOutOfRange, NonConvergence, NoRoot
from onehomog.spectral import (
    SkewCoefficients,
    amplitude_map,
    build_lambda,
    neg_square_spectrum,
    power_law,
    profile_from_name,
    quadratic,
    quartic,
    random_skew,
    solve_amplitude,
    tabulated,
)

from .factories import make_skew


class TestBuildLambda:
    """Test cases for assembling Lambda from its upper triangle."""

    def test_flagship_entries(self, flagship_lambda):
        """Test that lambda_12 lands above the diagonal and is mirrored."""
        assert flagship_lambda.matrix[0, 1] == 1.5
        assert flagship_lambda.matrix[1, 0] == -1.5
        assert flagship_lambda.norm_sq == pytest.approx(4.5)

    def test_missing_entries_are_zero(self):
        """Test that unspecified coefficients default to zero."""
        lam = build_lambda(SkewCoefficients(4, {(1, 3): 2.0}))
        assert np.count_nonzero(lam.matrix) == 2
        np.testing.assert_array_equal(lam.matrix, -lam.matrix.T)

    @pytest.mark.parametrize("pair", [(2, 1), (1, 1), (0, 2), (1, 4)])
    def test_bad_index_pair(self, pair):
        """Test that pairs outside 1 <= i < j <= m are rejected."""
        with pytest.raises(IndexOutOfRange, match="Invalid coefficient index pair"):
            build_lambda(SkewCoefficients(3, {pair: 1.0}))

    def test_dimension_below_two(self):
        """Test that m < 2 is rejected."""
        with pytest.raises(ValueError, match="at least 2"):
            build_lambda(SkewCoefficients(1, {}))

    def test_zero_matrix_warns(self, caplog):
        """Test that an all-zero Lambda is built but logged."""
        lam = build_lambda(SkewCoefficients(3, {}))
        assert lam.is_zero
        assert "zero 3x3 matrix" in caplog.text

    def test_matrix_is_read_only(self, flagship_lambda):
        """Test that the stored matrix cannot be mutated."""
        with pytest.raises(ValueError):
            flagship_lambda.matrix[0, 1] = 2.0

    def test_random_skew_is_skew(self):
        """Test that random skew matrices are antisymmetric."""
        lam = random_skew(5, np.random.default_rng(3))
        np.testing.assert_array_equal(lam.matrix, -lam.matrix.T)
        assert not lam.is_zero


class TestNegSquareSpectrum:
    """Test cases for the Jacobi eigen-decomposition of -Lambda^2."""

    def test_flagship_double_eigenvalue(self, flagship_lambda):
        """Test that -Lambda^2 = 2.25 I in the flagship scenario."""
        spectrum = neg_square_spectrum(flagship_lambda)
        np.testing.assert_allclose(spectrum.eigenvalues, [2.25, 2.25], rtol=1e-14)
        assert spectrum.kernel_dim == 0

    def test_eigenvalues_descending(self):
        """Test that eigenvalues are sorted from largest to smallest."""
        spectrum = neg_square_spectrum(make_skew(6, seed=1))
        assert np.all(np.diff(spectrum.eigenvalues) <= 0.0)

    @pytest.mark.parametrize("m", [3, 5, 7])
    def test_odd_dimension_has_kernel(self, m):
        """Test that odd-dimensional skew matrices have a kernel."""
        lam = make_skew(m, seed=m)
        spectrum = neg_square_spectrum(lam)
        assert spectrum.kernel_dim >= 1
        kernel = spectrum.kernel_vectors()
        assert np.max(np.abs(lam.matrix @ kernel)) <= 1e-8

    def test_matches_numpy(self):
        """Test that the Jacobi eigenvalues agree with numpy's symmetric solver."""
        lam = make_skew(6, seed=4)
        neg_sq = -(lam.matrix @ lam.matrix)
        expected = np.sort(np.linalg.eigvalsh(neg_sq))[::-1]
        spectrum = neg_square_spectrum(lam)
        np.testing.assert_allclose(spectrum.eigenvalues, expected, atol=1e-12)

    def test_eigenvectors_orthonormal(self):
        """Test that the eigenvector matrix is orthogonal."""
        spectrum = neg_square_spectrum(make_skew(5, seed=2))
        v = spectrum.eigenvectors
        np.testing.assert_allclose(v.T @ v, np.eye(5), atol=1e-12)

    def test_zero_matrix(self):
        """Test that the zero matrix has a full kernel and needs no sweeps."""
        spectrum = neg_square_spectrum(build_lambda(SkewCoefficients(3, {})))
        assert spectrum.kernel_dim == 3
        assert spectrum.sweeps == 0

    def test_sweep_cap(self):
        """Test that exceeding the sweep cap raises NonConvergence."""
        with pytest.raises(NonConvergence, match="did not converge"):
            neg_square_spectrum(make_skew(6, seed=5), max_sweeps=1)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(min_value=2, max_value=8), st.integers(0, 10_000))
    def test_eigenvalues_nonnegative(self, m, seed):
        """Test that -Lambda^2 is positive semi-definite for random skew Lambda."""
        lam = random_skew(m, np.random.default_rng(seed))
        spectrum = neg_square_spectrum(lam)
        assert np.all(spectrum.eigenvalues >= -1e-12 * lam.norm_sq)


class TestProfiles:
    """Test cases for the radial profiles."""

    def test_quartic_derivatives(self):
        """Test f, f' and f'' of t^4 / 4 at t = 2."""
        f = quartic()
        assert float(f.f(np.asarray(2.0))) == pytest.approx(4.0)
        assert float(f.df(np.asarray(2.0))) == pytest.approx(8.0)
        assert float(f.d2f(np.asarray(2.0))) == pytest.approx(12.0)
        assert f.p == 4.0

    @pytest.mark.parametrize("profile", [quartic(), power_law(3.0), quadratic(2.0)])
    def test_convexity(self, profile):
        """Test that the built-in profiles are convex with f(0) = 0."""
        assert profile.check_convexity()

    def test_power_exponent_guard(self):
        """Test that p <= 1 is rejected."""
        with pytest.raises(ValueError, match="must exceed 1"):
            power_law(1.0)

    def test_quadratic_guard(self):
        """Test that nu <= 0 is rejected."""
        with pytest.raises(ValueError, match="must be positive"):
            quadratic(0.0)

    def test_profile_from_name(self):
        """Test lookup of the named profiles."""
        assert profile_from_name("power", p=3.0).p == 3.0
        assert profile_from_name("quadratic", nu=0.5).name == "quadratic(nu=0.5)"
        assert profile_from_name("quartic").name == "quartic"

    def test_unknown_profile(self):
        """Test that unknown names are rejected."""
        with pytest.raises(ValueError, match="Unknown profile"):
            profile_from_name("cubic")


class TestSolveAmplitude:
    """Test cases for (k^2 - 1) f'(t) / (k t) = rho0."""

    def test_flagship_amplitude_is_one(self):
        """Test that quartic, k=2, rho0=1.5 gives t = 1."""
        assert solve_amplitude(quartic(), 2, 1.5) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("p", [3.0, 4.0, 6.0])
    @pytest.mark.parametrize("k", [2, 3, 5])
    @pytest.mark.parametrize("rho0", [0.3, 1.5, 40.0])
    def test_power_law_closed_form(self, p, k, rho0):
        """Test the bisection root against t = (k rho0 / (k^2 - 1))^(1/(p-2))."""
        t = solve_amplitude(power_law(p), k, rho0)
        expected = (k * rho0 / (k * k - 1)) ** (1.0 / (p - 2.0))
        assert t == pytest.approx(expected, rel=1e-10)
        assert amplitude_map(power_law(p), k, t) == pytest.approx(rho0, rel=1e-10)

    def test_quadratic_is_degenerate(self):
        """Test that the quadratic profile makes the amplitude map constant."""
        with pytest.raises(Degenerate, match="constant"):
            solve_amplitude(quadratic(1.0), 2, 1.5)

    def test_no_root(self):
        """Test that a bounded amplitude map raises NoRoot."""
        bounded = tabulated(
            "bounded",
            f=lambda t: np.sqrt(1.0 + np.asarray(t) ** 2) - 1.0,
            df=lambda t: np.asarray(t) / np.sqrt(1.0 + np.asarray(t) ** 2),
            d2f=lambda t: (1.0 + np.asarray(t) ** 2) ** -1.5,
        )
        # (k^2-1) f'(t)/(k t) < 3/2 for every t > 0 when k = 2
        with pytest.raises(NoRoot, match="does not cross"):
            solve_amplitude(bounded, 2, 5.0)

    def test_k_below_two(self):
        """Test that k < 2 is rejected."""
        with pytest.raises(ValueError, match="k >= 2"):
            solve_amplitude(quartic(), 1, 1.5)

    def test_rho0_positive(self):
        """Test that rho0 <= 0 is rejected."""
        with pytest.raises(ValueError, match="rho0 must be positive"):
            solve_amplitude(quartic(), 2, 0.0)
