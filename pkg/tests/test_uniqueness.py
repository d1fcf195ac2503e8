"""Tests for the integrals of the uniqueness criterion."""

import numpy as np
import pytest

from onehomog.errors import DimensionMismatch
from onehomog.homog import (
    PerturbedMap,
    construct_solution,
    covering_map,
    det2,
    rotate_target,
)
from onehomog.quadrature import Field, make_bump, make_polar_grid, sample
from onehomog.uniqueness import (
    boundary_pairing,
    cof2,
    cof_pairing,
    cpe_identity_gap,
    cpe_sides,
    det_expansion_check,
    green_identity_sides,
    log_det,
    log_det_difference,
    log_det_oracle,
    log_det_printed,
    radial_pairing,
    split_energy,
    uniqueness_report,
)
from onehomog.variational import energy_G
from onehomog.weakform import pair


def _log_moment(r: float) -> float:
    return np.pi * (r * r * np.log(r) - 0.5 * r * r)


@pytest.fixture
def wide_grid():
    """Geometric grid on B_2, where ln r does not vanish on the boundary."""
    return make_polar_grid(2.0, 64, 128, "geometric", 0.9)


class TestRadialPairing:
    """Test cases for J(u) = int int u . e_R(k theta) dR dtheta."""

    @pytest.mark.parametrize("factor, expected", [(1.0, 1.0), (-1.0, -1.0), (0.0, 0.0)])
    def test_multiples_of_u_bar(self, factor, expected, u_bar, wide_grid):
        """Test J(s u_bar) = s pi a r^2 and the matching slack."""
        u = sample(u_bar, wide_grid) * factor
        J, slack = radial_pairing(u, 2, u_bar.a, wide_grid)
        bound = np.pi * u_bar.a * 4.0
        assert J == pytest.approx(expected * bound, abs=1e-11)
        assert slack == pytest.approx(bound - expected * bound, abs=1e-11)

    def test_non_planar_rejected(self, grid):
        """Test that maps with m != 2 are rejected."""
        field = Field(grid, np.zeros((grid.n_r, grid.n_theta, 3)))
        with pytest.raises(DimensionMismatch, match="Planar map expected"):
            radial_pairing(field, 2, 0.5, grid)


class TestLogDet:
    """Test cases for int ln R det grad u dx."""

    @pytest.mark.parametrize("k", [2, 3])
    def test_covering_map_matches_oracle(self, k, wide_grid):
        """Test that u_bar's log-det integral is a^2 k times the log moment."""
        u = covering_map(k)
        assert log_det(u, wide_grid) == pytest.approx(
            log_det_oracle(u, 2.0), abs=1e-8
        )
        assert log_det_oracle(u, 2.0) == pytest.approx(u.a**2 * k * _log_moment(2.0))

    def test_printed_constant_is_doubled(self, u_bar):
        """Test that the printed closed form is twice the direct evaluation."""
        for r in (0.5, 1.0, 2.0):
            assert log_det_printed(u_bar, r) == pytest.approx(
                2.0 * log_det_oracle(u_bar, r)
            )

    def test_difference_of_equal_maps(self, u_bar, grid):
        """Test that the log-det of u - u vanishes."""
        assert log_det_difference(u_bar, u_bar, grid) == 0.0


class TestCofPairing:
    """Test cases for int ln R cof grad u . grad u_bar dx."""

    def test_cofactor_pairing_is_twice_det(self, rng):
        """Test cof F . F = 2 det F."""
        F = rng.normal(size=(6, 2, 2))
        np.testing.assert_allclose(pair(cof2(F), F), 2.0 * det2(F))

    def test_u_bar_matches_both_forms(self, u_bar, wide_grid):
        """Test that at u_bar the printed and the derived right sides agree."""
        result = cof_pairing(u_bar, u_bar, wide_grid)
        assert result.value == pytest.approx(2.0 * _log_moment(2.0), abs=1e-8)
        assert result.gap_vs_oracle <= 1e-8
        assert result.gap_vs_paper <= 1e-8

    def test_perturbation_keeps_trace(self, u_bar, wide_grid):
        """Test that an interior perturbation satisfies both forms."""
        bump = make_bump([0.8, 0.6], 0.5, 8, [1.0, -2.0], r=2.0)
        u = PerturbedMap(u_bar, bump, 0.3)
        result = cof_pairing(u, u_bar, wide_grid)
        assert result.gap_vs_oracle <= 1e-6
        assert result.gap_vs_paper <= 1e-6

    def test_other_trace_breaks_printed_form(self, u_bar, wide_grid):
        """Test that 2 u_bar satisfies only the derived form."""
        doubled = covering_map(2, 2.0 * u_bar.a)
        result = cof_pairing(doubled, u_bar, wide_grid)
        assert result.value == pytest.approx(4.0 * _log_moment(2.0), abs=1e-7)
        assert result.gap_vs_oracle <= 1e-7
        expected_gap = 2.0 * np.pi * 4.0 * np.log(2.0)
        assert result.gap_vs_paper == pytest.approx(expected_gap, rel=1e-8)

    def test_boundary_pairing_of_u_bar(self, u_bar, wide_grid):
        """Test r ln r a k oint u_bar . e_R(k theta) = 2 pi a^2 k r^2 ln r."""
        value = boundary_pairing(u_bar, 2, u_bar.a, wide_grid)
        assert value == pytest.approx(2.0 * np.pi * 4.0 * np.log(2.0), rel=1e-12)


class TestDetExpansion:
    """Test cases for det(A - B) = det A - cof A . B + det B."""

    def test_random_pairs(self, rng):
        """Test the expansion on random 2x2 stacks."""
        A = rng.normal(size=(1000, 2, 2))
        B = rng.normal(size=(1000, 2, 2))
        assert det_expansion_check(A, B) <= 1e-12

    def test_degenerate_pairs(self, rng):
        """Test the expansion for B = A and B = 0."""
        A = rng.normal(size=(50, 2, 2))
        assert det_expansion_check(A, A) <= 1e-12
        assert det_expansion_check(A, np.zeros_like(A)) == 0.0

    def test_shape_mismatch(self):
        """Test that non-matching or non-2x2 stacks are rejected."""
        with pytest.raises(DimensionMismatch, match="matching 2x2"):
            det_expansion_check(np.zeros((3, 2, 2)), np.zeros((2, 2, 2)))
        with pytest.raises(DimensionMismatch):
            det_expansion_check(np.zeros((3, 3)), np.zeros((3, 3)))


class TestCpeIdentity:
    """Test cases for the log-det form of the uniqueness identity."""

    def test_holds_at_u_bar(self, u_bar, grid):
        """Test that both sides vanish at u_bar."""
        left, right = cpe_sides(u_bar, u_bar, 1.5, grid)
        assert left == 0.0
        assert right == pytest.approx(0.0, abs=1e-12)
        assert cpe_identity_gap(u_bar, u_bar, 1.5, grid) <= 1e-12

    def test_zero_coupling_rejected(self, u_bar, grid):
        """Test that lambda = 0 is refused instead of giving a vacuous zero gap."""
        with pytest.raises(ValueError, match="non-zero coupling"):
            cpe_sides(u_bar, u_bar, 0.0, grid)
        with pytest.raises(ValueError):
            cpe_identity_gap(u_bar, u_bar, 0.0, grid)

    def test_sides_do_not_scale_with_lambda(self, u_bar, grid):
        """Test that the compared sides are the un-scaled integrals."""
        u = PerturbedMap(u_bar, make_bump([0.4, 0.1], 0.3, 8, [1.0, 2.0]), 0.2)
        small = cpe_sides(u, u_bar, 0.5, grid)
        large = cpe_sides(u, u_bar, 4.0, grid)
        assert small == large
        assert abs(small[1]) > 0.0


class TestGreenIdentity:
    """Test cases for the bulk and boundary sides at a critical point."""

    @pytest.fixture
    def critical(self, flagship_lambda, profile):
        """Flagship map: t = c = 1, a = 5^(-1/2), critical for lambda = 1.5."""
        return construct_solution(flagship_lambda, profile, 2)

    def test_sides_at_the_critical_map(self, critical, profile, grid):
        """Test that both sides equal p Gamma + 2 lambda L = 2 pi / 5 on B_1."""
        left, right = green_identity_sides(critical, critical, profile, 1.5, grid)
        assert right == pytest.approx(0.4 * np.pi, rel=1e-12)
        assert left == pytest.approx(right, rel=1e-10)

    def test_interior_perturbation_of_v(self, critical, profile):
        """Test that a compactly supported change of v leaves both sides equal."""
        fine = make_polar_grid(1.0, 128, 256, "geometric", 0.97)
        bump = make_bump([0.6, 0.0], 0.25, 8, [1.0, -1.0])
        v = PerturbedMap(critical, bump, 0.1)
        left, right = green_identity_sides(critical, v, profile, 1.5, fine)
        assert right == pytest.approx(0.4 * np.pi, rel=1e-12)
        assert left == pytest.approx(right, abs=1e-5)

    def test_non_critical_map_breaks_it(self, u_bar, profile, grid):
        """Test that a = 2^(-1/2) gives 4.75 pi against 2.5 pi."""
        left, right = green_identity_sides(u_bar, u_bar, profile, 1.5, grid)
        assert left == pytest.approx(4.75 * np.pi, rel=1e-10)
        assert right == pytest.approx(2.5 * np.pi, rel=1e-12)

    def test_rotated_map(self, critical, profile, grid):
        """Test the identity and the log-det at the target-rotated map."""
        rotated = rotate_target(critical, 0.7)
        left, right = green_identity_sides(rotated, rotated, profile, 1.5, grid)
        assert left == pytest.approx(right, rel=1e-10)
        assert log_det(rotated, grid) == pytest.approx(log_det(critical, grid))

    def test_boundary_log_term_on_wider_disc(self, flagship_lambda, profile):
        """Test the identity on B_2, where ln r enters the boundary stress."""
        critical = construct_solution(flagship_lambda, profile, 2)
        wide = make_polar_grid(2.0, 64, 128, "geometric", 0.9)
        left, right = green_identity_sides(critical, critical, profile, 1.5, wide)
        assert left == pytest.approx(right, rel=1e-10)


class TestSplitEnergy:
    """Test cases for recovering int gamma and the log-det from G."""

    def test_flagship_split(self, flagship_lambda, profile, grid):
        """Test bulk pi / 4 and log-det -pi / 5 on B_1."""
        critical = construct_solution(flagship_lambda, profile, 2)
        _, boundary = green_identity_sides(critical, critical, profile, 1.5, grid)
        total = energy_G(critical, profile, 1.5, grid).total
        split = split_energy(total, boundary, 4.0, 1.5)
        assert split.bulk == pytest.approx(np.pi / 4.0, rel=1e-10)
        assert split.log_det == pytest.approx(-np.pi / 5.0, rel=1e-10)
        assert split.log_det == pytest.approx(log_det_oracle(critical, 1.0), rel=1e-10)

    @pytest.mark.parametrize("p", [None, 2.0])
    def test_needs_p_other_than_two(self, p):
        """Test that a non-homogeneous or quadratic gamma is refused."""
        with pytest.raises(ValueError, match="p != 2"):
            split_energy(1.0, 1.0, p, 1.5)

    def test_needs_coupling(self):
        """Test that lambda = 0 is refused."""
        with pytest.raises(ValueError, match="non-zero coupling"):
            split_energy(1.0, 1.0, 4.0, 0.0)


class TestUniquenessReport:
    """Test cases for the collected uniqueness integrals."""

    def test_report_for_u_bar(self, u_bar, grid, caplog):
        """Test the report fields at u_bar and the printed-constant warning."""
        report = uniqueness_report(u_bar, u_bar, 1.5, grid)
        assert report.J == pytest.approx(report.bound, abs=1e-12)
        assert report.slack == pytest.approx(0.0, abs=1e-12)
        assert report.log_det == pytest.approx(report.log_det_oracle, abs=1e-8)
        assert report.log_det_printed == pytest.approx(2.0 * report.log_det_oracle)
        assert report.cpe_gap <= 1e-12
        assert "Printed log-det constant" in caplog.text
