"""
Weak Euler-Lagrange residuals, the log-weighted determinant identity,
hypothesis probes and the Meyers-type comparison system.

Every residual pairs a map (closed form, Field, or a PolarSample already taken
on the grid) with a TestFunction and returns the quadrature value of the left
side of the weak equation. For a stationary map it tends to zero under
refinement; batteries of bumps are evaluated through ``run_battery``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from onehomog.errors import DimensionMismatch, IndexOutOfRange
from onehomog.homog import (
    Bump,
    HomogMap,
    PlanarMapExpr,
    Triple,
    broadcast_polar,
    e_r,
    e_theta,
    gradient_polar,
)
from onehomog.quadrature import (
    Field,
    SLOPE_FLOOR,
    PolarGrid,
    PolarSample,
    TestFunction,
    integrate,
    refinement_slope,
    sample,
)
from onehomog.spectral import RadialProfile, SkewMatrix
from onehomog.utils.logger import get_logger
from onehomog.utils.parallel import map_ordered

logger = get_logger(__name__)


MapLike = PlanarMapExpr | HomogMap | Field | PolarSample


@dataclass(frozen=True, eq=False)
class IntegrandSpec:
    """W(x, F) = f(|F|) + sum_{i<j} lambda_ij ln|x| det F^(i,j)."""

    profile: RadialProfile
    lam: SkewMatrix

    @property
    def m(self) -> int:
        return self.lam.m

    @classmethod
    def planar(cls, profile: RadialProfile, lam: float) -> IntegrandSpec:
        return cls(profile, SkewMatrix(2, np.array([[0.0, lam], [-lam, 0.0]])))


# ---------------------------------------------------------------------------
# Stress terms
# ---------------------------------------------------------------------------


def frobenius(F: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(F * F, axis=(-2, -1)))


def pair(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Frobenius pairing A . B over the last two axes."""
    return np.sum(A * B, axis=(-2, -1))


def d_gamma(profile: RadialProfile, F: np.ndarray) -> np.ndarray:
    """D gamma(F) = f'(|F|) F / |F|, zero at F = 0."""
    norm = frobenius(F)
    safe = np.where(norm > 0.0, norm, 1.0)
    coef = np.where(norm > 0.0, profile.df(safe) / safe, 0.0)
    return coef[..., None, None] * F


def d2_gamma(profile: RadialProfile, F: np.ndarray, P: np.ndarray) -> np.ndarray:
    """D^2 gamma(F)[P, P]; at F = 0 the limit f''(0) |P|^2."""
    norm = frobenius(F)
    p_sq = pair(P, P)
    safe = np.where(norm > 0.0, norm, 1.0)
    along = pair(P, F) / safe
    curved = profile.d2f(norm) * along**2 + profile.df(safe) / safe * (p_sq - along**2)
    return np.where(norm > 0.0, curved, profile.d2f(np.zeros_like(norm)) * p_sq)


def dh_pair(F: np.ndarray, i: int, j: int) -> np.ndarray:
    """Derivative of the (i, j) minor det F^(i,j), zero-based rows."""
    G = np.zeros_like(F)
    G[..., i, 0] = F[..., j, 1]
    G[..., i, 1] = -F[..., j, 0]
    G[..., j, 0] = -F[..., i, 1]
    G[..., j, 1] = F[..., i, 0]
    return G


def coupling_stress(F: np.ndarray, lam: SkewMatrix) -> np.ndarray:
    """sum_{i<j} lambda_ij DH_ij(F); equals lambda cof F when m = 2."""
    if F.shape[-2] != lam.m:
        raise DimensionMismatch(
            f"Gradient has m={F.shape[-2]} rows but Lambda is {lam.m}x{lam.m}"
        )
    G = np.empty_like(F)
    G[..., :, 0] = F[..., :, 1] @ lam.matrix.T
    G[..., :, 1] = -(F[..., :, 0] @ lam.matrix.T)
    return G


def minors_sum(F: np.ndarray, lam: SkewMatrix) -> np.ndarray:
    """sum_{i<j} lambda_ij det F^(i,j)."""
    return 0.5 * pair(coupling_stress(F, lam), F)


# ---------------------------------------------------------------------------
# Euler-Lagrange residuals
# ---------------------------------------------------------------------------


def _checked_sample(u: MapLike, m: int, grid: PolarGrid) -> PolarSample:
    s = sample(u, grid)
    if s.value.shape[-1] != m:
        raise DimensionMismatch(
            f"Map has m={s.value.shape[-1]} but the integrand expects m={m}"
        )
    return s


def polar_test(phi: Bump, grid: PolarGrid) -> Triple:
    R, theta = grid.mesh
    value, grad = phi.evaluate(R, theta)
    d_r = np.einsum("...ij,...j->...i", grad, e_r(theta))
    d_tau = np.einsum("...ij,...j->...i", grad, e_theta(theta))
    return value, d_r, d_tau


def weak_el_residual(
    u: MapLike, spec: IntegrandSpec, phi: Bump, grid: PolarGrid
) -> float:
    """int D gamma(grad u) . grad phi - Lambda u,_tau . phi / R dx."""
    s = _checked_sample(u, spec.m, grid)
    value, grad = phi.evaluate(*grid.mesh)
    bulk = integrate(pair(d_gamma(spec.profile, s.grad), grad), grid)
    rotated = s.d_tau @ spec.lam.matrix.T
    twist = integrate(np.sum(rotated * value, axis=-1), grid, "invR")
    return bulk - twist


def cof_form_residual(
    u: MapLike, spec: IntegrandSpec, phi: Bump, grid: PolarGrid
) -> float:
    """int D gamma(grad u) . grad phi + ln R sum lambda_ij DH_ij(grad u) . grad phi."""
    s = _checked_sample(u, spec.m, grid)
    _, grad = phi.evaluate(*grid.mesh)
    bulk = integrate(pair(d_gamma(spec.profile, s.grad), grad), grid)
    coupling = integrate(pair(coupling_stress(s.grad, spec.lam), grad), grid, "logR")
    return bulk + coupling


def fs_identity_sides(
    u: MapLike, phi: Bump, pair_ij: tuple[int, int], grid: PolarGrid
) -> tuple[float, float]:
    """
    Both sides of int ln R DH_ij(grad u) . grad phi dx
    = int (u_i,_tau phi_j - u_j,_tau phi_i) / R dx, indices 1-based.
    """
    s = sample(u, grid)
    m = s.value.shape[-1]
    i, j = pair_ij
    if not 1 <= i < j <= m:
        raise IndexOutOfRange(
            f"Invalid index pair ({i},{j}) for m={m}; expected 1 <= i < j <= {m}"
        )
    if phi.m != m:
        raise DimensionMismatch(f"Test function has m={phi.m}, map has m={m}")
    i, j = i - 1, j - 1
    value, grad = phi.evaluate(*grid.mesh)
    lhs = integrate(pair(dh_pair(s.grad, i, j), grad), grid, "logR")
    rhs_integrand = s.d_tau[..., i] * value[..., j] - s.d_tau[..., j] * value[..., i]
    rhs = integrate(rhs_integrand, grid, "invR")
    return lhs, rhs


def fs_identity_gap(
    u: MapLike, phi: Bump, pair_ij: tuple[int, int], grid: PolarGrid
) -> float:
    lhs, rhs = fs_identity_sides(u, phi, pair_ij, grid)
    return abs(lhs - rhs)


def e_weak_residual(
    u: MapLike, k: int, phi: Bump, grid: PolarGrid
) -> float:
    """
    int u,_tau . phi,_tau + k^2 u,_R . phi,_R dx.

    Fields are paired through the discrete energy's bilinear form, so the
    residual is the transpose of the operator minimized by ``minimize_E``.
    """
    from onehomog.variational import DiscreteEnergy

    if isinstance(u, Field):
        if u.m != 2:
            raise DimensionMismatch(f"E is defined for planar maps, got m={u.m}")
        value, _ = phi.evaluate(*u.grid.mesh)
        return DiscreteEnergy(u.grid, k).bilinear(u.values, value)

    s = _checked_sample(u, 2, grid)
    _, phi_r, phi_tau = polar_test(phi, grid)
    integrand = np.sum(s.d_tau * phi_tau, axis=-1) + k * k * np.sum(
        s.d_r * phi_r, axis=-1
    )
    return integrate(integrand, grid)


def self_adjointness_gap(
    u: MapLike, v: MapLike, profile: RadialProfile, grid: PolarGrid
) -> float:
    """|int D gamma(grad u) . grad v - int D gamma(grad v) . grad u| dx."""
    su, sv = sample(u, grid), sample(v, grid)
    forward = integrate(pair(d_gamma(profile, su.grad), sv.grad), grid)
    backward = integrate(pair(d_gamma(profile, sv.grad), su.grad), grid)
    return abs(forward - backward)


def homogeneity_gap(profile: RadialProfile, F: np.ndarray) -> float:
    """max |D gamma(F) . F - p gamma(F)| for a power-law profile."""
    if profile.p is None:
        raise ValueError(f"Profile {profile.name} has no growth exponent p")
    gap = pair(d_gamma(profile, F), F) - profile.p * profile.f(frobenius(F))
    return float(np.max(np.abs(gap)))


# ---------------------------------------------------------------------------
# Hypotheses of the regularity theorem
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HypothesisReport:
    h1_min_ratio: float
    h2_max_jump: float
    h3_liminf: float
    h3_expected: float
    samples: int


def hypothesis_probe(
    profile: RadialProfile,
    lam: SkewMatrix,
    u_bar: HomogMap,
    rng: np.random.Generator,
    samples: int = 10_000,
    r: float = 1.0,
) -> HypothesisReport:
    """
    Sample the ellipticity, continuity and small-R conditions for W.

    H1 uses D^2 W[a(x)b, a(x)b] = D^2 gamma[a(x)b, a(x)b] + 2 ln R sum lambda_ij
    det (a(x)b)^(i,j); the determinants of rank-one matrices vanish. H3 uses
    |R d_x D_F W(x, F)| = |sum lambda_ij DH_ij(F)| evaluated on grad u_bar near
    the origin.
    """
    m = lam.m
    if u_bar.m != m:
        raise DimensionMismatch(f"u_bar has m={u_bar.m}, Lambda is {m}x{m}")

    R = r * np.sqrt(rng.uniform(1e-6, 1.0, samples))
    F = rng.normal(size=(samples, m, 2))
    a = rng.normal(size=(samples, m))
    b = rng.normal(size=(samples, 2))
    P = a[:, :, None] * b[:, None, :]
    second = d2_gamma(profile, F, P) + 2.0 * np.log(R) * minors_sum(P, lam)
    h1 = float(np.min(second / pair(P, P)))

    F2 = F + 1e-6 * rng.normal(size=F.shape)
    jump = frobenius(coupling_stress(F, lam) - coupling_stress(F2, lam))
    h2 = float(np.max(jump / frobenius(F - F2)))

    small_R = r * 1e-3 * rng.uniform(1e-3, 1.0, samples)
    theta = rng.uniform(0.0, 2.0 * np.pi, samples)
    grad = gradient_polar(u_bar, small_R, theta)
    h3 = float(np.min(frobenius(coupling_stress(grad, lam))))
    expected = h3
    if m == 2:
        grad_norm = float(np.linalg.norm(u_bar.x)) * np.sqrt(1.0 + u_bar.k**2)
        expected = abs(float(lam.matrix[0, 1])) * grad_norm

    logger.debug(f"Hypothesis probe: h1={h1:.12g}, h2={h2:.6g}, h3={h3:.12g}")
    return HypothesisReport(h1, h2, h3, expected, samples)


# ---------------------------------------------------------------------------
# Meyers-type system
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MeyersCoefficients:
    """A = e_R (x) e_R + mu^2 e_theta (x) e_theta in Cartesian components."""

    mu: float

    def __post_init__(self) -> None:
        if not 0.0 < self.mu <= 1.0:
            raise ValueError(f"mu must lie in (0, 1], got {self.mu}")

    def a(self, theta: np.ndarray) -> np.ndarray:
        return np.cos(theta) ** 2 + self.mu**2 * np.sin(theta) ** 2

    def b(self, theta: np.ndarray) -> np.ndarray:
        return (1.0 - self.mu**2) * np.sin(theta) * np.cos(theta)

    def c(self, theta: np.ndarray) -> np.ndarray:
        return np.sin(theta) ** 2 + self.mu**2 * np.cos(theta) ** 2

    def matrix(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        b = self.b(theta)
        return np.stack(
            [np.stack([self.a(theta), b], -1), np.stack([b, self.c(theta)], -1)], -2
        )


def meyers_coefficients(
    mu: float, point: Sequence[float] | np.ndarray
) -> tuple[float, float, float]:
    coeffs = MeyersCoefficients(mu)
    theta = float(np.arctan2(point[1], point[0]))
    return float(coeffs.a(theta)), float(coeffs.b(theta)), float(coeffs.c(theta))


class PowerRadialMap(PlanarMapExpr):
    """u_mu = R^mu e_R(theta)."""

    def __init__(self, mu: float) -> None:
        self.mu = mu
        self.name = f"power_radial(mu={mu:g})"

    def evaluate(self, R: np.ndarray, theta: np.ndarray) -> Triple:
        R, theta = broadcast_polar(R, theta)
        er, et = e_r(theta), e_theta(theta)
        scale = (R ** (self.mu - 1.0))[..., None]
        return R[..., None] * scale * er, self.mu * scale * er, scale * et


def meyers_residual(
    mu: float,
    phi: Bump,
    grid: PolarGrid,
    coefficient_mu: float | None = None,
) -> float:
    """
    int (grad u_mu A) . grad phi dx with A built from ``coefficient_mu``
    (defaults to mu, the matched system).
    """
    u = PowerRadialMap(mu)
    coeffs = MeyersCoefficients(mu if coefficient_mu is None else coefficient_mu)
    s = sample(u, grid)
    _, grad = phi.evaluate(*grid.mesh)
    stress = s.grad @ coeffs.matrix(s.theta)
    return integrate(pair(stress, grad), grid)


# ---------------------------------------------------------------------------
# Batteries
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BatteryResult:
    """Residuals of one weak form over a bump battery on a grid and its refinement."""

    name: str
    coarse: tuple[float, ...]
    fine: tuple[float, ...]
    slope: float | None

    @property
    def max_coarse(self) -> float:
        return float(np.max(np.abs(self.coarse)))

    @property
    def max_fine(self) -> float:
        return float(np.max(np.abs(self.fine)))


def run_battery(
    name: str,
    residual: Callable[[PolarGrid, TestFunction], float],
    battery: Sequence[TestFunction],
    grid: PolarGrid,
    fine_grid: PolarGrid,
    floor: float = SLOPE_FLOOR,
) -> BatteryResult:
    """Evaluate ``residual`` for every bump on both grids, in battery order."""
    coarse = map_ordered(lambda phi: residual(grid, phi), battery, desc=name)
    fine = map_ordered(lambda phi: residual(fine_grid, phi), battery, desc=name)
    max_c = float(np.max(np.abs(coarse)))
    max_f = float(np.max(np.abs(fine)))
    slope = refinement_slope(max_c, max_f, floor)
    logger.info(
        f"Battery {name}: max |residual| {max_c:.3e} -> {max_f:.3e}, slope "
        + ("below floor" if slope is None else f"{slope:.2f}")
    )
    return BatteryResult(name, tuple(coarse), tuple(fine), slope)
