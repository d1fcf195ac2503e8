"""
Integrals behind the uniqueness criterion for the k-covering map.

For u_bar = a R e_R(k theta) and a planar map u:

    J(u)            = int int u . e_R(k theta) dR dtheta        <= pi a r^2
    log_det(u)      = int ln R det grad u dx
    cof_pairing(u)  = int ln R cof grad u . grad u_bar dx
                    = a k r ln r oint u(r, .) . e_R(k theta) dtheta - a k J(u)

The last line is derived from the divergence-free rows of cof grad u; for maps
carrying u_bar's boundary trace its first term is 2 pi k a^2 r^2 ln r, the
printed form. Both the printed and the derived right sides are reported.

At a critical point u the Green identity ties the bulk stress pairing to a
boundary flux; with v = u and a p-homogeneous gamma (p != 2) it splits G(u)
into int gamma(grad u) dx and log_det(u).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from onehomog.errors import DimensionMismatch
from onehomog.homog import HomogMap, PolarMap, cartesian_gradient, det2, e_r
from onehomog.quadrature import PolarGrid, integrate, sample
from onehomog.spectral import RadialProfile
from onehomog.utils.logger import get_logger
from onehomog.variational import MapLike
from onehomog.weakform import d_gamma, pair

logger = get_logger(__name__)


def cof2(F: np.ndarray) -> np.ndarray:
    """Cofactor of 2 x 2 matrices: [[F22, -F21], [-F12, F11]]."""
    out = np.empty_like(F)
    out[..., 0, 0] = F[..., 1, 1]
    out[..., 0, 1] = -F[..., 1, 0]
    out[..., 1, 0] = -F[..., 0, 1]
    out[..., 1, 1] = F[..., 0, 0]
    return out


def _planar_grad(u: MapLike, grid: PolarGrid) -> np.ndarray:
    s = sample(u, grid)
    if s.value.shape[-1] != 2:
        raise DimensionMismatch(f"Planar map expected, got m={s.value.shape[-1]}")
    return s.grad


def radial_pairing(
    u: MapLike, k: int, a: float, grid: PolarGrid
) -> tuple[float, float]:
    """(J(u), pi a r^2 - J(u)) with J integrated against dR dtheta."""
    s = sample(u, grid)
    if s.value.shape[-1] != 2:
        raise DimensionMismatch(f"Planar map expected, got m={s.value.shape[-1]}")
    direction = np.stack([np.cos(k * s.theta), np.sin(k * s.theta)], axis=-1)
    J = integrate(np.sum(s.value * direction, axis=-1), grid, measure="dRdtheta")
    return J, np.pi * a * grid.r**2 - J


def log_det(u: MapLike, grid: PolarGrid) -> float:
    return integrate(det2(_planar_grad(u, grid)), grid, "logR")


def log_det_difference(u1: MapLike, u2: MapLike, grid: PolarGrid) -> float:
    """int ln R det grad(u1 - u2) dx."""
    return log_det(sample(u1, grid) - sample(u2, grid), grid)


def log_det_oracle(u_bar: HomogMap, r: float) -> float:
    """a^2 k pi (r^2 ln r - r^2 / 2): det grad u_bar = a^2 k times int ln R dx."""
    return u_bar.a**2 * u_bar.k * np.pi * (r * r * np.log(r) - 0.5 * r * r)


def log_det_printed(u_bar: HomogMap, r: float) -> float:
    return np.pi * u_bar.k * u_bar.a**2 * (2.0 * r * r * np.log(r) - r * r)


def boundary_pairing(u: PolarMap, k: int, a: float, grid: PolarGrid) -> float:
    """r ln r a k oint u(r, theta) . e_R(k theta) dtheta (periodic trapezoid)."""
    theta = grid.thetas
    value, _, _ = u.evaluate(np.full_like(theta, grid.r), theta)
    direction = np.stack([np.cos(k * theta), np.sin(k * theta)], axis=-1)
    loop = grid.d_theta * float(np.sum(np.sum(value * direction, axis=-1)))
    return grid.r * np.log(grid.r) * a * k * loop


@dataclass(frozen=True)
class CofPairing:
    value: float
    printed_rhs: float
    oracle_rhs: float

    @property
    def gap_vs_paper(self) -> float:
        return abs(self.value - self.printed_rhs)

    @property
    def gap_vs_oracle(self) -> float:
        return abs(self.value - self.oracle_rhs)


def cof_pairing(u: PolarMap, u_bar: HomogMap, grid: PolarGrid) -> CofPairing:
    grad_u = _planar_grad(u, grid)
    grad_bar = _planar_grad(u_bar, grid)
    value = integrate(pair(cof2(grad_u), grad_bar), grid, "logR")

    a, k, r = u_bar.a, u_bar.k, grid.r
    J, _ = radial_pairing(u, k, a, grid)
    printed = 2.0 * np.pi * k * a * a * r * r * np.log(r) - a * k * J
    oracle = boundary_pairing(u, k, a, grid) - a * k * J
    return CofPairing(value, printed, oracle)


def det_expansion_check(A: np.ndarray, B: np.ndarray) -> float:
    """max |det(A - B) - det A - det B + cof A . B| over stacked 2 x 2 pairs."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape or A.shape[-2:] != (2, 2):
        raise DimensionMismatch(
            f"Expected matching 2x2 stacks, got {A.shape}, {B.shape}"
        )
    gap = det2(A - B) - det2(A) - det2(B) + pair(cof2(A), B)
    return float(np.max(np.abs(gap)))


def cpe_sides(
    u: MapLike, u_bar: HomogMap, lam: float, grid: PolarGrid
) -> tuple[float, float]:
    """
    int ln R det grad(u - u_bar) dx against a k (J(u) - pi a r^2).

    The identity comes from dividing the coupling term of the stationarity
    system by lambda, so it carries no information at lambda = 0.
    """
    if lam == 0.0:
        raise ValueError("The log-det identity needs a non-zero coupling lambda")
    left = log_det_difference(u, u_bar, grid)
    _, slack = radial_pairing(u, u_bar.k, u_bar.a, grid)
    right = -u_bar.a * u_bar.k * slack
    return left, right


def cpe_identity_gap(
    u: MapLike, u_bar: HomogMap, lam: float, grid: PolarGrid
) -> float:
    left, right = cpe_sides(u, u_bar, lam, grid)
    return abs(left - right)


@dataclass(frozen=True)
class UniquenessReport:
    J: float
    bound: float
    slack: float
    log_det: float
    log_det_oracle: float
    log_det_printed: float
    cof_pairing: CofPairing
    cpe_gap: float


def uniqueness_report(
    u: PolarMap, u_bar: HomogMap, lam: float, grid: PolarGrid
) -> UniquenessReport:
    J, slack = radial_pairing(u, u_bar.k, u_bar.a, grid)
    report = UniquenessReport(
        J=J,
        bound=np.pi * u_bar.a * grid.r**2,
        slack=slack,
        log_det=log_det(u, grid),
        log_det_oracle=log_det_oracle(u_bar, grid.r),
        log_det_printed=log_det_printed(u_bar, grid.r),
        cof_pairing=cof_pairing(u, u_bar, grid),
        cpe_gap=cpe_identity_gap(u, u_bar, lam, grid),
    )
    if not np.isclose(report.log_det_printed, report.log_det_oracle):
        logger.warning(
            f"Printed log-det constant {report.log_det_printed:.12g} differs from "
            f"the direct evaluation {report.log_det_oracle:.12g}"
        )
    return report


# ---------------------------------------------------------------------------
# Splitting G at a critical point
# ---------------------------------------------------------------------------


def _stress(
    profile: RadialProfile, lam: float, F: np.ndarray, log_r: np.ndarray
) -> np.ndarray:
    return d_gamma(profile, F) + lam * log_r[..., None, None] * cof2(F)


def green_identity_sides(
    u: PolarMap,
    v: PolarMap,
    profile: RadialProfile,
    lam: float,
    grid: PolarGrid,
) -> tuple[float, float]:
    """
    int (D gamma(grad u) + lambda ln R cof grad u) . grad v dx against
    r oint (D gamma + lambda ln r cof)(grad u) . (v (x) e_R) dtheta.

    The sides agree for every smooth v exactly when u is a critical point of
    G on B_r. With v = u the left side is p int gamma + 2 lambda log_det for a
    p-homogeneous gamma.
    """
    grad_u = _planar_grad(u, grid)
    grad_v = _planar_grad(v, grid)
    bulk = integrate(pair(d_gamma(profile, grad_u), grad_v), grid)
    coupling = integrate(pair(cof2(grad_u), grad_v), grid, "logR")

    theta = grid.thetas
    R = np.full_like(theta, grid.r)
    _, d_r, d_tau = u.evaluate(R, theta)
    stress = _stress(profile, lam, cartesian_gradient(d_r, d_tau, theta), np.log(R))
    value, _, _ = v.evaluate(R, theta)
    flux = np.einsum("tij,ti,tj->t", stress, value, e_r(theta))
    return bulk + lam * coupling, grid.r * grid.d_theta * float(np.sum(flux))


@dataclass(frozen=True)
class EnergySplit:
    bulk: float
    log_det: float


def split_energy(
    total: float, boundary: float, p: float | None, lam: float
) -> EnergySplit:
    """
    Recover int gamma(grad u) and int ln R det grad u from G(u) and the
    boundary term of the Green identity at v = u.

    p int gamma + 2 lambda L = boundary and int gamma + lambda L = G solve for
    both integrals when gamma is p-homogeneous with p != 2 and lambda != 0.
    """
    if p is None or p == 2.0:
        raise ValueError(
            f"Splitting G needs a p-homogeneous gamma with p != 2, got {p}"
        )
    if lam == 0.0:
        raise ValueError("Splitting G needs a non-zero coupling lambda")
    bulk = (boundary - 2.0 * total) / (p - 2.0)
    return EnergySplit(bulk, (total - bulk) / lam)
