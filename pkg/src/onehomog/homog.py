"""
One-homogeneous maps u = R g(theta) and the closed-form planar maps around them.

Public surface:
    construct_solution(lam, profile, k, eig_index)   -> HomogMap
    covering_map(k, a) / identity_map()              -> HomogMap
    g_eval(u, theta)                                 -> (g, g', g'')
    gradient_polar(u, R, theta)                      -> m x 2 Cartesian gradient
    conservation_residual(u, n_theta)                -> sup | |g|^2+|g'|^2 - c^2 |
    strong_residual(u, profile, lam, n_theta)        -> sup of the strong residual
    jacobian(u, R, theta)                            -> det of the Cartesian gradient
    FourierMap / rotate_target(u, angle)             -> general and rotated maps
    conservation_terms(u, profile, lam, n_theta)     -> ConservationTerms
    lift_k(phi, k)                                   -> LiftedMap
    IdentityMap / RadialTwist / PerturbedMap         -> PlanarMapExpr

Every map implements ``evaluate(R, theta) -> (value, d_R, d_tau)`` where
``d_tau = (1/R) d/dtheta``; arrays broadcast over R and theta and carry the
target dimension m as their last axis.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Literal, Protocol

import numpy as np
from scipy import linalg

from onehomog.errors import DimensionMismatch, NoLinearSolution, ZeroGradient
from onehomog.spectral import (
    RadialProfile,
    SkewMatrix,
    SpectrumReport,
    neg_square_spectrum,
    solve_amplitude,
)
from onehomog.utils.logger import get_logger

logger = get_logger(__name__)

Triple = tuple[np.ndarray, np.ndarray, np.ndarray]


def e_r(theta: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def e_theta(theta: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    return np.stack([-np.sin(theta), np.cos(theta)], axis=-1)


def cartesian_gradient(
    d_r: np.ndarray, d_tau: np.ndarray, theta: np.ndarray
) -> np.ndarray:
    """grad u = u,_R (x) e_R + u,_tau (x) e_theta, shape (..., m, 2)."""
    return (
        d_r[..., :, None] * e_r(theta)[..., None, :]
        + d_tau[..., :, None] * e_theta(theta)[..., None, :]
    )


def broadcast_polar(
    R: np.ndarray | float, theta: np.ndarray | float
) -> tuple[np.ndarray, np.ndarray]:
    R_arr, theta_arr = np.broadcast_arrays(
        np.asarray(R, dtype=float), np.asarray(theta, dtype=float)
    )
    return R_arr, theta_arr


def det2(mats: np.ndarray) -> np.ndarray:
    return mats[..., 0, 0] * mats[..., 1, 1] - mats[..., 0, 1] * mats[..., 1, 0]


def h_norm(s: float) -> float:
    """h(s) = (s^2 + s^-2)^(1/2)."""
    return float(np.sqrt(s * s + 1.0 / (s * s)))


class PolarMap(Protocol):
    m: int

    def evaluate(self, R: np.ndarray, theta: np.ndarray) -> Triple: ...


class Bump(Protocol):
    m: int

    def evaluate(
        self, R: np.ndarray, theta: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]: ...


# ---------------------------------------------------------------------------
# One-homogeneous maps
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class HomogMap:
    """u(R, theta) = R (x cos k theta + y sin k theta)."""

    m: int
    k: int
    x: np.ndarray
    y: np.ndarray
    c: float
    t: float
    a: float
    branch: Literal["linear", "covering"]

    def evaluate(self, R: np.ndarray, theta: np.ndarray) -> Triple:
        R, theta = broadcast_polar(R, theta)
        g, gp, _ = g_eval(self, theta)
        return R[..., None] * g, g, gp

    def invariant_gaps(self) -> dict[str, float]:
        """Relative departures from |x| = |y|, x.y = 0 and c^2 = (1+k^2)|x|^2."""
        nx = float(np.linalg.norm(self.x))
        ny = float(np.linalg.norm(self.y))
        scale = max(nx * nx, np.finfo(float).tiny)
        gaps = {
            "norm": abs(nx - ny) / max(nx, np.finfo(float).tiny),
            "orthogonality": abs(float(self.x @ self.y)) / scale,
        }
        if self.branch == "covering":
            gaps["gradient_norm"] = abs(self.c**2 - (1 + self.k**2) * nx * nx) / (
                max(self.c**2, np.finfo(float).tiny)
            )
        else:
            gaps["gradient_norm"] = abs(self.c**2 - nx * nx - ny * ny) / max(
                self.c**2, np.finfo(float).tiny
            )
        return gaps


def _vector(values: np.ndarray) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


def covering_map(k: int, a: float | None = None) -> HomogMap:
    """u_bar = a R e_R(k theta), with a = k^(-1/2) unless given."""
    if a is None:
        a = k**-0.5
    c = a * np.sqrt(1.0 + k * k)
    return HomogMap(
        m=2,
        k=k,
        x=_vector([a, 0.0]),
        y=_vector([0.0, a]),
        c=float(c),
        t=float(c),
        a=float(a),
        branch="covering" if k > 1 else "linear",
    )


def identity_map() -> HomogMap:
    return covering_map(1, 1.0)


def construct_solution(
    lam: SkewMatrix,
    profile: RadialProfile,
    k: int,
    eig_index: int = 0,
    amplitude: float = 1.0,
    spectrum: SpectrumReport | None = None,
) -> HomogMap:
    """
    Build the stationary map for mode k.

    k >= 2 picks the ``eig_index``-th largest nonzero eigenvalue rho0^2 of
    -Lambda^2 with unit eigenvector v, solves the amplitude equation for t and
    sets x = t (1+k^2)^(-1/2) v, y = -Lambda x / rho0. k = 1 takes a unit
    kernel vector v of Lambda and sets x = y = amplitude v / sqrt(2).
    """
    if spectrum is None:
        spectrum = neg_square_spectrum(lam)

    if k == 1:
        if spectrum.kernel_dim == 0:
            raise NoLinearSolution(
                f"k=1 needs a non-trivial kernel of Lambda; m={lam.m} and Lambda "
                "is nonsingular"
            )
        # smallest right singular vector spans the kernel to working precision
        _, _, vh = linalg.svd(lam.matrix)
        v = vh[-1]
        x = amplitude / np.sqrt(2.0) * v
        logger.info(f"Linear branch: kernel dimension {spectrum.kernel_dim}")
        return HomogMap(
            m=lam.m,
            k=1,
            x=_vector(x),
            y=_vector(x),
            c=float(amplitude),
            t=float(amplitude),
            a=float(amplitude / np.sqrt(2.0)),
            branch="linear",
        )

    if k < 1:
        raise ValueError(f"Mode k must be a positive integer, got {k}")

    nonzero = spectrum.nonzero_indices()
    if nonzero.size == 0:
        raise ValueError("Covering branch requires a nonzero Lambda")
    if not 0 <= eig_index < nonzero.size:
        raise ValueError(
            f"eig_index {eig_index} out of range; -Lambda^2 has {nonzero.size} "
            "nonzero eigenvalues"
        )
    col = int(nonzero[eig_index])
    rho0 = float(np.sqrt(spectrum.eigenvalues[col]))
    v = spectrum.eigenvectors[:, col]

    t = solve_amplitude(profile, k, rho0)
    a = t / np.sqrt(1.0 + k * k)
    x = a * v
    # rho = -rho0 is the sign that annihilates the strong residual
    y = -(lam.matrix @ x) / rho0
    logger.info(
        f"Covering branch: k={k}, rho0={rho0:.12g}, t={t:.12g}, a={a:.12g}"
    )
    return HomogMap(
        m=lam.m,
        k=k,
        x=_vector(x),
        y=_vector(y),
        c=float(t),
        t=float(t),
        a=float(a),
        branch="covering",
    )


def g_eval(u: HomogMap, theta: np.ndarray | float) -> Triple:
    theta = np.asarray(theta, dtype=float)
    cos = np.cos(u.k * theta)[..., None]
    sin = np.sin(u.k * theta)[..., None]
    g = u.x * cos + u.y * sin
    gp = u.k * (u.y * cos - u.x * sin)
    gpp = -(u.k * u.k) * g
    return g, gp, gpp


def gradient_polar(
    u: PolarMap, R: np.ndarray | float, theta: np.ndarray | float
) -> np.ndarray:
    if np.any(np.asarray(R) <= 0):
        raise ValueError("gradient_polar needs R > 0")
    R, theta = broadcast_polar(R, theta)
    _, d_r, d_tau = u.evaluate(R, theta)
    return cartesian_gradient(d_r, d_tau, theta)


def fd_gradient(u: PolarMap, point: np.ndarray, h: float) -> np.ndarray:
    """Cartesian central differences of u at ``point``, shape (m, 2)."""

    def value(p: np.ndarray) -> np.ndarray:
        val, _, _ = u.evaluate(np.hypot(p[0], p[1]), np.arctan2(p[1], p[0]))
        return val

    point = np.asarray(point, dtype=float)
    cols = []
    for axis in range(2):
        step = np.zeros(2)
        step[axis] = h
        cols.append((value(point + step) - value(point - step)) / (2.0 * h))
    return np.stack(cols, axis=-1)


def _theta_samples(n_theta: int) -> np.ndarray:
    if n_theta < 8:
        raise ValueError(f"n_theta must be at least 8, got {n_theta}")
    return 2.0 * np.pi * np.arange(n_theta) / n_theta


def conservation_residual(u: HomogMap, n_theta: int = 1024) -> float:
    g, gp, _ = g_eval(u, _theta_samples(n_theta))
    energy = np.sum(g * g, axis=-1) + np.sum(gp * gp, axis=-1)
    return float(np.max(np.abs(energy - u.c * u.c)))


def strong_residual(
    u: HomogMap, profile: RadialProfile, lam: SkewMatrix, n_theta: int = 1024
) -> float:
    if u.c == 0.0:
        raise ZeroGradient("Strong residual divides by c = |grad u| = 0")
    if lam.m != u.m:
        raise DimensionMismatch(f"Lambda is {lam.m}x{lam.m} but the map has m={u.m}")
    g, gp, gpp = g_eval(u, _theta_samples(n_theta))
    coef = float(profile.df(np.asarray(u.c))) / u.c
    res = coef * (gpp + g) + gp @ lam.matrix.T
    return float(np.max(np.linalg.norm(res, axis=-1)))


def jacobian(
    u: PolarMap, R: np.ndarray | float, theta: np.ndarray | float
) -> np.ndarray | float:
    """det of the Cartesian gradient (m = 2 only)."""
    if u.m != 2:
        raise DimensionMismatch(f"Jacobian is defined for planar maps, got m={u.m}")
    det = det2(gradient_polar(u, R, theta))
    return float(det) if np.ndim(det) == 0 else det


# ---------------------------------------------------------------------------
# General one-homogeneous maps
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FourierMap:
    """
    u = R g(theta) with g(theta) = sum_n A_n cos(n theta) + B_n sin(n theta).

    Row n of ``cos_coeffs`` and ``sin_coeffs`` holds A_n and B_n. Any C^2
    profile on the circle is approximated this way; HomogMap is the one-mode
    case.
    """

    cos_coeffs: np.ndarray
    sin_coeffs: np.ndarray

    def __post_init__(self) -> None:
        if self.cos_coeffs.shape != self.sin_coeffs.shape or self.cos_coeffs.ndim != 2:
            raise DimensionMismatch(
                f"Fourier coefficients must be matching (modes, m) arrays, got "
                f"{self.cos_coeffs.shape} and {self.sin_coeffs.shape}"
            )

    @property
    def m(self) -> int:
        return int(self.cos_coeffs.shape[1])

    @classmethod
    def from_homog(cls, u: HomogMap) -> FourierMap:
        cos = np.zeros((u.k + 1, u.m))
        sin = np.zeros((u.k + 1, u.m))
        cos[u.k], sin[u.k] = u.x, u.y
        return cls(_vector(cos), _vector(sin))

    def with_mode(self, n: int, a: np.ndarray, b: np.ndarray) -> FourierMap:
        """Add a cos(n theta) + b sin(n theta) to g."""
        size = max(n + 1, self.cos_coeffs.shape[0])
        cos = np.zeros((size, self.m))
        sin = np.zeros((size, self.m))
        cos[: self.cos_coeffs.shape[0]] = self.cos_coeffs
        sin[: self.sin_coeffs.shape[0]] = self.sin_coeffs
        cos[n] += a
        sin[n] += b
        return FourierMap(_vector(cos), _vector(sin))

    def profile(self, theta: np.ndarray | float) -> Triple:
        """(g, g', g'') at ``theta``."""
        theta = np.asarray(theta, dtype=float)
        n = np.arange(self.cos_coeffs.shape[0], dtype=float)
        cos = np.cos(theta[..., None] * n)
        sin = np.sin(theta[..., None] * n)
        g = cos @ self.cos_coeffs + sin @ self.sin_coeffs
        gp = (n * cos) @ self.sin_coeffs - (n * sin) @ self.cos_coeffs
        gpp = -((n * n * cos) @ self.cos_coeffs + (n * n * sin) @ self.sin_coeffs)
        return g, gp, gpp

    def evaluate(self, R: np.ndarray, theta: np.ndarray) -> Triple:
        R, theta = broadcast_polar(R, theta)
        g, gp, _ = self.profile(theta)
        return R[..., None] * g, g, gp


def rotate_target(u: HomogMap, angle: float) -> HomogMap:
    """Q u for the planar rotation Q by ``angle``; G and det grad u are unchanged."""
    if u.m != 2:
        raise DimensionMismatch(f"Target rotation needs a planar map, got m={u.m}")
    Q = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
    return HomogMap(
        m=2,
        k=u.k,
        x=_vector(Q @ u.x),
        y=_vector(Q @ u.y),
        c=u.c,
        t=u.t,
        a=u.a,
        branch=u.branch,
    )


@dataclass(frozen=True)
class ConservationTerms:
    """Pointwise terms of the conservation argument on a theta sample."""

    P: np.ndarray
    dP: np.ndarray
    residual: np.ndarray
    bracket: np.ndarray
    g_prime: np.ndarray


def conservation_terms(
    u: FourierMap | HomogMap,
    profile: RadialProfile,
    lam: SkewMatrix,
    n_theta: int = 1024,
) -> ConservationTerms:
    """
    Terms of (z g')' + z g + Lambda g' = 0 with z(t) = f'(t)/t, t = |grad u|.

    P = |g|^2 + |g'|^2 = |grad u|^2. Dotting the residual with g' removes the
    skew term and leaves P'/2 times the bracket z + z'(t) |g'|^2 / t, which is
    positive when f'' > 0 and f'(0+) >= 0.
    """
    if lam.m != u.m:
        raise DimensionMismatch(f"Lambda is {lam.m}x{lam.m} but the map has m={u.m}")
    fourier = FourierMap.from_homog(u) if isinstance(u, HomogMap) else u
    g, gp, gpp = fourier.profile(_theta_samples(n_theta))
    P = np.sum(g * g, axis=-1) + np.sum(gp * gp, axis=-1)
    if np.min(P) <= 0.0:
        raise ZeroGradient("|grad u| vanishes on a ray; z(|grad u|) is undefined")
    dP = 2.0 * (np.sum(g * gp, axis=-1) + np.sum(gp * gpp, axis=-1))
    t = np.sqrt(P)
    z = profile.df(t) / t
    dz = (profile.d2f(t) - z) / t
    residual = (
        z[:, None] * (gpp + g)
        + (dz * dP / (2.0 * t))[:, None] * gp
        + gp @ lam.matrix.T
    )
    bracket = z + dz * np.sum(gp * gp, axis=-1) / t
    return ConservationTerms(P, dP, residual, bracket, gp)


def conservation_identity_gap(terms: ConservationTerms) -> float:
    """sup |residual . g' - P'/2 * bracket|; zero for every C^2 profile."""
    lhs = np.sum(terms.residual * terms.g_prime, axis=-1)
    return float(np.max(np.abs(lhs - 0.5 * terms.dP * terms.bracket)))


def residual_lower_bound(terms: ConservationTerms) -> float:
    """sup |P'/2 * bracket| / sup |g'|, a lower bound for sup |residual|."""
    speed = float(np.max(np.linalg.norm(terms.g_prime, axis=-1)))
    if speed == 0.0:
        return 0.0
    return float(np.max(np.abs(0.5 * terms.dP * terms.bracket))) / speed


def cartesian_coefficients(k: int, theta: np.ndarray | float) -> Triple:
    """Coefficients (l1, l2, l3) of the E Euler-Lagrange operator in x1, x2."""
    theta = np.asarray(theta, dtype=float)
    kk = k * k - 1.0
    cos, sin = np.cos(theta), np.sin(theta)
    return kk * cos**2 + 1.0, 2.0 * kk * sin * cos, kk * sin**2 + 1.0


# ---------------------------------------------------------------------------
# Planar closed-form maps
# ---------------------------------------------------------------------------


class PlanarMapExpr(ABC):
    """Closed-form planar map phi(R, theta) with analytic partials."""

    m: int = 2
    name: str = "planar"

    @abstractmethod
    def evaluate(self, R: np.ndarray, theta: np.ndarray) -> Triple:
        """Return (phi, phi,_R, phi,_tau) at broadcast (R, theta)."""

    def d_theta(self, R: np.ndarray, theta: np.ndarray) -> np.ndarray:
        R, theta = broadcast_polar(R, theta)
        _, _, d_tau = self.evaluate(R, theta)
        return R[..., None] * d_tau


class IdentityMap(PlanarMapExpr):
    name = "identity"

    def evaluate(self, R: np.ndarray, theta: np.ndarray) -> Triple:
        R, theta = broadcast_polar(R, theta)
        er = e_r(theta)
        return R[..., None] * er, er, e_theta(theta)


@dataclass(frozen=True)
class RadialTwist(PlanarMapExpr):
    """phi = R e_R(theta + s(R)), s(R) = s0 (support - R) R inside, 0 outside."""

    s0: float
    support: float

    @property
    def name(self) -> str:  # type: ignore[override]
        return f"twist(s0={self.s0:g})"

    def evaluate(self, R: np.ndarray, theta: np.ndarray) -> Triple:
        R, theta = broadcast_polar(R, theta)
        inside = R < self.support
        s = np.where(inside, self.s0 * (self.support - R) * R, 0.0)
        ds = np.where(inside, self.s0 * (self.support - 2.0 * R), 0.0)
        psi = theta + s
        er, et = e_r(psi), e_theta(psi)
        return R[..., None] * er, er + (R * ds)[..., None] * et, et


class PerturbedMap(PlanarMapExpr):
    """base + amplitude * bump, for any target dimension."""

    def __init__(self, base: PolarMap, bump: Bump, amplitude: float) -> None:
        if base.m != bump.m:
            raise DimensionMismatch(
                f"Base map has m={base.m} but the bump direction has m={bump.m}"
            )
        self.base = base
        self.bump = bump
        self.amplitude = amplitude
        self.m = base.m
        self.name = f"perturbed(amplitude={amplitude:g})"

    def evaluate(self, R: np.ndarray, theta: np.ndarray) -> Triple:
        R, theta = broadcast_polar(R, theta)
        value, d_r, d_tau = self.base.evaluate(R, theta)
        b_val, b_grad = self.bump.evaluate(R, theta)
        b_r = np.einsum("...ij,...j->...i", b_grad, e_r(theta))
        b_tau = np.einsum("...ij,...j->...i", b_grad, e_theta(theta))
        eps = self.amplitude
        return value + eps * b_val, d_r + eps * b_r, d_tau + eps * b_tau


class LiftedMap(PlanarMapExpr):
    """phi^(k)(R, theta) = phi(k^(-1/2) R, k theta)."""

    def __init__(self, base: PolarMap, k: int) -> None:
        if k < 1:
            raise ValueError(f"Lift index k must be a positive integer, got {k}")
        self.base = base
        self.k = k
        self.m = base.m
        self.name = f"lift{k}({getattr(base, 'name', 'map')})"

    def evaluate(self, R: np.ndarray, theta: np.ndarray) -> Triple:
        R, theta = broadcast_polar(R, theta)
        root = np.sqrt(self.k)
        value, d_r, d_tau = self.base.evaluate(R / root, self.k * theta)
        return value, d_r / root, root * d_tau


def lift_k(phi: PolarMap, k: int) -> LiftedMap:
    return LiftedMap(phi, k)
