"""
Skew coefficient matrices, the spectrum of -Lambda^2 and the amplitude equation.

Public surface:
    build_lambda(coeffs)                         -> SkewMatrix
    random_skew(m, rng)                          -> SkewMatrix
    neg_square_spectrum(lam)                     -> SpectrumReport
    solve_amplitude(profile, k, rho0)            -> t
    amplitude_map(profile, k, t)                 -> (k^2 - 1) f'(t) / (k t)
    power_law / quadratic / quartic / tabulated  -> RadialProfile
    profile_from_name(name, p, nu)               -> RadialProfile
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from onehomog.errors import Degenerate, IndexOutOfRange, NonConvergence, NoRoot
from onehomog.utils.logger import get_logger

logger = get_logger(__name__)

ScalarFn = Callable[[np.ndarray], np.ndarray]

TOL_ROOT = 1e-12
EIG_REL_TOL = 1e-12
JACOBI_MAX_SWEEPS = 60
BRACKET_LIMIT = 1e12
BISECTION_MAX_STEPS = 400


# ---------------------------------------------------------------------------
# Skew matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SkewCoefficients:
    """Upper-triangle coefficients lambda_ij, 1-based, of an m x m skew matrix."""

    m: int
    entries: Mapping[tuple[int, int], float] = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class SkewMatrix:
    m: int
    matrix: np.ndarray

    @property
    def norm_sq(self) -> float:
        """Squared Frobenius norm, the scale of every spectral tolerance."""
        return float(np.sum(self.matrix**2))

    @property
    def is_zero(self) -> bool:
        return not np.any(self.matrix)

    def scaled(self, factor: float) -> SkewMatrix:
        return SkewMatrix(self.m, _frozen(factor * self.matrix))


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


def build_lambda(coeffs: SkewCoefficients) -> SkewMatrix:
    """Place lambda_ij above the diagonal and mirror it with a sign flip."""
    if coeffs.m < 2:
        raise ValueError(f"Dimension m must be at least 2, got {coeffs.m}")

    lam = np.zeros((coeffs.m, coeffs.m))
    for (i, j), value in coeffs.entries.items():
        if not 1 <= i < j <= coeffs.m:
            raise IndexOutOfRange(
                f"Invalid coefficient index pair ({i},{j}) for m={coeffs.m}; "
                f"expected 1 <= i < j <= {coeffs.m}"
            )
        lam[i - 1, j - 1] = value
        lam[j - 1, i - 1] = -value

    if not np.any(lam):
        logger.warning(f"Lambda is the zero {coeffs.m}x{coeffs.m} matrix")
    return SkewMatrix(coeffs.m, _frozen(lam))


def random_skew(m: int, rng: np.random.Generator, scale: float = 1.0) -> SkewMatrix:
    upper = np.triu(rng.normal(0.0, scale, size=(m, m)), k=1)
    return SkewMatrix(m, _frozen(upper - upper.T))


# ---------------------------------------------------------------------------
# Spectrum of -Lambda^2
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SpectrumReport:
    """Eigen-decomposition of -Lambda^2, eigenvalues descending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    kernel_dim: int
    tol_eig: float
    sweeps: int

    def nonzero_indices(self) -> np.ndarray:
        return np.flatnonzero(self.eigenvalues > self.tol_eig)

    def kernel_vectors(self) -> np.ndarray:
        """Columns spanning the numerical kernel."""
        return self.eigenvectors[:, self.eigenvalues <= self.tol_eig]


def _off_norm(a: np.ndarray) -> float:
    return float(np.sqrt(np.sum(a**2) - np.sum(np.diag(a) ** 2)))


def _jacobi_eigh(
    sym: np.ndarray, max_sweeps: int = JACOBI_MAX_SWEEPS
) -> tuple[np.ndarray, np.ndarray, int]:
    """
    Cyclic Jacobi on a symmetric matrix.

    Rotates every off-diagonal pair (p, q) in row order per sweep until the
    off-diagonal Frobenius norm falls below 1e-15 of the total norm.
    """
    a = np.array(sym, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    total = float(np.linalg.norm(a))
    if total == 0.0:
        return np.zeros(n), v, 0

    target = 1e-15 * total
    for sweep in range(1, max_sweeps + 1):
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + np.hypot(1.0, tau))
                c = 1.0 / np.hypot(1.0, t)
                s = t * c
                # a <- J^T a J with J the (p, q) Givens rotation
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq

        off = _off_norm(a)
        logger.debug(f"Jacobi sweep {sweep}: off-diagonal norm {off:.3e}")
        if off <= target:
            return np.diag(a).copy(), v, sweep

    raise NonConvergence(
        f"Jacobi did not converge in {max_sweeps} sweeps "
        f"(off-diagonal norm {_off_norm(a):.3e})"
    )


def neg_square_spectrum(
    lam: SkewMatrix, max_sweeps: int = JACOBI_MAX_SWEEPS
) -> SpectrumReport:
    neg_sq = -(lam.matrix @ lam.matrix)
    neg_sq = 0.5 * (neg_sq + neg_sq.T)
    values, vectors, sweeps = _jacobi_eigh(neg_sq, max_sweeps)

    order = np.argsort(-values, kind="stable")
    values = values[order]
    vectors = vectors[:, order]

    tol_eig = EIG_REL_TOL * lam.norm_sq
    kernel_dim = int(np.sum(values <= tol_eig))
    logger.debug(
        f"Spectrum of -Lambda^2 (m={lam.m}): {np.array2string(values, precision=6)}, "
        f"kernel dim {kernel_dim}"
    )
    return SpectrumReport(
        eigenvalues=_frozen(values),
        eigenvectors=_frozen(vectors),
        kernel_dim=kernel_dim,
        tol_eig=tol_eig,
        sweeps=sweeps,
    )


# ---------------------------------------------------------------------------
# Radial profiles
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """gamma(F) = f(|F|), with f and its first two derivatives."""

    name: str
    f: ScalarFn
    df: ScalarFn
    d2f: ScalarFn
    p: float | None = None

    def check_convexity(self, t_max: float = 10.0, samples: int = 512) -> bool:
        t = np.linspace(t_max / samples, t_max, samples)
        f0 = float(np.asarray(self.f(np.zeros(1)))[0])
        return f0 == 0.0 and bool(np.all(self.d2f(t) > 0.0))


def power_law(p: float) -> RadialProfile:
    if p <= 1.0:
        raise ValueError(f"Power-law exponent must exceed 1, got {p}")
    return RadialProfile(
        name=f"power(p={p:g})",
        f=lambda t: np.asarray(t, dtype=float) ** p / p,
        df=lambda t: np.asarray(t, dtype=float) ** (p - 1.0),
        d2f=lambda t: (p - 1.0) * np.asarray(t, dtype=float) ** (p - 2.0),
        p=p,
    )


def quadratic(nu: float = 1.0) -> RadialProfile:
    """f(t) = nu t^2."""
    if nu <= 0.0:
        raise ValueError(f"Quadratic coefficient nu must be positive, got {nu}")
    return RadialProfile(
        name=f"quadratic(nu={nu:g})",
        f=lambda t: nu * np.asarray(t, dtype=float) ** 2,
        df=lambda t: 2.0 * nu * np.asarray(t, dtype=float),
        d2f=lambda t: np.full_like(np.asarray(t, dtype=float), 2.0 * nu),
        p=2.0,
    )


def quartic() -> RadialProfile:
    """f(t) = t^4 / 4."""
    profile = power_law(4.0)
    return RadialProfile("quartic", profile.f, profile.df, profile.d2f, p=4.0)


def tabulated(name: str, f: ScalarFn, df: ScalarFn, d2f: ScalarFn) -> RadialProfile:
    return RadialProfile(name=name, f=f, df=df, d2f=d2f)


PROFILE_NAMES = ("power", "quadratic", "quartic")


def profile_from_name(
    name: str, p: float | None = None, nu: float | None = None
) -> RadialProfile:
    if name == "power":
        return power_law(4.0 if p is None else p)
    if name == "quadratic":
        return quadratic(1.0 if nu is None else nu)
    if name == "quartic":
        return quartic()
    raise ValueError(
        f"Unknown profile: '{name}'. Expected one of {list(PROFILE_NAMES)}"
    )


# ---------------------------------------------------------------------------
# Amplitude equation
# ---------------------------------------------------------------------------


def amplitude_map(profile: RadialProfile, k: int, t: float) -> float:
    """Left side of the amplitude equation, (k^2 - 1) f'(t) / (k t)."""
    return float((k * k - 1) * profile.df(np.asarray(t)) / (k * t))


def _is_constant(profile: RadialProfile, k: int) -> bool:
    probes = [amplitude_map(profile, k, t) for t in (0.25, 0.5, 1.0, 2.0, 4.0)]
    ref = probes[2]
    return all(abs(v - ref) <= 1e-12 * max(abs(ref), 1.0) for v in probes)


def solve_amplitude(
    profile: RadialProfile, k: int, rho0: float, t_max: float = BRACKET_LIMIT
) -> float:
    """
    Solve (k^2 - 1) f'(t) / (k t) = rho0 for t > 0.

    Bisection on a bracket grown geometrically around t = 1 in both directions
    until the sign of the residual changes or ``[1/t_max, t_max]`` is
    exhausted.
    """
    if k < 2:
        raise ValueError(f"Amplitude equation needs k >= 2, got k={k}")
    if rho0 <= 0.0:
        raise ValueError(f"rho0 must be positive, got {rho0}")
    if _is_constant(profile, k):
        value = amplitude_map(profile, k, 1.0)
        raise Degenerate(
            f"Amplitude map of profile {profile.name} is constant ({value:.17g}) "
            f"for k={k}; every t solves when rho0 equals it, none otherwise"
        )

    def residual(t: float) -> float:
        return amplitude_map(profile, k, t) - rho0

    r_one = residual(1.0)
    if abs(r_one) <= TOL_ROOT * rho0:
        return 1.0

    lo = hi = None
    inner, outer = 1.0, 1.0
    while outer < t_max:
        prev_inner, prev_outer = inner, outer
        inner, outer = inner / 2.0, outer * 2.0
        if np.sign(residual(outer)) != np.sign(r_one):
            lo, hi = prev_outer, outer
            break
        if np.sign(residual(inner)) != np.sign(r_one):
            lo, hi = inner, prev_inner
            break
    if lo is None or hi is None:
        raise NoRoot(
            f"(k^2-1)f'(t)/(kt) does not cross rho0={rho0:.17g} on "
            f"[{1.0 / t_max:g}, {t_max:g}] for profile {profile.name}, k={k}"
        )
    logger.debug(f"Amplitude bracket [{lo:.6g}, {hi:.6g}] for rho0={rho0:.6g}")

    r_lo = residual(lo)
    mid = 0.5 * (lo + hi)
    for _ in range(BISECTION_MAX_STEPS):
        mid = 0.5 * (lo + hi)
        r_mid = residual(mid)
        if abs(r_mid) <= TOL_ROOT * rho0 or mid in (lo, hi):
            break
        if np.sign(r_mid) == np.sign(r_lo):
            lo, r_lo = mid, r_mid
        else:
            hi = mid
    return float(mid)
