"""
Polar-grid quadrature, discrete fields and compactly supported test functions.

Public surface:
    make_polar_grid(r, n_r, n_theta, layout, q)   -> PolarGrid
    integrate(expr, grid, weight, measure)        -> float
    ring_sums(values, grid, weight, measure)      -> per-ring partial sums
    make_bump(center, s, q_s, direction, r)       -> TestFunction
    make_battery(r, m, rng, count, q_s)           -> list[TestFunction]
    sample(u, grid)                               -> PolarSample
    refinement_slope(coarse, fine, floor)         -> log2(coarse / fine) | None

Radial cells near the origin carry the exact moment of their weight
(R, R ln R, 1 or ln R). Uniform cells use the midpoint value of the weight plus
Euler-Maclaurin end corrections at both ends of the uniform zone, so integrands
vanishing near those ends keep the midpoint rule's super-convergence. The
angular rule is the periodic trapezoid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Callable, Literal, Sequence

import numpy as np
from scipy.special import xlogy

from onehomog.errors import BadLayout, DimensionMismatch, SupportEscapesDomain
from onehomog.homog import PolarMap, broadcast_polar, cartesian_gradient
from onehomog.utils.logger import get_logger

logger = get_logger(__name__)

Layout = Literal["uniform", "geometric"]
Weight = Literal["unit", "logR", "invR"]
Measure = Literal["dx", "dRdtheta"]

DEFAULT_N_R = 256
DEFAULT_N_THETA = 512
DEFAULT_Q = 0.97
SLOPE_FLOOR = 1e-12


# ---------------------------------------------------------------------------
# Grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PolarGrid:
    """Tensor-product cells on B_r: radial cells times uniform angular sectors."""

    r: float = 1.0
    n_r: int = DEFAULT_N_R
    n_theta: int = DEFAULT_N_THETA
    layout: Layout = "geometric"
    q: float = DEFAULT_Q
    theta_shift: float = 0.0

    def __post_init__(self) -> None:
        if self.r <= 0.0:
            raise BadLayout(f"Outer radius must be positive, got r={self.r}")
        if self.n_r < 8:
            raise BadLayout(f"n_r must be at least 8, got {self.n_r}")
        if self.n_theta < 16:
            raise BadLayout(f"n_theta must be at least 16, got {self.n_theta}")
        if self.layout not in ("uniform", "geometric"):
            raise BadLayout(
                f"Unknown layout: '{self.layout}'. Expected one of "
                "['uniform', 'geometric']"
            )
        if self.layout == "geometric" and not 0.0 < self.q < 1.0:
            raise BadLayout(f"Geometric ratio q must lie in (0, 1), got {self.q}")

    @cached_property
    def n_exact(self) -> int:
        """Number of innermost cells integrated with exact weight moments."""
        return self.n_r // 4 if self.layout == "geometric" else 1

    @cached_property
    def edges(self) -> np.ndarray:
        """
        Radial cell edges from 0 to r.

        The innermost cell is [0, h q^n_exact] and its node is the midpoint, so
        the first node is positive but can sit below r q^n_r; the origin itself
        is covered by that cell's exact weight moment, never sampled.
        """
        if self.layout == "uniform":
            return self.r * np.arange(self.n_r + 1) / self.n_r

        n_g = self.n_exact
        n_u = self.n_r - n_g
        q = self.q
        h = self.r / (n_u + q * (1.0 - q**n_g) / (1.0 - q))
        # graded widths h q^j, innermost first
        widths = h * q ** np.arange(n_g, 0, -1, dtype=float)
        graded = np.concatenate([[0.0], np.cumsum(widths)])
        r_g = graded[-1]
        uniform = r_g + (self.r - r_g) * np.arange(1, n_u + 1) / n_u
        return np.concatenate([graded, uniform])

    @cached_property
    def radii(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @cached_property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def h(self) -> float:
        """Width of the uniform radial cells."""
        return float(self.widths[-1])

    @property
    def d_theta(self) -> float:
        return 2.0 * np.pi / self.n_theta

    @cached_property
    def thetas(self) -> np.ndarray:
        return self.theta_shift + self.d_theta * np.arange(self.n_theta)

    @cached_property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """(R, theta), each of shape (n_r, n_theta)."""
        R, theta = np.meshgrid(self.radii, self.thetas, indexing="ij")
        return R, theta

    def radial_weights(
        self, weight: Weight = "unit", measure: Measure = "dx"
    ) -> np.ndarray:
        return _radial_weights(self, weight, measure)

    def scaled(self, factor: float) -> PolarGrid:
        """Scale both node counts; the geometric ratio keeps the graded extent."""
        if factor <= 0:
            raise BadLayout(f"Grid scale must be positive, got {factor}")
        return PolarGrid(
            r=self.r,
            n_r=int(round(self.n_r * factor)),
            n_theta=int(round(self.n_theta * factor)),
            layout=self.layout,
            q=self.q ** (1.0 / factor) if self.layout == "geometric" else self.q,
            theta_shift=self.theta_shift,
        )

    def refined(self) -> PolarGrid:
        return self.scaled(2.0)

    def rotated(self, shift: float) -> PolarGrid:
        return PolarGrid(self.r, self.n_r, self.n_theta, self.layout, self.q, shift)


def make_polar_grid(
    r: float = 1.0,
    n_r: int = DEFAULT_N_R,
    n_theta: int = DEFAULT_N_THETA,
    layout: Layout = "geometric",
    q: float = DEFAULT_Q,
) -> PolarGrid:
    grid = PolarGrid(r=r, n_r=n_r, n_theta=n_theta, layout=layout, q=q)
    logger.debug(
        f"Polar grid r={r:g}, {n_r}x{n_theta}, {layout}, "
        f"innermost node {grid.radii[0]:.3e}"
    )
    return grid


# Radial density, its antiderivative, first and third derivative.
_Density = tuple[
    Callable[[np.ndarray], np.ndarray],
    Callable[[np.ndarray], np.ndarray],
    Callable[[np.ndarray], np.ndarray],
    Callable[[np.ndarray], np.ndarray],
]

_DENSITIES: dict[tuple[str, str], _Density] = {
    ("dx", "unit"): (
        lambda R: R,
        lambda R: 0.5 * R**2,
        lambda R: np.ones_like(R),
        lambda R: np.zeros_like(R),
    ),
    ("dx", "logR"): (
        lambda R: xlogy(R, R),
        lambda R: 0.5 * xlogy(R**2, R) - 0.25 * R**2,
        lambda R: np.log(R) + 1.0,
        lambda R: -1.0 / R**2,
    ),
    ("dx", "invR"): (
        lambda R: np.ones_like(R),
        lambda R: R,
        lambda R: np.zeros_like(R),
        lambda R: np.zeros_like(R),
    ),
    ("dRdtheta", "unit"): (
        lambda R: np.ones_like(R),
        lambda R: R,
        lambda R: np.zeros_like(R),
        lambda R: np.zeros_like(R),
    ),
    ("dRdtheta", "logR"): (
        lambda R: np.log(R),
        lambda R: xlogy(R, R) - R,
        lambda R: 1.0 / R,
        lambda R: 2.0 / R**3,
    ),
}


@lru_cache(maxsize=64)
def _radial_weights(grid: PolarGrid, weight: str, measure: str) -> np.ndarray:
    if measure not in ("dx", "dRdtheta"):
        raise ValueError(
            f"Unknown measure: '{measure}'. Expected one of ['dx', 'dRdtheta']"
        )
    if weight not in ("unit", "logR", "invR"):
        raise ValueError(
            f"Unknown weight: '{weight}'. Expected one of ['unit', 'logR', 'invR']"
        )
    if (measure, weight) not in _DENSITIES:
        raise ValueError("The 1/R weight is not integrable against dR dtheta")

    density, antiderivative, d1, d3 = _DENSITIES[(measure, weight)]
    edges, radii = grid.edges, grid.radii
    n0 = grid.n_exact
    h = grid.h

    w = np.empty(grid.n_r)
    w[:n0] = antiderivative(edges[1 : n0 + 1]) - antiderivative(edges[:n0])
    w[n0:] = h * density(radii[n0:])

    a = np.asarray(edges[n0])
    b = np.asarray(edges[-1])
    w[n0] -= h**2 / 24.0 * d1(a) - 7.0 * h**4 / 5760.0 * d3(a)
    w[-1] += h**2 / 24.0 * d1(b) - 7.0 * h**4 / 5760.0 * d3(b)

    w *= grid.d_theta
    w.setflags(write=False)
    return w


# ---------------------------------------------------------------------------
# Integration
# ---------------------------------------------------------------------------

Integrand = np.ndarray | Callable[[np.ndarray, np.ndarray], np.ndarray]


def _node_values(expr: Integrand, grid: PolarGrid) -> np.ndarray:
    values = np.asarray(expr(*grid.mesh) if callable(expr) else expr, dtype=float)
    if values.ndim == 0:
        values = np.full((grid.n_r, grid.n_theta), float(values))
    if values.shape != (grid.n_r, grid.n_theta):
        raise DimensionMismatch(
            f"Integrand has shape {values.shape}, grid expects "
            f"{(grid.n_r, grid.n_theta)}"
        )
    return values


def ring_sums(
    expr: Integrand,
    grid: PolarGrid,
    weight: Weight = "unit",
    measure: Measure = "dx",
) -> np.ndarray:
    values = _node_values(expr, grid)
    return np.sum(values, axis=1) * grid.radial_weights(weight, measure)


def integrate(
    expr: Integrand,
    grid: PolarGrid,
    weight: Weight = "unit",
    measure: Measure = "dx",
) -> float:
    """
    Weighted cell sum of ``expr`` over B_r.

    ``expr`` is either an array of node values of shape (n_r, n_theta) or a
    callable evaluated on ``grid.mesh``. ``measure`` names the base measure:
    ``dx`` = R dR dtheta, ``dRdtheta`` without the R factor.
    """
    return float(np.sum(ring_sums(expr, grid, weight, measure)))


def refinement_slope(
    coarse: float, fine: float, floor: float = SLOPE_FLOOR
) -> float | None:
    """log2 of the error ratio between two grids; None once ``fine`` hits the floor."""
    if abs(fine) <= floor:
        return None
    return float(np.log2(abs(coarse) / abs(fine)))


# ---------------------------------------------------------------------------
# Test functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TestFunction:
    """phi = scale * (1 - d^2/s^2)^q_s * direction inside the support ball."""

    __test__ = False

    center: np.ndarray
    support: float
    q_s: int
    direction: np.ndarray
    scale: float = 1.0

    @property
    def m(self) -> int:
        return int(self.direction.shape[0])

    def profile(
        self, R: np.ndarray, theta: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """Scalar bump and its Cartesian gradient (..., 2)."""
        R, theta = broadcast_polar(R, theta)
        dx = R * np.cos(theta) - self.center[0]
        dy = R * np.sin(theta) - self.center[1]
        ratio = (dx * dx + dy * dy) / self.support**2
        base = np.clip(1.0 - ratio, 0.0, None)
        value = self.scale * base**self.q_s
        coef = -2.0 * self.scale * self.q_s * base ** (self.q_s - 1) / self.support**2
        return value, np.stack([coef * dx, coef * dy], axis=-1)

    def evaluate(
        self, R: np.ndarray, theta: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """(value (..., m), Cartesian gradient (..., m, 2))."""
        psi, grad = self.profile(R, theta)
        value = psi[..., None] * self.direction
        return value, self.direction[:, None] * grad[..., None, :]

    def scaled(self, factor: float) -> TestFunction:
        return TestFunction(
            self.center, self.support, self.q_s, self.direction, self.scale * factor
        )


@dataclass(frozen=True, eq=False)
class TestFunctionSum:
    """Linear combination of test functions sharing one target dimension."""

    __test__ = False

    terms: tuple[tuple[float, TestFunction], ...]

    @property
    def m(self) -> int:
        return self.terms[0][1].m

    def evaluate(
        self, R: np.ndarray, theta: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        value = grad = None
        for coef, phi in self.terms:
            v, g = phi.evaluate(R, theta)
            value = coef * v if value is None else value + coef * v
            grad = coef * g if grad is None else grad + coef * g
        assert value is not None and grad is not None
        return value, grad


def make_bump(
    center: Sequence[float] | np.ndarray,
    s: float,
    q_s: int = 4,
    direction: Sequence[float] | np.ndarray | None = None,
    r: float = 1.0,
) -> TestFunction:
    center_arr = np.array(center, dtype=float)
    if q_s < 3:
        raise ValueError(f"Bump smoothness q_s must be at least 3, got {q_s}")
    if s <= 0.0:
        raise ValueError(f"Bump support radius must be positive, got {s}")
    reach = float(np.hypot(center_arr[0], center_arr[1])) + s
    if reach >= r:
        raise SupportEscapesDomain(
            f"Bump at {center_arr.tolist()} with support {s:g} reaches R={reach:g}, "
            f"outside B_{r:g}"
        )
    dir_arr = np.array([1.0, 0.0] if direction is None else direction, dtype=float)
    dir_arr = dir_arr / np.linalg.norm(dir_arr)
    center_arr.setflags(write=False)
    dir_arr.setflags(write=False)
    return TestFunction(center_arr, float(s), int(q_s), dir_arr)


def make_battery(
    r: float, m: int, rng: np.random.Generator, count: int = 20, q_s: int = 8
) -> list[TestFunction]:
    """
    Bumps centred on the rings R = 0.3 r and R = 0.6 r, half on each.

    Inner supports lie in [0.10 r, 0.14 r], outer ones in [0.15 r, 0.25 r];
    angles and unit directions are drawn from ``rng``.
    """
    battery = []
    for idx in range(count):
        inner = idx < (count + 1) // 2
        ring = 0.3 * r if inner else 0.6 * r
        lo, hi = (0.10 * r, 0.14 * r) if inner else (0.15 * r, 0.25 * r)
        angle = rng.uniform(0.0, 2.0 * np.pi)
        s = rng.uniform(lo, hi)
        direction = rng.normal(size=m)
        center = ring * np.array([np.cos(angle), np.sin(angle)])
        battery.append(make_bump(center, s, q_s, direction, r))
    return battery


# ---------------------------------------------------------------------------
# Fields and samples
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Field:
    """Nodal values (n_r, n_theta, m); Dirichlet fields pin the outermost ring."""

    grid: PolarGrid
    values: np.ndarray
    boundary: Literal["free", "dirichlet"] = "free"
    trace: np.ndarray | None = field(default=None)

    def __post_init__(self) -> None:
        expected = (self.grid.n_r, self.grid.n_theta)
        if self.values.ndim != 3 or self.values.shape[:2] != expected:
            raise DimensionMismatch(
                f"Field values have shape {self.values.shape}, expected "
                f"{expected + ('m',)}"
            )
        if self.boundary == "dirichlet":
            if self.trace is None:
                object.__setattr__(self, "trace", self.values[-1].copy())
            elif not np.array_equal(self.values[-1], self.trace):
                raise ValueError("Dirichlet field does not match its trace")

    @property
    def m(self) -> int:
        return int(self.values.shape[-1])

    @classmethod
    def from_map(
        cls,
        u: PolarMap,
        grid: PolarGrid,
        boundary: Literal["free", "dirichlet"] = "free",
    ) -> Field:
        value, _, _ = u.evaluate(*grid.mesh)
        return cls(grid, np.array(value), boundary)

    @classmethod
    def zero_boundary_noise(
        cls, grid: PolarGrid, m: int, amplitude: float, rng: np.random.Generator
    ) -> Field:
        values = rng.uniform(-amplitude, amplitude, size=(grid.n_r, grid.n_theta, m))
        values[-1] = 0.0
        return cls(grid, values, "dirichlet")

    def with_values(self, values: np.ndarray) -> Field:
        """Same grid and boundary; a Dirichlet trace is re-imposed."""
        values = np.array(values, dtype=float)
        if self.boundary == "dirichlet" and self.trace is not None:
            values[-1] = self.trace
        return Field(self.grid, values, self.boundary, self.trace)

    def __add__(self, other: Field) -> Field:
        return _combine(self, other, 1.0)

    def __sub__(self, other: Field) -> Field:
        return _combine(self, other, -1.0)

    def __mul__(self, factor: float) -> Field:
        trace = None if self.trace is None else factor * self.trace
        return Field(self.grid, factor * self.values, self.boundary, trace)

    __rmul__ = __mul__


def _combine(a: Field, b: Field, sign: float) -> Field:
    if a.grid != b.grid or a.m != b.m:
        raise DimensionMismatch("Fields live on different grids or dimensions")
    values = a.values + sign * b.values
    if a.boundary == "dirichlet" and b.boundary == "dirichlet":
        assert a.trace is not None and b.trace is not None
        return Field(a.grid, values, "dirichlet", a.trace + sign * b.trace)
    return Field(a.grid, values, "free")


@dataclass(frozen=True, eq=False)
class PolarSample:
    """Values and polar partials of a map at every node of a grid."""

    R: np.ndarray
    theta: np.ndarray
    value: np.ndarray
    d_r: np.ndarray
    d_tau: np.ndarray

    @cached_property
    def grad(self) -> np.ndarray:
        return cartesian_gradient(self.d_r, self.d_tau, self.theta)

    def _apply(self, other: PolarSample, sign: float) -> PolarSample:
        return PolarSample(
            self.R,
            self.theta,
            self.value + sign * other.value,
            self.d_r + sign * other.d_r,
            self.d_tau + sign * other.d_tau,
        )

    def __add__(self, other: PolarSample) -> PolarSample:
        return self._apply(other, 1.0)

    def __sub__(self, other: PolarSample) -> PolarSample:
        return self._apply(other, -1.0)

    def __mul__(self, factor: float) -> PolarSample:
        return PolarSample(
            self.R,
            self.theta,
            factor * self.value,
            factor * self.d_r,
            factor * self.d_tau,
        )

    __rmul__ = __mul__


def _radial_stencil(radii: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Three-point Lagrange first-derivative weights at every radial node."""
    n = radii.shape[0]
    centre = np.clip(np.arange(n), 1, n - 2)
    idx = np.stack([centre - 1, centre, centre + 1], axis=-1)
    x = radii[idx]
    at = radii[:, None]
    weights = np.empty((n, 3))
    for j in range(3):
        others = [o for o in range(3) if o != j]
        num = (at[:, 0] - x[:, others[0]]) + (at[:, 0] - x[:, others[1]])
        den = (x[:, j] - x[:, others[0]]) * (x[:, j] - x[:, others[1]])
        weights[:, j] = num / den
    return idx, weights


def _sample_field(u: Field) -> PolarSample:
    grid = u.grid
    R, theta = grid.mesh
    idx, weights = _radial_stencil(grid.radii)
    d_r = np.einsum("ik,ikjm->ijm", weights, u.values[idx])
    d_theta = (np.roll(u.values, -1, axis=1) - np.roll(u.values, 1, axis=1)) / (
        2.0 * grid.d_theta
    )
    return PolarSample(R, theta, u.values, d_r, d_theta / R[..., None])


def sample(
    u: PolarMap | Field | PolarSample, grid: PolarGrid | None = None
) -> PolarSample:
    """
    Node values and polar partials of ``u``.

    Closed-form maps are evaluated analytically on ``grid``; fields use
    centred second-order stencils (one-sided at the first and last ring,
    periodic in theta).
    """
    if isinstance(u, PolarSample):
        return u
    if isinstance(u, Field):
        if grid is not None and grid != u.grid:
            raise DimensionMismatch("Field lives on a different grid")
        return _sample_field(u)
    if grid is None:
        raise ValueError("Sampling a closed-form map needs a grid")
    R, theta = grid.mesh
    value, d_r, d_tau = u.evaluate(R, theta)
    return PolarSample(R, theta, np.asarray(value), np.asarray(d_r), np.asarray(d_tau))
