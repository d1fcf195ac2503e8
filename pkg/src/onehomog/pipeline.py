"""
Verification suites

Each command builds the scenario described by a ScenarioConfig, runs one
family of checks and returns a RunReport:

  construct  Lambda, spectrum, amplitude, u_bar; pointwise identities
  verify     weak Euler-Lagrange forms, the log-weighted determinant identity
             and the hypothesis probe over a bump battery on two grids
  minimize   CG minimization of the discrete E from seeded inits
  compare    lifted competitors against the k-covering map
  meyers     the power-radial maps of the Meyers-type system
  unique     the integrals of the uniqueness criterion and the split of G
  suite      all of the above, in that order

When ``out_dir`` is given, each command also writes its sweep table and any
per-ring profiles there.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Callable

import numpy as np
import polars as pl

from onehomog.homog import (
    FourierMap,
    HomogMap,
    IdentityMap,
    PerturbedMap,
    PlanarMapExpr,
    conservation_identity_gap,
    conservation_residual,
    conservation_terms,
    construct_solution,
    covering_map,
    gradient_polar,
    h_norm,
    jacobian,
    lift_k,
    residual_lower_bound,
    rotate_target,
    strong_residual,
)
from onehomog.quadrature import (
    Field,
    PolarGrid,
    integrate,
    make_battery,
    make_polar_grid,
    sample,
)
from onehomog.report import CheckLog, RunReport, write_profile, write_sweep
from onehomog.schema import ScenarioConfig
from onehomog.spectral import (
    RadialProfile,
    SkewMatrix,
    SpectrumReport,
    amplitude_map,
    build_lambda,
    neg_square_spectrum,
    power_law,
    quadratic,
    random_skew,
)
from onehomog.uniqueness import (
    cof_pairing,
    cpe_identity_gap,
    det_expansion_check,
    green_identity_sides,
    log_det,
    log_det_difference,
    log_det_oracle,
    radial_pairing,
    split_energy,
    uniqueness_report,
)
from onehomog.utils.logger import get_logger
from onehomog.utils.rng import make_rng
from onehomog.variational import (
    DiscreteEnergy,
    circumference_bound,
    closed_form_split_gap,
    constrained_compare,
    discrete_distance,
    energy_E,
    energy_G,
    gradient_norm_bound,
    minimize_E,
    orthogonal_split_gap,
    twist_family,
)
from onehomog.weakform import (
    IntegrandSpec,
    MeyersCoefficients,
    cof_form_residual,
    e_weak_residual,
    frobenius,
    fs_identity_gap,
    homogeneity_gap,
    hypothesis_probe,
    meyers_residual,
    run_battery,
    self_adjointness_gap,
    weak_el_residual,
)

logger = get_logger(__name__)

CONSTANT_MODES = (2, 3, 5)
KERNEL_DIMENSIONS = (3, 5, 7)
CONSERVATION_MODES = (1, 3, 4)
EXPANSION_PAIRS = 10_000
LOG_RADII = (0.5, 1.0, 2.0)
ROTATION_ANGLE = 0.7


# ---------------------------------------------------------------------------
# Scenario
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Scenario:
    config: ScenarioConfig
    lam: SkewMatrix
    spectrum: SpectrumReport
    profile: RadialProfile
    u_bar: HomogMap

    @property
    def name(self) -> str:
        return self.config.scenario.name

    @property
    def seed(self) -> int:
        return self.config.scenario.seed

    @property
    def planar_lambda(self) -> float:
        """lambda_12, the scalar coupling of the planar suites."""
        return float(self.lam.matrix[0, 1]) if self.lam.m == 2 else 1.0

    def planar_covering(self) -> HomogMap:
        """u_bar itself when it is a planar covering map, else a R e_R(k theta)."""
        if self.u_bar.m == 2 and self.u_bar.branch == "covering":
            return self.u_bar
        return covering_map(self.planar_k)

    @property
    def planar_k(self) -> int:
        return max(self.config.scenario.k, 2)

    def echo(self) -> dict:
        return self.config.model_dump(mode="json", by_alias=True)


def build_scenario(config: ScenarioConfig) -> Scenario:
    """Lambda, its spectrum, the profile and u_bar; construction errors propagate."""
    sc = config.scenario
    logger.info(f"Building scenario '{sc.name}': m={sc.m}, k={sc.k}, seed={sc.seed}")
    lam = build_lambda(config.skew_coefficients())
    spectrum = neg_square_spectrum(lam)
    profile = config.radial_profile()
    u_bar = construct_solution(
        lam,
        profile,
        sc.k,
        eig_index=sc.eig_index,
        amplitude=sc.amplitude,
        spectrum=spectrum,
    )
    return Scenario(config, lam, spectrum, profile, u_bar)


def _finish(
    log: CheckLog, scenario: Scenario, out_dir: Path | None
) -> RunReport:
    if out_dir is not None:
        path = write_sweep(log.suite, scenario.name, log.records, out_dir)
        log.tables.append(path.name)
    return log.report(scenario.echo())


# ---------------------------------------------------------------------------
# construct
# ---------------------------------------------------------------------------


def _spectrum_checks(log: CheckLog, lam: SkewMatrix, spectrum: SpectrumReport) -> None:
    neg_sq = -(lam.matrix @ lam.matrix)
    V, sigma = spectrum.eigenvectors, spectrum.eigenvalues
    rebuilt = (V * sigma) @ V.T
    scale = max(lam.norm_sq, 1.0)
    log.at_most(
        "spectrum reconstruction",
        float(np.linalg.norm(rebuilt - neg_sq)) / scale,
        1e-10,
        "trivial",
    )
    log.at_least(
        "spectrum min eigenvalue", float(np.min(sigma)), -spectrum.tol_eig, "trivial"
    )
    if lam.m % 2 == 1:
        log.at_least("odd-m kernel dimension", spectrum.kernel_dim, 1, "paper")


def _amplitude_checks(log: CheckLog, scenario: Scenario) -> None:
    u = scenario.u_bar
    rho0 = float(np.linalg.norm(scenario.lam.matrix @ u.x)) / float(
        np.linalg.norm(u.x)
    )
    residual = abs(amplitude_map(scenario.profile, u.k, u.t) - rho0) / rho0
    log.at_most("amplitude equation", residual, 1e-12, "paper")
    p = scenario.profile.p
    if p is not None and p != 2.0:
        closed_form = (u.k * rho0 / (u.k * u.k - 1)) ** (1.0 / (p - 2.0))
        log.close("amplitude t", u.t, closed_form, 1e-12, "oracle", relative=True)


def _jacobian_checks(log: CheckLog, u: HomogMap, tol: float) -> None:
    theta = np.linspace(0.0, 2.0 * np.pi, 257)[:-1]
    dets = np.asarray(jacobian(u, 0.5, theta))
    expected = u.k * float(u.x[0] * u.y[1] - u.x[1] * u.y[0])
    scale = max(abs(expected), 1.0)
    log.at_most("jacobian constancy", float(np.ptp(dets)) / scale, tol, "paper")
    log.close("jacobian value", float(np.mean(dets)), expected, tol * scale, "oracle")


def _constant_checks(log: CheckLog, tol: float) -> None:
    R = np.linspace(0.05, 1.0, 20)[:, None]
    theta = np.linspace(0.0, 2.0 * np.pi, 65)[None, :-1]
    for k in CONSTANT_MODES:
        u = covering_map(k)
        dets = np.asarray(jacobian(u, R, theta))
        log.at_most(
            f"det grad u_bar = a^2 k (k={k})",
            float(np.max(np.abs(dets - u.a**2 * k))),
            tol,
            "oracle",
        )
        norms = frobenius(gradient_polar(u, R, theta))
        log.at_most(
            f"|grad u_bar| = h(k^1/2) (k={k})",
            float(np.max(np.abs(norms - h_norm(np.sqrt(k))))),
            tol,
            "oracle",
        )


def _kernel_checks(log: CheckLog, config: ScenarioConfig) -> None:
    rng = make_rng(config.scenario.seed, "skew")
    profile = config.radial_profile()
    for m in KERNEL_DIMENSIONS:
        lam = random_skew(m, rng)
        spectrum = neg_square_spectrum(lam)
        log.at_most(
            f"odd-m smallest eigenvalue (m={m})",
            float(np.min(spectrum.eigenvalues)),
            spectrum.tol_eig,
            "paper",
        )
        u = construct_solution(lam, profile, 1, spectrum=spectrum)
        log.at_most(
            f"linear branch strong residual (m={m})",
            strong_residual(u, profile, lam),
            config.tolerances.kernel,
            "paper",
        )


def _conservation_law_checks(log: CheckLog, scenario: Scenario) -> None:
    """
    u_bar plus one extra Fourier mode has non-constant |grad u|; the residual
    then stays bounded below by the drift of |grad u|^2.
    """
    u = scenario.u_bar
    profile, lam = scenario.profile, scenario.lam
    base = FourierMap.from_homog(u)
    at_u_bar = conservation_terms(u, profile, lam).residual
    log.close(
        "general strong residual at u_bar",
        float(np.max(np.linalg.norm(at_u_bar, axis=-1))),
        strong_residual(u, profile, lam),
        1e-12,
        "trivial",
    )
    rng = make_rng(scenario.seed, "modes")
    for n in CONSERVATION_MODES:
        if n == u.k:
            continue
        a, b = 0.1 * u.a / n * rng.normal(size=(2, u.m))
        terms = conservation_terms(base.with_mode(n, a, b), profile, lam)
        residual = float(np.max(np.linalg.norm(terms.residual, axis=-1)))
        bound = residual_lower_bound(terms)
        scale = max(1.0, float(np.max(np.abs(terms.dP * terms.bracket))))
        log.at_most(
            f"conservation identity (mode {n})",
            conservation_identity_gap(terms),
            1e-10 * scale,
            "oracle",
        )
        log.at_least(
            f"conservation bracket positive (mode {n})",
            float(np.min(terms.bracket)),
            np.finfo(float).tiny,
            "paper",
        )
        log.at_least(
            f"|grad u| drift forces a residual (mode {n})",
            residual,
            (1.0 - 1e-12) * bound,
            "paper",
            note=f"ptp |grad u|^2 = {float(np.ptp(terms.P)):.3e}",
        )
        log.at_least(
            f"residual lower bound positive (mode {n})",
            bound,
            np.finfo(float).tiny,
            "paper",
        )


def cmd_construct(config: ScenarioConfig, out_dir: Path | None = None) -> RunReport:
    log = CheckLog("construct")
    tol = config.tolerances
    scenario = build_scenario(config)
    u = scenario.u_bar

    _spectrum_checks(log, scenario.lam, scenario.spectrum)
    if u.branch == "covering":
        _amplitude_checks(log, scenario)
    log.at_most(
        "conservation residual", conservation_residual(u), tol.conservation, "paper"
    )
    log.at_most(
        "strong residual",
        strong_residual(u, scenario.profile, scenario.lam),
        tol.construction,
        "paper",
    )
    for name, gap in u.invariant_gaps().items():
        log.at_most(f"invariant {name}", gap, 1e-12, "trivial")
    if u.m == 2:
        _jacobian_checks(log, u, tol.jacobian)

    _constant_checks(log, tol.jacobian)
    _kernel_checks(log, config)
    _conservation_law_checks(log, scenario)
    return _finish(log, scenario, out_dir)


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def _battery_grids(config: ScenarioConfig) -> tuple[PolarGrid, PolarGrid]:
    grid = config.polar_grid()
    return grid, grid.refined()


def cmd_verify(config: ScenarioConfig, out_dir: Path | None = None) -> RunReport:
    log = CheckLog("verify")
    tol = config.tolerances
    scenario = build_scenario(config)
    u = scenario.u_bar
    grid, fine = _battery_grids(config)
    battery = make_battery(
        grid.r,
        u.m,
        make_rng(scenario.seed, "battery"),
        config.battery.count,
        config.battery.q_s,
    )
    spec = IntegrandSpec(scenario.profile, scenario.lam)

    lam_form = run_battery(
        "lambda-form",
        lambda g, phi: weak_el_residual(u, spec, phi, g),
        battery,
        grid,
        fine,
    )
    log.converges(
        "weak EL residual (Lambda form)",
        lam_form.max_coarse,
        lam_form.max_fine,
        tol.weak,
        tol.slope,
        "paper",
    )
    cof_form = run_battery(
        "cof-form",
        lambda g, phi: cof_form_residual(u, spec, phi, g),
        battery,
        grid,
        fine,
    )
    log.converges(
        "weak EL residual (cofactor form)",
        cof_form.max_coarse,
        cof_form.max_fine,
        tol.weak,
        tol.slope,
        "paper",
    )
    diff_coarse = np.max(np.abs(np.subtract(lam_form.coarse, cof_form.coarse)))
    diff_fine = np.max(np.abs(np.subtract(lam_form.fine, cof_form.fine)))
    log.converges(
        "Lambda form vs cofactor form",
        float(diff_coarse),
        float(diff_fine),
        tol.weak,
        tol.slope,
        "paper",
    )

    pairs = list(combinations(range(1, u.m + 1), 2))
    for i, j in pairs[:6]:
        fs = run_battery(
            f"fs-{i}{j}",
            lambda g, phi, ij=(i, j): fs_identity_gap(u, phi, ij, g),
            battery,
            grid,
            fine,
        )
        log.converges(
            f"log-weighted determinant identity ({i},{j})",
            fs.max_coarse,
            fs.max_fine,
            tol.weak,
            tol.slope,
            "paper",
        )

    _probe_checks(log, scenario)
    _diagnostics(log, scenario, battery, grid)
    return _finish(log, scenario, out_dir)


def _probe_checks(log: CheckLog, scenario: Scenario) -> None:
    cfg = scenario.config
    nu = cfg.probe.nu
    report = hypothesis_probe(
        quadratic(nu),
        scenario.lam,
        scenario.u_bar,
        make_rng(scenario.seed, "probe"),
        cfg.probe.samples,
        cfg.grid.r,
    )
    log.at_least(
        "H1 minimum rank-one ratio",
        report.h1_min_ratio,
        2.0 * nu - cfg.tolerances.probe,
        "paper",
    )
    log.flag("H2 largest stress jump ratio", report.h2_max_jump, None, "paper")
    if scenario.lam.m == 2:
        log.close(
            "H3 liminf of |R d_x D_F W|",
            report.h3_liminf,
            report.h3_expected,
            cfg.tolerances.probe,
            "oracle",
            note="nonzero: H3 fails while H1 holds",
        )
    else:
        log.flag("H3 liminf of |R d_x D_F W|", report.h3_liminf, None, "paper")


def _diagnostics(
    log: CheckLog, scenario: Scenario, battery: list, grid: PolarGrid
) -> None:
    u = scenario.u_bar
    phi = battery[0]
    perturbed = PerturbedMap(u, phi, 0.1)
    spec = IntegrandSpec(scenario.profile, scenario.lam)
    log.at_least(
        "negative control: perturbed u_bar",
        abs(weak_el_residual(perturbed, spec, phi, grid)),
        1e-3,
        "trivial",
        asserted=False,
    )
    nu = scenario.config.probe.nu
    log.at_most(
        "self-adjointness of the quadratic form",
        self_adjointness_gap(u, perturbed, quadratic(nu), grid),
        1e-10,
        "trivial",
    )
    p = scenario.profile.p
    if p is not None:
        F = sample(u, grid).grad
        scale = max(float(np.max(frobenius(F))) ** p, 1.0)
        log.at_most(
            "power-law homogeneity",
            homogeneity_gap(scenario.profile, F) / scale,
            1e-12,
            "trivial",
        )


# ---------------------------------------------------------------------------
# minimize
# ---------------------------------------------------------------------------


def cmd_minimize(config: ScenarioConfig, out_dir: Path | None = None) -> RunReport:
    log = CheckLog("minimize")
    tol = config.tolerances
    mcfg = config.minimize
    scenario = build_scenario(config)
    k = scenario.planar_k
    grid = config.minimize_grid()
    u_bar = covering_map(k)
    base = Field.from_map(u_bar, grid, "dirichlet")

    log.close(
        "E(u_bar) = 2 k pi r^2",
        energy_E(u_bar, k, config.polar_grid()).total,
        2.0 * k * np.pi * grid.r**2,
        tol.energy,
        "paper",
        relative=True,
    )

    start = minimize_E(grid, k, base, tol=mcfg.tol)
    log.at_most(
        "u_bar start: gradient norm", start.gradient_norm, tol.gradient, "trivial"
    )
    log.flag("u_bar start: iterations", float(start.iterations), None, "trivial")

    rng = make_rng(scenario.seed, "inits")
    outcomes = []
    for idx in range(mcfg.inits):
        noise = Field.zero_boundary_noise(grid, 2, mcfg.amplitude, rng)
        outcome = minimize_E(grid, k, base + noise, tol=mcfg.tol)
        outcomes.append(outcome)
        log.at_most(
            f"init {idx}: gradient norm", outcome.gradient_norm, tol.gradient, "trivial"
        )
        history = np.asarray(outcome.energy_history)
        increase = float(np.max(np.diff(history), initial=0.0))
        log.at_most(
            f"init {idx}: energy non-increasing",
            increase,
            1e-12 * max(history[0], 1.0),
            "trivial",
        )
        log.at_most(
            f"init {idx}: distance to CG solution from u_bar",
            discrete_distance(outcome.field, start.field),
            tol.distance,
            "paper",
        )
    for (i, a), (j, b) in combinations(enumerate(outcomes), 2):
        log.at_most(
            f"inits {i},{j}: pairwise distance",
            discrete_distance(a.field, b.field),
            tol.distance,
            "paper",
        )

    fine_grid = grid.refined()
    fine = minimize_E(
        fine_grid, k, Field.from_map(u_bar, fine_grid, "dirichlet"), tol=mcfg.tol
    )
    log.at_most(
        "distance to u_bar decreases under refinement",
        fine.distance,
        start.distance,
        "oracle",
        note=f"coarse={start.distance:.17g}",
    )

    _, split_grid = _battery_grids(config)
    # outer-ring half only: those supports stay clear of the graded cells
    split_bumps = make_battery(
        split_grid.r,
        2,
        make_rng(scenario.seed, "splits"),
        2 * mcfg.splits,
        config.battery.q_s,
    )[mcfg.splits :]
    for idx, phi in enumerate(split_bumps):
        split = closed_form_split_gap(u_bar, phi, mcfg.amplitude, k, split_grid)
        log.at_most(
            f"orthogonal split at u_bar {idx}",
            split.gap,
            tol.split * (1.0 + split.perturbation_energy),
            "paper",
        )

    energy = DiscreteEnergy(grid, k)
    noise_rng = make_rng(scenario.seed, "split-noise")
    for idx in range(mcfg.splits):
        v = Field.zero_boundary_noise(grid, 2, mcfg.amplitude, noise_rng)
        log.at_most(
            f"orthogonal split at the CG minimizer {idx}",
            orthogonal_split_gap(start.field, v, energy),
            tol.split * (1.0 + energy.energy(v.values)),
            "trivial",
        )
        log.flag(
            f"orthogonal split at nodal u_bar {idx} (finite-volume form)",
            orthogonal_split_gap(base, v, energy),
            None,
            "paper",
        )

    _e_weak_checks(log, scenario, start.field, k)

    if out_dir is not None:
        rings = pl.DataFrame(
            {
                "radius": grid.radii,
                "minimizer": energy.ring_energy(start.field.values),
                "u_bar_nodal": energy.ring_energy(base.values),
            }
        )
        log.tables.append(write_profile("minimize_rings", rings, out_dir).name)
    return _finish(log, scenario, out_dir)


def _e_weak_checks(
    log: CheckLog, scenario: Scenario, minimizer: Field, k: int
) -> None:
    config = scenario.config
    grid, fine = _battery_grids(config)
    battery = make_battery(
        grid.r,
        2,
        make_rng(scenario.seed, "battery"),
        config.battery.count,
        config.battery.q_s,
    )
    u_bar = covering_map(k)
    result = run_battery(
        "e-weak",
        lambda g, phi: e_weak_residual(u_bar, k, phi, g),
        battery,
        grid,
        fine,
    )
    log.converges(
        "E weak residual of u_bar",
        result.max_coarse,
        result.max_fine,
        config.tolerances.weak,
        config.tolerances.slope,
        "paper",
    )
    discrete = [
        abs(e_weak_residual(minimizer, k, phi, minimizer.grid)) for phi in battery
    ]
    log.at_most(
        "E weak residual of the discrete minimizer",
        float(max(discrete)),
        1e-8,
        "trivial",
    )


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------


def cmd_compare(config: ScenarioConfig, out_dir: Path | None = None) -> RunReport:
    log = CheckLog("compare")
    tol = config.tolerances.compare
    scenario = build_scenario(config)
    k = scenario.planar_k
    grid = config.polar_grid()
    profile = power_law(config.compare.p)
    twists = twist_family(config.compare.s0, grid.r, k)
    family: list[PlanarMapExpr] = [IdentityMap(), *twists]

    table = constrained_compare(family, profile, k, grid)
    for row in table.iter_rows(named=True):
        if row["competitor"] == "identity":
            log.close("identity lift: G gap", row["gap"], 0.0, tol, "trivial")
        else:
            log.at_least(f"{row['competitor']}: G gap", row["gap"], -tol, "paper")

    rng = make_rng(scenario.seed, "twist-points")
    R = grid.r * np.sqrt(rng.uniform(0.01, 1.0, 256))
    theta = rng.uniform(0.0, 2.0 * np.pi, 256)
    edge_theta = np.linspace(0.0, 2.0 * np.pi, 64, endpoint=False)
    edge_R = np.full_like(edge_theta, grid.r)
    for phi in family:
        lifted = lift_k(phi, k)
        dets = np.asarray(jacobian(lifted, R, theta))
        log.at_most(
            f"{phi.name}: lift keeps det = 1",
            float(np.max(np.abs(dets - 1.0))),
            1e-12,
            "paper",
        )
        boundary, _, _ = lifted.evaluate(edge_R, edge_theta)
        target, _, _ = covering_map(k).evaluate(edge_R, edge_theta)
        log.at_most(
            f"{phi.name}: lift carries the u_bar trace",
            float(np.max(np.abs(boundary - target))),
            1e-12,
            "trivial",
        )
        rings = circumference_bound(lifted, k, grid)
        log.at_least(
            f"{phi.name}: circumference ratio",
            float(rings["ratio"].min()),
            1.0 - tol,
            "paper",
        )
        lower, reference = gradient_norm_bound(lifted, covering_map(k), grid)
        log.flag(f"{phi.name}: int |grad phi^(k)|", lower, reference, "paper")
        if out_dir is not None:
            name = phi.name.replace("(", "_").replace(")", "").replace("=", "")
            log.tables.append(
                write_profile(f"circumference_{name}", rings, out_dir).name
            )

    if out_dir is not None:
        log.tables.append(write_profile("compare_energies", table, out_dir).name)
    return _finish(log, scenario, out_dir)


# ---------------------------------------------------------------------------
# meyers
# ---------------------------------------------------------------------------


def cmd_meyers(config: ScenarioConfig, out_dir: Path | None = None) -> RunReport:
    log = CheckLog("meyers")
    tol = config.tolerances
    scenario = build_scenario(config)
    grid, fine = _battery_grids(config)
    battery = make_battery(
        grid.r,
        2,
        make_rng(scenario.seed, "battery"),
        config.battery.count,
        config.battery.q_s,
    )
    theta = np.linspace(0.0, 2.0 * np.pi, 129)[:-1]
    mismatch = config.meyers.mismatch

    for mu in config.meyers.mu:
        coeffs = MeyersCoefficients(mu)
        a, b, c = coeffs.a(theta), coeffs.b(theta), coeffs.c(theta)
        log.at_most(
            f"mu={mu:g}: trace a + c = 1 + mu^2",
            float(np.max(np.abs(a + c - 1.0 - mu * mu))),
            1e-14,
            "trivial",
        )
        log.at_most(
            f"mu={mu:g}: ac - b^2 = mu^2",
            float(np.max(np.abs(a * c - b * b - mu * mu))),
            1e-14,
            "trivial",
        )

        matched = run_battery(
            f"meyers-{mu:g}",
            lambda g, phi, mu=mu: meyers_residual(mu, phi, g),
            battery,
            grid,
            fine,
        )
        if mu == 1.0:
            log.at_most(
                "mu=1: residual", matched.max_fine, tol.meyers_exact, "trivial"
            )
            continue
        log.converges(
            f"mu={mu:g}: residual",
            matched.max_coarse,
            matched.max_fine,
            tol.meyers,
            tol.slope,
            "paper",
        )
        if mu != mismatch:
            control = max(
                abs(meyers_residual(mu, phi, fine, coefficient_mu=mismatch))
                for phi in battery
            )
            log.at_least(
                f"mu={mu:g}: mismatched coefficients (mu'={mismatch:g})",
                control,
                10.0 * matched.max_fine,
                "oracle",
            )
    return _finish(log, scenario, out_dir)


# ---------------------------------------------------------------------------
# unique
# ---------------------------------------------------------------------------


def _log_integral_checks(log: CheckLog, config: ScenarioConfig) -> None:
    g = config.grid
    for r in LOG_RADII:
        grid = make_polar_grid(r, g.n_r, g.n_theta, g.layout, g.q)
        value = integrate(1.0, grid, "logR")
        expected = np.pi * (r * r * np.log(r) - 0.5 * r * r)
        log.close(
            f"int_B_{r:g} ln R dx",
            value,
            expected,
            config.tolerances.quadrature,
            "oracle",
            relative=True,
        )


def _splitting_checks(log: CheckLog, scenario: Scenario, grid: PolarGrid) -> None:
    """Green identity and the split of G at the scenario's own critical u_bar."""
    tol = scenario.config.tolerances
    u_bar = scenario.u_bar
    profile, lam = scenario.profile, scenario.planar_lambda
    bulk_side, boundary = green_identity_sides(u_bar, u_bar, profile, lam, grid)
    log.close(
        "Green identity at u_bar",
        bulk_side,
        boundary,
        tol.quadrature,
        "paper",
        relative=True,
    )
    phi = make_battery(grid.r, 2, make_rng(scenario.seed, "battery"), 2)[1]
    left, right = green_identity_sides(
        u_bar, PerturbedMap(u_bar, phi, 0.1), profile, lam, grid
    )
    log.close(
        "Green identity, interior perturbation of the test map",
        left,
        right,
        tol.pairing * max(abs(right), 1.0),
        "paper",
    )

    rotated = rotate_target(u_bar, ROTATION_ANGLE)
    left, right = green_identity_sides(rotated, rotated, profile, lam, grid)
    log.close(
        "Green identity at rotated u_bar",
        left,
        right,
        tol.quadrature,
        "paper",
        relative=True,
    )
    log.close(
        "log-det of rotated u_bar",
        log_det(rotated, grid),
        log_det(u_bar, grid),
        tol.quadrature,
        "paper",
        relative=True,
    )

    p = profile.p
    if p is None or p == 2.0:
        logger.info(f"Skipping the split of G: profile {profile.name} is not p != 2")
        return
    energy = energy_G(u_bar, profile, lam, grid)
    split = split_energy(energy.total, boundary, p, lam)
    log.close(
        "split of G, bulk term",
        split.bulk,
        energy.bulk,
        tol.quadrature,
        "paper",
        relative=True,
    )
    log.close(
        "split of G, log-det term",
        split.log_det,
        log_det_oracle(u_bar, grid.r),
        tol.quadrature,
        "oracle",
        relative=True,
    )


def cmd_unique(config: ScenarioConfig, out_dir: Path | None = None) -> RunReport:
    log = CheckLog("unique")
    tol = config.tolerances
    scenario = build_scenario(config)
    grid = config.polar_grid()
    u_bar = scenario.planar_covering()
    lam = scenario.planar_lambda
    a, k, r = u_bar.a, u_bar.k, grid.r
    bound = np.pi * a * r * r
    s_bar = sample(u_bar, grid)

    report = uniqueness_report(u_bar, u_bar, lam, grid)
    log.close(
        "J(u_bar) = pi a r^2", report.J, bound, tol.pairing, "paper", relative=True
    )
    _, slack = radial_pairing(s_bar * -1.0, k, a, grid)
    log.close(
        "slack(-u_bar) = 2 pi a r^2",
        slack,
        2.0 * bound,
        tol.pairing,
        "oracle",
        relative=True,
    )
    J_zero, slack_zero = radial_pairing(s_bar * 0.0, k, a, grid)
    log.close("J(0) = 0", J_zero, 0.0, tol.pairing, "trivial")
    log.close(
        "slack(0) = pi a r^2", slack_zero, bound, tol.pairing, "trivial", relative=True
    )

    log.close(
        "log-det of u_bar",
        report.log_det,
        report.log_det_oracle,
        tol.quadrature,
        "oracle",
        relative=True,
    )
    log.close(
        "log-det of u_bar (printed constant)",
        report.log_det,
        report.log_det_printed,
        tol.quadrature,
        "paper",
        relative=True,
        asserted=False,
    )
    _log_integral_checks(log, config)
    if scenario.planar_covering() is scenario.u_bar:
        _splitting_checks(log, scenario, grid)

    pairing = report.cof_pairing
    scale = max(abs(pairing.value), 1.0)
    log.close(
        "cofactor pairing of u_bar (derived)",
        pairing.value,
        pairing.oracle_rhs,
        tol.pairing * scale,
        "oracle",
    )
    log.close(
        "cofactor pairing of u_bar (printed)",
        pairing.value,
        pairing.printed_rhs,
        tol.pairing * scale,
        "paper",
        asserted=False,
    )
    doubled = cof_pairing(covering_map(k, 2.0 * a), u_bar, grid)
    log.close(
        "cofactor pairing is linear in u",
        doubled.value,
        2.0 * pairing.value,
        tol.pairing * scale,
        "trivial",
    )

    battery = make_battery(r, 2, make_rng(scenario.seed, "battery"), 4, 8)
    for idx, phi in enumerate(battery):
        candidate = PerturbedMap(u_bar, phi, 0.1)
        perturbed = cof_pairing(candidate, u_bar, grid)
        log.close(
            f"cofactor pairing, perturbed candidate {idx} (derived)",
            perturbed.value,
            perturbed.oracle_rhs,
            tol.pairing * max(abs(perturbed.value), 1.0),
            "oracle",
        )
        log.flag(
            f"CPE gap, perturbed candidate {idx}",
            cpe_identity_gap(candidate, u_bar, lam, grid),
            0.0,
            "paper",
            note="identity needs a critical point; reported only",
        )

    rng = make_rng(scenario.seed, "matrices")
    A = rng.normal(size=(EXPANSION_PAIRS, 2, 2))
    B = rng.normal(size=(EXPANSION_PAIRS, 2, 2))
    scale = float(np.max(np.abs(A)) * np.max(np.abs(B)))
    log.at_most(
        "determinant expansion, random pairs",
        det_expansion_check(A, B) / max(scale, 1.0),
        tol.expansion,
        "oracle",
    )
    log.at_most(
        "determinant expansion, B = A",
        det_expansion_check(A, A),
        tol.expansion,
        "trivial",
    )
    log.at_most(
        "determinant expansion, B = 0",
        det_expansion_check(A, np.zeros_like(A)),
        tol.expansion,
        "trivial",
    )

    log.at_most("CPE identity at u_bar", report.cpe_gap, tol.pairing, "paper")
    log.close(
        "log-det of u_bar - u_bar",
        log_det_difference(u_bar, u_bar, grid),
        0.0,
        tol.pairing,
        "paper",
    )
    return _finish(log, scenario, out_dir)


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------

Command = Callable[[ScenarioConfig, Path | None], RunReport]

COMMANDS: dict[str, Command] = {
    "construct": cmd_construct,
    "verify": cmd_verify,
    "minimize": cmd_minimize,
    "compare": cmd_compare,
    "meyers": cmd_meyers,
    "unique": cmd_unique,
}


def run_timed(
    name: str, config: ScenarioConfig, out_dir: Path | None = None
) -> tuple[RunReport, dict[str, float]]:
    """Run one command, or every command for ``suite``, with wall-clock timings."""
    names = list(COMMANDS) if name == "suite" else [name]
    if any(n not in COMMANDS for n in names):
        raise ValueError(
            f"Unknown command: '{name}'. Expected one of {[*COMMANDS, 'suite']}"
        )

    report: RunReport | None = None
    timings: dict[str, float] = {}
    for n in names:
        started = time.perf_counter()
        logger.info(f"Running {n} for scenario '{config.scenario.name}'")
        part = COMMANDS[n](config, out_dir)
        timings[n] = time.perf_counter() - started
        logger.info(
            f"Finished {n} in {timings[n]:.2f}s: {len(part.checks)} checks, "
            f"{len(part.failures)} failed"
        )
        report = part if report is None else report.merged(part)
    assert report is not None
    return report, timings


def cmd_suite(config: ScenarioConfig, out_dir: Path | None = None) -> RunReport:
    report, _ = run_timed("suite", config, out_dir)
    return report
