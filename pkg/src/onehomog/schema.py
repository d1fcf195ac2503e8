"""
Scenario configuration: the line-oriented file format and its pydantic model.

    # comment
    [section]
    key = value

Sections and keys (every key has a default, so an empty file is the
flagship scenario: m=2, lambda_12=1.5, quartic profile, k=2):

  [scenario]    name, m, k, seed, eig_index, amplitude
  [lambda]      "i,j" = lambda_ij (1-based, i < j)
  [profile]     name (power | quadratic | quartic), p, nu
  [grid]        r, n_r, n_theta, layout (uniform | geometric), q, scale
  [battery]     count, q_s
  [tolerances]  one float per check family
  [probe]       nu, samples
  [minimize]    n_r, n_theta, inits, amplitude, tol, splits
  [compare]     p, s0 (comma-separated list)
  [meyers]      mu (comma-separated list), mismatch
  [output]      dir

Unknown sections and keys are rejected; diagnostics carry the line number.
"""

from __future__ import annotations

import re
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from onehomog.errors import ConfigError
from onehomog.quadrature import PolarGrid, make_polar_grid
from onehomog.spectral import (
    PROFILE_NAMES,
    RadialProfile,
    SkewCoefficients,
    profile_from_name,
)
from onehomog.utils.logger import get_logger

logger = get_logger(__name__)

_PAIR_KEY = re.compile(r"^\s*(\d+)\s*,\s*(\d+)\s*$")


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


def _split_list(value: Any) -> Any:
    """Comma-separated strings become lists; anything else passes through."""
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


class ScenarioSection(_Section):
    name: str = Field(default="flagship", min_length=1)
    m: int = Field(default=2, ge=2, le=32)
    k: int = Field(default=2, ge=1)
    seed: int = Field(default=42, ge=0, lt=2**64)
    eig_index: int = Field(default=0, ge=0)
    amplitude: float = Field(default=1.0, gt=0)


class ProfileSection(_Section):
    name: str = "quartic"
    p: float | None = Field(default=None, gt=1)
    nu: float | None = Field(default=None, gt=0)

    @field_validator("name")
    @classmethod
    def known_profile(cls, value: str) -> str:
        if value not in PROFILE_NAMES:
            raise ValueError(
                f"Unknown profile: '{value}'. Expected one of {list(PROFILE_NAMES)}"
            )
        return value


class GridSection(_Section):
    r: float = Field(default=1.0, gt=0)
    n_r: int = Field(default=256, ge=8)
    n_theta: int = Field(default=512, ge=16)
    layout: Literal["uniform", "geometric"] = "geometric"
    q: float = Field(default=0.97, gt=0, lt=1)
    scale: float = Field(default=1.0, gt=0)


class BatterySection(_Section):
    count: int = Field(default=20, ge=1)
    q_s: int = Field(default=8, ge=3)


class TolerancesSection(_Section):
    construction: float = 1e-10
    conservation: float = 1e-12
    kernel: float = 1e-12
    weak: float = 1e-6
    slope: float = 1.5
    probe: float = 1e-9
    jacobian: float = 1e-12
    quadrature: float = 1e-7
    meyers: float = 1e-5
    meyers_exact: float = 1e-10
    gradient: float = 1e-10
    distance: float = 1e-8
    energy: float = 1e-6
    split: float = 1e-6
    compare: float = 1e-8
    pairing: float = 1e-8
    expansion: float = 1e-12


class ProbeSection(_Section):
    nu: float = Field(default=1.0, gt=0)
    samples: int = Field(default=10_000, ge=1)


class MinimizeSection(_Section):
    n_r: int = Field(default=64, ge=8)
    n_theta: int = Field(default=128, ge=16)
    inits: int = Field(default=3, ge=1)
    amplitude: float = Field(default=0.5, ge=0)
    tol: float = Field(default=1e-12, gt=0)
    splits: int = Field(default=10, ge=0)


class CompareSection(_Section):
    p: float = Field(default=4.0, gt=1)
    s0: list[float] = Field(default_factory=lambda: [0.1, 0.2, 0.3, 0.4, 0.5])

    @field_validator("s0", mode="before")
    @classmethod
    def split_s0(cls, value: Any) -> Any:
        return _split_list(value)


class MeyersSection(_Section):
    mu: list[float] = Field(default_factory=lambda: [0.25, 0.5, 0.75, 1.0])
    mismatch: float = Field(default=0.6, gt=0, le=1)

    @field_validator("mu", mode="before")
    @classmethod
    def split_mu(cls, value: Any) -> Any:
        return _split_list(value)

    @field_validator("mu")
    @classmethod
    def mu_in_range(cls, values: list[float]) -> list[float]:
        for mu in values:
            if not 0.0 < mu <= 1.0:
                raise ValueError(f"mu must lie in (0, 1], got {mu}")
        return values


class OutputSection(_Section):
    dir: Path = Path("results")


class ScenarioConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)

    scenario: ScenarioSection = Field(default_factory=ScenarioSection)
    lambda_: dict[str, float] = Field(
        default_factory=lambda: {"1,2": 1.5}, alias="lambda"
    )
    profile: ProfileSection = Field(default_factory=ProfileSection)
    grid: GridSection = Field(default_factory=GridSection)
    battery: BatterySection = Field(default_factory=BatterySection)
    tolerances: TolerancesSection = Field(default_factory=TolerancesSection)
    probe: ProbeSection = Field(default_factory=ProbeSection)
    minimize: MinimizeSection = Field(default_factory=MinimizeSection)
    compare: CompareSection = Field(default_factory=CompareSection)
    meyers: MeyersSection = Field(default_factory=MeyersSection)
    output: OutputSection = Field(default_factory=OutputSection)

    @field_validator("lambda_")
    @classmethod
    def pair_keys(cls, values: dict[str, float]) -> dict[str, float]:
        for key in values:
            if not _PAIR_KEY.match(key):
                raise ValueError(f"Lambda key must look like 'i,j', got '{key}'")
        return values

    # -- derived objects ---------------------------------------------------

    def skew_coefficients(self) -> SkewCoefficients:
        entries: dict[tuple[int, int], float] = {}
        for key, value in self.lambda_.items():
            match = _PAIR_KEY.match(key)
            assert match is not None
            entries[(int(match.group(1)), int(match.group(2)))] = value
        return SkewCoefficients(self.scenario.m, entries)

    def radial_profile(self) -> RadialProfile:
        return profile_from_name(self.profile.name, self.profile.p, self.profile.nu)

    def polar_grid(self) -> PolarGrid:
        g = self.grid
        base = make_polar_grid(g.r, g.n_r, g.n_theta, g.layout, g.q)
        return base if g.scale == 1.0 else base.scaled(g.scale)

    def minimize_grid(self) -> PolarGrid:
        m = self.minimize
        base = make_polar_grid(self.grid.r, m.n_r, m.n_theta, "uniform")
        return base if self.grid.scale == 1.0 else base.scaled(self.grid.scale)

    def with_overrides(
        self,
        seed: int | None = None,
        out: Path | None = None,
        grid_scale: float | None = None,
    ) -> ScenarioConfig:
        """Apply command-line overrides, re-validating the touched sections."""
        data = self.model_dump(by_alias=True)
        if seed is not None:
            data["scenario"]["seed"] = seed
        if out is not None:
            data["output"]["dir"] = out
        if grid_scale is not None:
            data["grid"]["scale"] = grid_scale
        try:
            return ScenarioConfig.model_validate(data)
        except ValidationError as exc:
            raise ConfigError(_format_errors(exc, {})) from exc


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def _format_errors(
    exc: ValidationError, lines: dict[tuple[str, ...], int]
) -> str:
    messages = []
    for error in exc.errors():
        loc = tuple(str(part) for part in error["loc"])
        line = None
        for depth in range(len(loc), 0, -1):
            if loc[:depth] in lines:
                line = lines[loc[:depth]]
                break
        where = ".".join(loc)
        prefix = f"line {line}: " if line is not None else ""
        messages.append(f"{prefix}{where}: {error['msg']}")
    return "; ".join(messages)


def parse_config_text(text: str) -> ScenarioConfig:
    """Parse and validate the key=value scenario format."""
    data: dict[str, dict[str, str]] = {}
    lines: dict[tuple[str, ...], int] = {}
    section: str | None = None

    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or len(line) < 3:
                raise ConfigError(f"line {number}: malformed section header {raw!r}")
            section = line[1:-1].strip()
            if section in data:
                raise ConfigError(f"line {number}: duplicate section [{section}]")
            data[section] = {}
            lines[(section,)] = number
            continue
        if "=" not in line:
            raise ConfigError(f"line {number}: expected 'key = value', got {raw!r}")
        if section is None:
            raise ConfigError(f"line {number}: key outside of any [section]")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {number}: empty key")
        if key in data[section]:
            raise ConfigError(f"line {number}: duplicate key '{key}' in [{section}]")
        data[section][key] = value
        lines[(section, key)] = number

    try:
        config = ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc, lines)) from exc

    logger.debug(f"Parsed scenario '{config.scenario.name}' ({len(data)} sections)")
    return config


def load_config(path: Path | None) -> ScenarioConfig:
    if path is None:
        return ScenarioConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"Cannot read config file {path}: {exc}") from exc
    logger.info(f"Loading scenario config from {path}")
    return parse_config_text(text)
