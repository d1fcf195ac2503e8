"""
Run reports: check records, their verdicts and the files a run leaves behind.

    report.json       scenario echo, every check, overall status
    timings.json      wall-clock seconds per suite (kept out of report.json)
    sweep_<name>.csv  one row per check of a sweep
    profile_<name>.csv per-ring tables for external plotting

report.json is written with sorted keys and two-space indent, and non-finite
floats become the strings "nan", "inf" and "-inf", so two runs with the same
config and seed produce identical bytes.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Literal

import polars as pl
from pydantic import BaseModel, ConfigDict, Field

from onehomog.quadrature import SLOPE_FLOOR, refinement_slope
from onehomog.utils.logger import get_logger

logger = get_logger(__name__)

Provenance = Literal["paper", "oracle", "trivial"]

SWEEP_COLUMNS = (
    "scenario",
    "check",
    "value",
    "reference",
    "provenance",
    "tolerance",
    "pass",
    "slope",
)


class CheckRecord(BaseModel):
    """One verdict: a computed value against a reference within a tolerance."""

    model_config = ConfigDict(frozen=True)

    suite: str
    name: str
    value: float
    reference: float | None = None
    provenance: Provenance
    tolerance: float | None = None
    passed: bool
    slope: float | None = None
    asserted: bool = True
    note: str = ""


class RunReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    scenario: dict[str, Any]
    checks: list[CheckRecord] = Field(default_factory=list)
    tables: list[str] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        """AND over asserted checks; diagnostics never fail a run."""
        return all(check.passed for check in self.checks if check.asserted)

    @property
    def failures(self) -> list[CheckRecord]:
        return [c for c in self.checks if c.asserted and not c.passed]

    def merged(self, other: RunReport) -> RunReport:
        return RunReport(
            scenario=self.scenario,
            checks=[*self.checks, *other.checks],
            tables=[*self.tables, *other.tables],
        )

    def to_document(self) -> dict[str, Any]:
        document = self.model_dump(mode="python")
        document["status"] = "pass" if self.passed else "fail"
        document["asserted"] = sum(1 for c in self.checks if c.asserted)
        document["failed"] = len(self.failures)
        return document


# ---------------------------------------------------------------------------
# Collecting checks
# ---------------------------------------------------------------------------


class CheckLog:
    """Collects the checks of one suite and logs each verdict as it lands."""

    def __init__(self, suite: str) -> None:
        self.suite = suite
        self.records: list[CheckRecord] = []
        self.tables: list[str] = []

    def _add(self, record: CheckRecord) -> CheckRecord:
        self.records.append(record)
        verdict = "PASS" if record.passed else "FAIL"
        message = (
            f"[{self.suite}] {record.name}: {verdict} value={record.value:.6e}"
            + ("" if record.reference is None else f" reference={record.reference:.6e}")
            + ("" if record.slope is None else f" slope={record.slope:.2f}")
        )
        if record.passed:
            logger.info(message)
        elif record.asserted:
            logger.error(message)
        else:
            logger.warning(f"{message} (diagnostic)")
        return record

    def close(
        self,
        name: str,
        value: float,
        reference: float,
        tolerance: float,
        provenance: Provenance,
        relative: bool = False,
        asserted: bool = True,
        note: str = "",
    ) -> CheckRecord:
        """|value - reference| <= tolerance, scaled by |reference| when relative."""
        scale = max(abs(reference), 1e-300) if relative else 1.0
        passed = bool(
            math.isfinite(value) and abs(value - reference) <= tolerance * scale
        )
        return self._add(
            CheckRecord(
                suite=self.suite,
                name=name,
                value=float(value),
                reference=reference,
                provenance=provenance,
                tolerance=tolerance,
                passed=passed,
                asserted=asserted,
                note=note,
            )
        )

    def at_most(
        self,
        name: str,
        value: float,
        bound: float,
        provenance: Provenance,
        asserted: bool = True,
        note: str = "",
    ) -> CheckRecord:
        passed = bool(math.isfinite(value) and value <= bound)
        return self._add(
            CheckRecord(
                suite=self.suite,
                name=name,
                value=float(value),
                reference=bound,
                provenance=provenance,
                tolerance=None,
                passed=passed,
                asserted=asserted,
                note=note,
            )
        )

    def at_least(
        self,
        name: str,
        value: float,
        bound: float,
        provenance: Provenance,
        asserted: bool = True,
        note: str = "",
    ) -> CheckRecord:
        passed = bool(math.isfinite(value) and value >= bound)
        return self._add(
            CheckRecord(
                suite=self.suite,
                name=name,
                value=float(value),
                reference=bound,
                provenance=provenance,
                tolerance=None,
                passed=passed,
                asserted=asserted,
                note=note,
            )
        )

    def converges(
        self,
        name: str,
        coarse: float,
        fine: float,
        tolerance: float,
        min_slope: float,
        provenance: Provenance,
        floor: float = SLOPE_FLOOR,
        asserted: bool = True,
    ) -> CheckRecord:
        """
        Fine-grid magnitude within ``tolerance`` and, above the floor, a
        refinement slope of at least ``min_slope``.
        """
        slope = refinement_slope(coarse, fine, floor)
        passed = bool(abs(fine) <= tolerance and (slope is None or slope >= min_slope))
        return self._add(
            CheckRecord(
                suite=self.suite,
                name=name,
                value=float(abs(fine)),
                reference=0.0,
                provenance=provenance,
                tolerance=tolerance,
                passed=passed,
                slope=slope,
                asserted=asserted,
                note=f"coarse={abs(coarse):.17g}",
            )
        )

    def flag(
        self,
        name: str,
        value: float,
        reference: float | None,
        provenance: Provenance,
        note: str = "",
    ) -> CheckRecord:
        """A reported number with no verdict attached."""
        return self._add(
            CheckRecord(
                suite=self.suite,
                name=name,
                value=float(value),
                reference=reference,
                provenance=provenance,
                passed=True,
                asserted=False,
                note=note,
            )
        )

    def report(self, scenario: dict[str, Any]) -> RunReport:
        return RunReport(scenario=scenario, checks=self.records, tables=self.tables)


# ---------------------------------------------------------------------------
# Writers
# ---------------------------------------------------------------------------


def _finite_or_text(obj: Any) -> Any:
    if isinstance(obj, float) and not math.isfinite(obj):
        return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {str(k): _finite_or_text(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite_or_text(v) for v in obj]
    if isinstance(obj, Path):
        return obj.as_posix()
    return obj


def dump_json(document: dict[str, Any]) -> str:
    return (
        json.dumps(_finite_or_text(document), sort_keys=True, indent=2, allow_nan=False)
        + "\n"
    )


def write_report(report: RunReport, out_dir: Path) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "report.json"
    path.write_text(dump_json(report.to_document()), encoding="utf-8")
    logger.info(
        f"Wrote {path} ({len(report.checks)} checks, "
        f"status {'pass' if report.passed else 'fail'})"
    )
    return path


def write_timings(timings: dict[str, float], out_dir: Path) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "timings.json"
    path.write_text(dump_json(timings), encoding="utf-8")
    return path


def format_float(value: float | None) -> str | None:
    """17 significant digits, the shortest form that round-trips every double."""
    if value is None:
        return None
    if not math.isfinite(value):
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    return f"{value:.17g}"


def _stringify(df: pl.DataFrame) -> pl.DataFrame:
    columns = []
    for name, dtype in df.schema.items():
        if dtype.is_float():
            columns.append(
                pl.col(name).map_elements(format_float, return_dtype=pl.Utf8)
            )
        else:
            columns.append(pl.col(name))
    return df.select(columns)


def sweep_frame(scenario: str, records: list[CheckRecord]) -> pl.DataFrame:
    return pl.DataFrame(
        {
            "scenario": [scenario] * len(records),
            "check": [r.name for r in records],
            "value": [r.value for r in records],
            "reference": [r.reference for r in records],
            "provenance": [r.provenance for r in records],
            "tolerance": [r.tolerance for r in records],
            "pass": [r.passed for r in records],
            "slope": [r.slope for r in records],
        },
        schema={
            "scenario": pl.Utf8,
            "check": pl.Utf8,
            "value": pl.Float64,
            "reference": pl.Float64,
            "provenance": pl.Utf8,
            "tolerance": pl.Float64,
            "pass": pl.Boolean,
            "slope": pl.Float64,
        },
    )


def write_table(df: pl.DataFrame, out_dir: Path, filename: str) -> Path:
    """RFC-4180 CSV with floats pre-formatted to 17 significant digits."""
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / filename
    _stringify(df).write_csv(path, quote_style="necessary", null_value="")
    logger.info(f"Wrote {path} ({df.height} rows)")
    return path


def write_sweep(
    name: str, scenario: str, records: list[CheckRecord], out_dir: Path
) -> Path:
    return write_table(sweep_frame(scenario, records), out_dir, f"sweep_{name}.csv")


def write_profile(name: str, df: pl.DataFrame, out_dir: Path) -> Path:
    return write_table(df, out_dir, f"profile_{name}.csv")
