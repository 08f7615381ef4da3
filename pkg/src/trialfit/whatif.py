"""Scenario definition, evaluation, and comparison for what-if analysis.

A scenario is a base criteria set plus threshold overrides addressed by
(variable, side). Scenarios serialize to JSON and are content-addressed by
hash so clients can cache and diff them.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace

from . import cohort as ch
from .criteria import TrialRecord
from .errors import IncomparableScenarios, InvalidParameter, InvalidScenario
from .normalize import ComputableCriterion, UnitsTable
from .patients import IndexPeriod, PatientStore

SIDES = ("lower", "upper")

DEFAULT_LOOKBACK_YEARS = 2

# CTCAE-style grade presets: lower bounds in canonical units.
GRADE_PRESETS: dict[str, dict[str, float]] = {
    "G1": {"absolute neutrophil count": 1.5, "hemoglobin": 10.0},
    "G2": {"absolute neutrophil count": 1.0, "hemoglobin": 8.0},
}


@dataclass(frozen=True)
class Override:
    variable: str
    side: str
    value: float | None = None
    remove: bool = False
    additive: bool = False

    def __post_init__(self):
        if self.side not in SIDES:
            raise InvalidScenario(f"override side must be one of {SIDES}, got {self.side!r}")
        if self.remove == (self.value is not None):
            raise InvalidScenario("override needs exactly one of value or remove")

    def to_dict(self) -> dict:
        data = {"variable": self.variable, "side": self.side}
        if self.remove:
            data["remove"] = True
        else:
            data["value"] = self.value
        if self.additive:
            data["additive"] = True
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "Override":
        return cls(
            variable=data["variable"],
            side=data["side"],
            value=data.get("value"),
            remove=bool(data.get("remove", False)),
            additive=bool(data.get("additive", False)),
        )


@dataclass
class Scenario:
    label: str
    base: list[ComputableCriterion]
    index_period: IndexPeriod
    icd_prefix: str = "C50"
    overrides: list[Override] = field(default_factory=list)
    missing_policy: str = "exclude"

    def __post_init__(self):
        if self.missing_policy not in ch.MISSING_POLICIES:
            raise InvalidScenario(
                f"missing_policy must be one of {ch.MISSING_POLICIES}, got {self.missing_policy!r}"
            )

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "base": [c.to_dict() for c in self.base],
            "overrides": [o.to_dict() for o in self.overrides],
            "index_period": self.index_period.to_dict(),
            "icd_prefix": self.icd_prefix,
            "missing_policy": self.missing_policy,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        try:
            return cls(
                label=str(data.get("label", "scenario")),
                base=[ComputableCriterion.from_dict(c) for c in data["base"]],
                overrides=[Override.from_dict(o) for o in data.get("overrides", [])],
                index_period=IndexPeriod.from_dict(data["index_period"]),
                icd_prefix=str(data.get("icd_prefix", "C50")),
                missing_policy=str(data.get("missing_policy", "exclude")),
            )
        except (KeyError, TypeError, ValueError) as err:
            raise InvalidScenario(f"bad scenario payload: {err}") from err

    def content_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def grade_preset_overrides(grade: str | int) -> list[Override]:
    key = f"G{grade}" if isinstance(grade, int) or not str(grade).upper().startswith("G") else str(grade).upper()
    key = key.upper()
    if key not in GRADE_PRESETS:
        raise InvalidParameter(f"unknown grade preset {grade!r}; have {sorted(GRADE_PRESETS)}")
    return [
        Override(variable=variable, side="lower", value=value, additive=True)
        for variable, value in sorted(GRADE_PRESETS[key].items())
    ]


# ---------------------------------------------------------------------------
# Applying overrides
# ---------------------------------------------------------------------------


def _apply_one(criterion: ComputableCriterion, override: Override) -> ComputableCriterion | None:
    """Returns the updated criterion, or None when its last bound was removed."""
    changes: dict = {}
    if override.remove:
        changes[override.side] = None
    else:
        changes[override.side] = override.value
    updated = {
        "lower": criterion.lower,
        "upper": criterion.upper,
        **changes,
    }
    if updated["lower"] is None and updated["upper"] is None:
        return None
    try:
        return replace(criterion, **changes)
    except ValueError as err:
        raise InvalidScenario(
            f"override on {criterion.variable!r} ({override.side}) breaks bound order: {err}"
        ) from err


def apply_scenario(scenario: Scenario, units: UnitsTable | None = None) -> list[ComputableCriterion]:
    """Produce the effective criteria list: overrides replace by (variable, side).

    Idempotent for a fixed override list. Overrides naming a variable absent
    from the base must be flagged additive; they create a single-sided
    criterion (canonical unit looked up when a units table is provided).
    """
    criteria = list(scenario.base)
    for override in scenario.overrides:
        position = next(
            (i for i, c in enumerate(criteria) if c.variable == override.variable), None
        )
        if position is not None:
            updated = _apply_one(criteria[position], override)
            if updated is None:
                del criteria[position]
            else:
                criteria[position] = updated
            continue
        if override.remove:
            raise InvalidScenario(
                f"cannot remove {override.side} bound of {override.variable!r}: not in base"
            )
        if not override.additive:
            raise InvalidScenario(
                f"override variable {override.variable!r} not in base; mark it additive to add"
            )
        unit = units.canonical_unit.get(override.variable, "") if units else ""
        criteria.append(
            ComputableCriterion(
                variable=override.variable,
                lower=override.value if override.side == "lower" else None,
                upper=override.value if override.side == "upper" else None,
                canonical_unit=unit,
            )
        )
    return criteria


# ---------------------------------------------------------------------------
# Evaluation and comparison
# ---------------------------------------------------------------------------


def evaluate_scenario(
    scenario: Scenario,
    store: PatientStore,
    units: UnitsTable | None = None,
    measurement_policy: str = "most_recent",
) -> ch.GeneralizabilityReport:
    """Full pipeline: target cohort, vector resolution, filtering, scoring."""
    criteria = apply_scenario(scenario, units)
    target = store.target_cohort(scenario.icd_prefix, scenario.index_period)
    variables = list(dict.fromkeys(c.variable for c in criteria))
    vectors = store.resolve_vectors(variables, scenario.index_period, measurement_policy)
    return ch.build_report(
        label=scenario.label,
        target=target,
        vectors=vectors,
        criteria=criteria,
        missing_policy=scenario.missing_policy,
        scenario_hash=scenario.content_hash(),
    )


@dataclass(frozen=True)
class ComparisonRow:
    label: str
    sc_count: int
    tc_count: int
    score: float
    percent: str
    delta_pp: float
    delta: str

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "sc_count": self.sc_count,
            "tc_count": self.tc_count,
            "score": self.score,
            "percent": self.percent,
            "delta_pp": self.delta_pp,
            "delta": self.delta,
        }


def compare(reports: list[ch.GeneralizabilityReport]) -> list[ComparisonRow]:
    """Side-by-side rows with percentage-point deltas against the first report.

    All reports must cover the same target cohort (equal tc counts).
    """
    if len(reports) < 2:
        raise InvalidParameter("compare needs at least two reports")
    tc = reports[0].tc_count
    if any(r.tc_count != tc for r in reports):
        raise IncomparableScenarios(
            f"target cohorts differ: {sorted({r.tc_count for r in reports})}"
        )
    base_sc = reports[0].sc_count
    rows = []
    for report in reports:
        delta_cents = ch._half_up_cents(report.sc_count - base_sc, tc)
        rows.append(
            ComparisonRow(
                label=report.scenario_label,
                sc_count=report.sc_count,
                tc_count=report.tc_count,
                score=report.score,
                percent=report.percent,
                delta_pp=(report.sc_count - base_sc) / tc * 100.0,
                delta=ch.format_cents(delta_cents, signed=True),
            )
        )
    return rows


# ---------------------------------------------------------------------------
# Trial-derived scenarios
# ---------------------------------------------------------------------------


def trial_index_period(
    trial: TrialRecord,
    default_period: IndexPeriod,
    lookback_years: int = DEFAULT_LOOKBACK_YEARS,
) -> IndexPeriod:
    """Attach a trial's enrollment window to the corpus-level index period."""
    return IndexPeriod(
        start=default_period.start,
        end=default_period.end,
        enrollment_start=trial.enrollment_start,
        enrollment_end=trial.enrollment_end,
        lookback_years=lookback_years if trial.enrollment_start else None,
    )
