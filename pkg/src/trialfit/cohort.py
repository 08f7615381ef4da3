"""Study-cohort filtering, the generalizability score, and attrition funnels.

The score for a trial design is the exact ratio of study-cohort size over
target-cohort size; percent rendering rounds half-up at two decimals, and
only at render time.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyTargetCohort
from .normalize import ComputableCriterion

log = logging.getLogger(__name__)

MISSING_POLICIES = ("exclude", "include")


@dataclass(frozen=True)
class Cohort:
    label: str
    patient_ids: frozenset[str]

    def __len__(self) -> int:
        return len(self.patient_ids)


@dataclass(frozen=True)
class AttritionStep:
    criterion: str
    remaining: int

    def to_dict(self) -> dict:
        return {"criterion": self.criterion, "remaining": self.remaining}


def _half_up_cents(numerator: int, denominator: int) -> int:
    """Round numerator/denominator, expressed in percent, half-up to integer cents."""
    scaled = numerator * 10000
    sign = -1 if scaled < 0 else 1
    q, r = divmod(abs(scaled), denominator)
    if 2 * r >= denominator:
        q += 1
    return sign * q


def percent_cents(sc_count: int, tc_count: int) -> int:
    return _half_up_cents(sc_count, tc_count)


def format_cents(cents: int, signed: bool = False) -> str:
    sign = "-" if cents < 0 else ("+" if signed else "")
    cents = abs(cents)
    return f"{sign}{cents // 100}.{cents % 100:02d}%"


def percent_string(sc_count: int, tc_count: int) -> str:
    """Render sc/tc as a 2-decimal percentage, e.g. "80.15%"."""
    return format_cents(percent_cents(sc_count, tc_count))


def generalizability(sc_count: int, tc_count: int) -> float:
    """The exact study-over-target ratio; undefined (never 0/0) for an empty target."""
    if tc_count <= 0:
        raise EmptyTargetCohort("target cohort is empty; score undefined")
    if not 0 <= sc_count <= tc_count:
        raise ValueError(f"sc_count {sc_count} outside [0, {tc_count}]")
    return sc_count / tc_count


@dataclass
class GeneralizabilityReport:
    scenario_label: str
    sc_count: int
    tc_count: int
    score: float
    percent: str
    attrition: list[AttritionStep]
    missing_policy: str
    warnings: list[str] = field(default_factory=list)
    scenario_hash: str | None = None

    def to_dict(self) -> dict:
        return {
            "scenario_label": self.scenario_label,
            "sc_count": self.sc_count,
            "tc_count": self.tc_count,
            "score": self.score,
            "percent": self.percent,
            "attrition": [step.to_dict() for step in self.attrition],
            "missing_policy": self.missing_policy,
            "warnings": self.warnings,
            "scenario_hash": self.scenario_hash,
        }


# ---------------------------------------------------------------------------
# Criteria evaluation
# ---------------------------------------------------------------------------


def _criterion_mask(values, present, criterion: ComputableCriterion, missing_policy: str):
    ok = np.ones(values.shape, dtype=bool)
    if criterion.lower is not None:
        ok &= (values > criterion.lower) if not criterion.lower_inclusive else (values >= criterion.lower)
    if criterion.upper is not None:
        ok &= (values < criterion.upper) if not criterion.upper_inclusive else (values <= criterion.upper)
    missing_ok = missing_policy == "include"
    return np.where(present, ok, missing_ok)


def _pass_masks(target: Cohort, vectors, criteria, missing_policy: str):
    """Return (ids, per-criterion boolean masks) for the target's patients.

    Takes the vectorized path when vectors exposes aligned columns
    (patients.VectorTable); otherwise falls back to per-patient lookups
    against any mapping-like object with .get(patient_id).
    """
    if missing_policy not in MISSING_POLICIES:
        raise ValueError(f"missing_policy must be one of {MISSING_POLICIES}")
    if hasattr(vectors, "column") and hasattr(vectors, "target_indices"):
        idx, ids = vectors.target_indices(target.patient_ids)
        masks = []
        for criterion in criteria:
            values, present = vectors.column(criterion.variable)
            masks.append(_criterion_mask(values[idx], present[idx], criterion, missing_policy))
        return ids, masks

    ids = sorted(target.patient_ids)
    masks = []
    for criterion in criteria:
        rows = np.zeros(len(ids), dtype=bool)
        for i, pid in enumerate(ids):
            vec = vectors.get(pid)
            value = vec.values.get(criterion.variable) if vec is not None else None
            if value is None:
                rows[i] = missing_policy == "include"
            else:
                rows[i] = criterion.passes(value)
        masks.append(rows)
    return ids, masks


def study_cohort(
    target: Cohort,
    vectors,
    criteria: list[ComputableCriterion],
    missing_policy: str = "exclude",
) -> Cohort:
    """Patients of the target satisfying every criterion (conjunction).

    Under missing_policy="exclude" a patient lacking an in-period value for
    a criterion's variable fails that criterion; under "include" it passes.
    An empty criteria list returns the target unchanged (with a warning).
    """
    label = f"study:{target.label}"
    if not criteria:
        log.warning("empty criteria list; study cohort equals target %s", target.label)
        return Cohort(label=label, patient_ids=target.patient_ids)
    ids, masks = _pass_masks(target, vectors, criteria, missing_policy)
    keep = np.logical_and.reduce(masks)
    return Cohort(label=label, patient_ids=frozenset(pid for pid, k in zip(ids, keep) if k))


def attrition(
    target: Cohort,
    vectors,
    criteria: list[ComputableCriterion],
    missing_policy: str = "exclude",
) -> list[AttritionStep]:
    """Remaining patient counts after applying each criterion in list order.

    The funnel starts at the target count; the final count equals the study
    cohort size regardless of criteria order.
    """
    steps = [AttritionStep(criterion="target", remaining=len(target))]
    if not criteria:
        return steps
    ids, masks = _pass_masks(target, vectors, criteria, missing_policy)
    keep = np.ones(len(ids), dtype=bool)
    for criterion, mask in zip(criteria, masks):
        keep &= mask
        steps.append(AttritionStep(criterion=criterion.describe(), remaining=int(keep.sum())))
    return steps


def build_report(
    label: str,
    target: Cohort,
    vectors,
    criteria: list[ComputableCriterion],
    missing_policy: str = "exclude",
    scenario_hash: str | None = None,
) -> GeneralizabilityReport:
    """Evaluate criteria over the target and assemble the full report."""
    warnings = []
    funnel = [AttritionStep(criterion="target", remaining=len(target))]
    if not criteria:
        warnings.append("empty criteria list: study cohort equals target cohort")
        log.warning("empty criteria list; study cohort equals target %s", target.label)
        sc_count = tc_count = len(target)
    else:
        ids, masks = _pass_masks(target, vectors, criteria, missing_policy)
        keep = np.ones(len(ids), dtype=bool)
        for criterion, mask in zip(criteria, masks):
            keep &= mask
            funnel.append(
                AttritionStep(criterion=criterion.describe(), remaining=int(keep.sum()))
            )
        sc_count, tc_count = int(keep.sum()), len(target)
    return GeneralizabilityReport(
        scenario_label=label,
        sc_count=sc_count,
        tc_count=tc_count,
        score=generalizability(sc_count, tc_count),
        percent=percent_string(sc_count, tc_count),
        attrition=funnel,
        missing_policy=missing_policy,
        warnings=warnings,
        scenario_hash=scenario_hash,
    )
