"""Independent brute-force re-implementation of cohort selection.

Everything here re-reads the raw CSV rows and re-applies the rules with
plain dict/loop code and exact Fraction arithmetic. It deliberately shares
no code with the engine under test; the only shared input is the units
data file, which is configuration, re-parsed here from scratch.
"""

import csv
import re
from datetime import date
from fractions import Fraction
from importlib import resources

_UNIT_OPS = re.compile(r"\s*([/^*])\s*")


def norm_unit(unit):
    s = unit.strip().replace("µ", "u").replace("μ", "u").replace("×", "x").lower()
    s = _UNIT_OPS.sub(r"\1", s)
    s = re.sub(r"^x\s+", "x", s)
    return re.sub(r"\s+", " ", s)


def load_unit_factors():
    """variable -> {normalized unit -> Fraction factor}."""
    text = resources.files("trialfit").joinpath("data/units.txt").read_text("utf-8")
    factors = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        variable, unit, factor = (p.strip() for p in line.split("|"))
        factors.setdefault(variable.lower(), {})[norm_unit(unit)] = Fraction(factor)
    return factors


def read_diagnoses(path):
    with open(path, newline="", encoding="utf-8") as handle:
        return [
            (row["patient_id"], row["icd10_code"], date.fromisoformat(row["diagnosis_date"]))
            for row in csv.DictReader(handle)
        ]


def read_labs(path):
    with open(path, newline="", encoding="utf-8") as handle:
        return [
            (
                row["patient_id"],
                row["variable"],
                Fraction(row["value"]),
                row["unit"],
                date.fromisoformat(row["lab_date"]),
            )
            for row in csv.DictReader(handle)
        ]


def years_before(day, years):
    try:
        return day.replace(year=day.year - years)
    except ValueError:
        return day.replace(year=day.year - years, day=28)


def target_ids(diag_rows, icd_prefix, period):
    """Patients whose last prefix-matching diagnosis falls in the window."""
    prefix = icd_prefix.replace(".", "").upper()
    last = {}
    for pid, code, day in diag_rows:
        if code.replace(".", "").upper().startswith(prefix):
            if pid not in last or day > last[pid]:
                last[pid] = day
    low = period["start"]
    if period.get("enrollment_start") and period.get("lookback_years") is not None:
        low = max(low, years_before(period["enrollment_start"], period["lookback_years"]))
    result = set()
    for pid, day in last.items():
        if day < low or day > period["end"]:
            continue
        if period.get("enrollment_end") and day >= period["enrollment_end"]:
            continue
        result.add(pid)
    return result


def resolve_values(lab_rows, factors, variables, period):
    """patient -> {variable -> exact Fraction value}, most-recent policy.

    Ties on date resolve to the later file row, mirroring load order.
    """
    best = {}
    for pid, variable, value, unit, day in lab_rows:
        if variable not in variables:
            continue
        if day < period["start"] or day > period["end"]:
            continue
        slot = best.setdefault(pid, {})
        if variable not in slot or day >= slot[variable][0]:
            slot[variable] = (day, value * factors[variable][norm_unit(unit)])
    return {
        pid: {variable: pair[1] for variable, pair in slots.items()}
        for pid, slots in best.items()
    }


def passes(value, criterion):
    lower, upper = criterion.get("lower"), criterion.get("upper")
    if lower is not None:
        bound = Fraction(str(lower))
        if value < bound or (value == bound and not criterion.get("lower_inclusive", True)):
            return False
    if upper is not None:
        bound = Fraction(str(upper))
        if value > bound or (value == bound and not criterion.get("upper_inclusive", True)):
            return False
    return True


def study(diag_rows, lab_rows, factors, icd_prefix, period, criteria, missing_policy):
    """(target ids, study ids, attrition counts) computed row by row."""
    target = target_ids(diag_rows, icd_prefix, period)
    variables = {c["variable"] for c in criteria}
    vectors = resolve_values(lab_rows, factors, variables, period)

    def criterion_ok(pid, criterion):
        value = vectors.get(pid, {}).get(criterion["variable"])
        if value is None:
            return missing_policy == "include"
        return passes(value, criterion)

    attrition = [len(target)]
    alive = set(target)
    for criterion in criteria:
        alive = {pid for pid in alive if criterion_ok(pid, criterion)}
        attrition.append(len(alive))
    return target, alive, attrition
