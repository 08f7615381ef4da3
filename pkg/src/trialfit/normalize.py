"""Name standardization, bound parsing, unit conversion, and ULN resolution.

Turns raw extracted (variable, bound) pairs into criteria expressed in each
variable's canonical unit, and decides which criteria are computable against
a given set of available variables. Failures are returned as values so batch
runs can report coverage instead of dying on the first odd criterion.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources

from . import criteria as cx
from .errors import MissingULN, UnknownUnit, UnparsableBound

log = logging.getLogger(__name__)

COMPARATOR_KINDS = (cx.GE, cx.GT, cx.LE, cx.LT, cx.EQ)

_TRAILING_PAREN = re.compile(r"\s*\([^()]*\)\s*$")


def _base_name(raw: str) -> str:
    name = raw.lower()
    while _TRAILING_PAREN.search(name):
        name = _TRAILING_PAREN.sub("", name)
    return " ".join(name.split())


def canonicalize_name(raw: str, synonyms: dict[str, str]) -> str:
    """Lowercase, strip trailing parentheticals, and apply the synonym map.

    Unknown names pass through lowercased. Idempotent as long as the synonym
    map is closed over its own values (load_synonyms guarantees that).
    """
    name = _base_name(raw)
    return synonyms.get(name, name)


def load_synonyms(lines) -> dict[str, str]:
    """Parse "alias|canonical" lines into a map closed under itself."""
    mapping: dict[str, str] = {}
    for raw in lines:
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        alias, _, canonical = line.partition("|")
        mapping[_base_name(alias)] = _base_name(canonical)
    # Resolve alias chains (a->b, b->c) so canonicalization is idempotent.
    for alias in list(mapping):
        seen = {alias}
        target = mapping[alias]
        while target in mapping and mapping[target] != target and target not in seen:
            seen.add(target)
            target = mapping[target]
        mapping[alias] = target
    return mapping


def load_synonyms_file(path) -> dict[str, str]:
    with open(path, encoding="utf-8") as handle:
        return load_synonyms(handle)


def default_synonyms() -> dict[str, str]:
    text = resources.files("trialfit").joinpath("data/synonyms.txt").read_text("utf-8")
    return load_synonyms(text.splitlines())


# ---------------------------------------------------------------------------
# Units
# ---------------------------------------------------------------------------

_UNIT_OPS = re.compile(r"\s*([/^*])\s*")


def normalize_unit(unit: str) -> str:
    """Fold a unit spelling to its lookup key (case, µ/u, ×/x, spacing)."""
    s = unit.strip().replace("µ", "u").replace("μ", "u").replace("×", "x").lower()
    s = _UNIT_OPS.sub(r"\1", s)
    s = re.sub(r"^x\s+", "x", s)
    return re.sub(r"\s+", " ", s)


class UnitsTable:
    """Per-variable unit conversion factors into a canonical unit.

    Factors are exact decimal fractions so identities like
    1,500/mcL == 1.5 x 10^9/L survive the round trip bit-for-bit.
    """

    def __init__(self):
        self.canonical_unit: dict[str, str] = {}
        self._factors: dict[tuple[str, str], Fraction] = {}
        self._spellings: list[str] = []

    def add(self, variable: str, unit: str, factor: Fraction) -> None:
        variable = _base_name(variable)
        key = (variable, normalize_unit(unit))
        if key in self._factors and self._factors[key] != factor:
            raise ValueError(f"conflicting factors for {key}")
        if variable not in self.canonical_unit:
            if factor != 1:
                raise ValueError(
                    f"first unit listed for {variable!r} must be canonical (factor 1), got {factor}"
                )
            self.canonical_unit[variable] = unit.strip()
        self._factors[key] = factor
        self._spellings.append(unit.strip())

    def variables(self) -> set[str]:
        return set(self.canonical_unit)

    def spellings(self) -> list[str]:
        return list(self._spellings)

    def knows(self, variable: str, unit: str) -> bool:
        return (variable, normalize_unit(unit)) in self._factors

    def factor(self, variable: str, unit: str) -> Fraction:
        try:
            return self._factors[(variable, normalize_unit(unit))]
        except KeyError:
            raise UnknownUnit(variable, unit) from None

    def convert(self, value: float, unit: str, variable: str) -> float:
        """Convert value from unit into the variable's canonical unit."""
        return float(Fraction(str(value)) * self.factor(variable, unit))

    def from_canonical(self, value: float, variable: str, unit: str) -> float:
        """Convert a canonical-unit value back into unit (inverse of convert)."""
        return float(Fraction(str(value)) / self.factor(variable, unit))

    @classmethod
    def from_lines(cls, lines) -> "UnitsTable":
        table = cls()
        for raw in lines:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split("|")]
            if len(parts) != 3:
                raise ValueError(f"expected variable|unit|factor, got {line!r}")
            table.add(parts[0], parts[1], Fraction(parts[2]))
        return table

    @classmethod
    def load(cls, path) -> "UnitsTable":
        with open(path, encoding="utf-8") as handle:
            return cls.from_lines(handle)

    @classmethod
    def default(cls) -> "UnitsTable":
        text = resources.files("trialfit").joinpath("data/units.txt").read_text("utf-8")
        return cls.from_lines(text.splitlines())


def convert_unit(value: float, unit: str, variable: str, units: UnitsTable) -> float:
    return units.convert(value, unit, variable)


# ---------------------------------------------------------------------------
# ULN table
# ---------------------------------------------------------------------------


class ULNTable:
    """Upper-limit-of-normal values per variable, in canonical units."""

    def __init__(self, values: dict[str, float] | None = None):
        self.values: dict[str, float] = {}
        for variable, value in (values or {}).items():
            self.set(variable, value)

    def set(self, variable: str, value: float) -> None:
        if not value > 0:
            raise ValueError(f"ULN for {variable!r} must be positive, got {value}")
        self.values[_base_name(variable)] = float(value)

    def get(self, variable: str) -> float:
        try:
            return self.values[variable]
        except KeyError:
            raise MissingULN(variable) from None

    def __contains__(self, variable: str) -> bool:
        return variable in self.values

    @classmethod
    def from_lines(cls, lines) -> "ULNTable":
        table = cls()
        for raw in lines:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            variable, _, value = line.partition("|")
            table.set(variable, float(value))
        return table

    @classmethod
    def load(cls, path) -> "ULNTable":
        with open(path, encoding="utf-8") as handle:
            return cls.from_lines(handle)

    @classmethod
    def default(cls) -> "ULNTable":
        text = resources.files("trialfit").joinpath("data/uln.txt").read_text("utf-8")
        return cls.from_lines(text.splitlines())


# ---------------------------------------------------------------------------
# Bound expressions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundExpression:
    """One parsed threshold: either magnitude+unit or a ULN multiple."""

    comparator: str
    magnitude: float | None = None
    unit: str = ""
    uln_multiplier: float | None = None
    alt: tuple[float, str] | None = None  # parenthetical alternate representation

    def __post_init__(self):
        if self.comparator not in COMPARATOR_KINDS:
            raise ValueError(f"bad comparator {self.comparator!r}")
        if (self.magnitude is None) == (self.uln_multiplier is None):
            raise ValueError("exactly one of magnitude or uln_multiplier must be set")
        value = self.magnitude if self.magnitude is not None else self.uln_multiplier
        if not (math.isfinite(value) and value >= 0):
            raise ValueError(f"magnitude must be finite and >= 0, got {value}")


_LEADING_CMP = re.compile(r"^(?:%s)" % "|".join(
    (r"\b" + re.escape(lex) + r"\b" if lex[0].isalpha() else re.escape(lex))
    for lex, _ in sorted(cx.COMPARATORS, key=lambda c: -len(c[0]))
), re.IGNORECASE)

_NUM_HEAD = re.compile(r"^(%s)\s*(.*)$" % cx.NUMBER_RE, re.DOTALL)
_ULN_TAIL = re.compile(r"^(?:%s)$" % cx.ULN_EXPR_RE, re.IGNORECASE)
_ALT_PAREN = re.compile(r"^\(\s*(%s)\s*([^)]*?)\s*\)$" % cx.NUMBER_RE)


def _to_number(token: str) -> float:
    return float(token.replace(",", ""))


def parse_bound_text(raw: str, comparator: str | None = None) -> BoundExpression:
    """Parse a bound expression like ">= 1,500/mcL" or "1.25 x normal limits".

    A leading comparator token in the text wins over the comparator argument;
    thousands separators are removed; a trailing parenthesized alternate
    representation is kept for consistency checking but the leading
    representation drives the threshold. Raises UnparsableBound when no
    number can be found (or no comparator is known from either source).
    """
    s = " ".join(raw.strip().split())
    m = _LEADING_CMP.match(s)
    if m:
        comparator = cx.classify_comparator(m.group(0))
        s = s[m.end():].strip()
    if comparator is None:
        raise UnparsableBound(raw, "missing comparator")

    m = _NUM_HEAD.match(s)
    if not m:
        raise UnparsableBound(raw)
    magnitude = _to_number(m.group(1))
    tail = m.group(2).strip()

    if tail and _ULN_TAIL.match(tail):
        return BoundExpression(comparator=comparator, uln_multiplier=magnitude)

    unit, alt = tail, None
    if "(" in tail:
        unit, _, paren = tail.partition("(")
        unit = unit.strip()
        alt_match = _ALT_PAREN.match("(" + paren)
        if alt_match:
            alt = (_to_number(alt_match.group(1)), alt_match.group(2).strip())
    return BoundExpression(comparator=comparator, magnitude=magnitude, unit=unit, alt=alt)


def resolve_uln(expr: BoundExpression, variable: str, uln: ULNTable) -> float:
    """Threshold for a "k x ULN" bound: multiplier times the variable's ULN."""
    if expr.uln_multiplier is None:
        raise ValueError("expression has no ULN multiplier")
    return float(Fraction(str(expr.uln_multiplier)) * Fraction(str(uln.get(variable))))


# ---------------------------------------------------------------------------
# Computable criteria
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ComputableCriterion:
    """A variable with resolved thresholds in its canonical unit."""

    variable: str
    lower: float | None = None
    upper: float | None = None
    lower_inclusive: bool = True
    upper_inclusive: bool = True
    canonical_unit: str = ""
    source: cx.SentenceRef | None = None

    def __post_init__(self):
        if self.lower is None and self.upper is None:
            raise ValueError("criterion needs at least one bound")
        if self.lower is not None and self.upper is not None and self.lower > self.upper:
            raise ValueError(f"lower {self.lower} exceeds upper {self.upper}")

    def passes(self, value: float) -> bool:
        if self.lower is not None:
            if value < self.lower or (value == self.lower and not self.lower_inclusive):
                return False
        if self.upper is not None:
            if value > self.upper or (value == self.upper and not self.upper_inclusive):
                return False
        return True

    def describe(self) -> str:
        unit = f" {self.canonical_unit}" if self.canonical_unit else ""
        parts = []
        if self.lower is not None:
            op = ">=" if self.lower_inclusive else ">"
            parts.append(f"{op} {self.lower:g}{unit}")
        if self.upper is not None:
            op = "<=" if self.upper_inclusive else "<"
            parts.append(f"{op} {self.upper:g}{unit}")
        return f"{self.variable} " + " and ".join(parts)

    def to_dict(self) -> dict:
        return {
            "variable": self.variable,
            "lower": self.lower,
            "upper": self.upper,
            "lower_inclusive": self.lower_inclusive,
            "upper_inclusive": self.upper_inclusive,
            "unit": self.canonical_unit,
            "source": self.source.to_dict() if self.source else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ComputableCriterion":
        source = data.get("source")
        return cls(
            variable=data["variable"],
            lower=data.get("lower"),
            upper=data.get("upper"),
            lower_inclusive=bool(data.get("lower_inclusive", True)),
            upper_inclusive=bool(data.get("upper_inclusive", True)),
            canonical_unit=data.get("unit", ""),
            source=cx.SentenceRef(**source) if source else None,
        )


@dataclass(frozen=True)
class NonComputable:
    """Why a criterion could not be evaluated against the patient data."""

    variable: str
    reason: str  # variable-unavailable | unknown-unit | missing-uln | unparsable-bound | bound-conflict | no-bounds
    detail: str = ""

    def to_dict(self) -> dict:
        return {"variable": self.variable, "reason": self.reason, "detail": self.detail}


@dataclass
class ParsedVariable:
    variable: str
    bounds: list[BoundExpression] = field(default_factory=list)
    source: cx.SentenceRef | None = None


def _check_alt(expr: BoundExpression, threshold: float, variable: str, units: UnitsTable) -> None:
    alt_value, alt_unit = expr.alt
    if not units.knows(variable, alt_unit):
        return
    alt_canonical = units.convert(alt_value, alt_unit, variable)
    if threshold and abs(alt_canonical - threshold) > 0.01 * abs(threshold):
        log.warning(
            "bound for %s: parenthetical %g %s (= %g) disagrees with primary %g by > 1%%",
            variable, alt_value, alt_unit, alt_canonical, threshold,
        )


def to_computable(
    parsed: ParsedVariable,
    uln: ULNTable,
    available: set[str],
    units: UnitsTable,
) -> ComputableCriterion | NonComputable:
    """Resolve a parsed variable into a canonical-unit criterion, or say why not."""
    variable = parsed.variable
    if variable not in available:
        return NonComputable(variable, "variable-unavailable")
    if not parsed.bounds:
        return NonComputable(variable, "no-bounds")

    lower = upper = None
    lower_inc = upper_inc = True
    for expr in parsed.bounds:
        if expr.uln_multiplier is not None:
            try:
                threshold = resolve_uln(expr, variable, uln)
            except MissingULN as err:
                return NonComputable(variable, "missing-uln", str(err))
        else:
            try:
                threshold = units.convert(expr.magnitude, expr.unit, variable)
            except UnknownUnit as err:
                return NonComputable(variable, "unknown-unit", str(err))
            if expr.alt:
                _check_alt(expr, threshold, variable, units)

        if expr.comparator in (cx.GE, cx.GT):
            if lower is None:
                lower, lower_inc = threshold, expr.comparator == cx.GE
            else:
                log.debug("duplicate lower bound for %s ignored", variable)
        elif expr.comparator in (cx.LE, cx.LT):
            if upper is None:
                upper, upper_inc = threshold, expr.comparator == cx.LE
            else:
                log.debug("duplicate upper bound for %s ignored", variable)
        else:  # eq
            lower = upper = threshold
            lower_inc = upper_inc = True

    if lower is not None and upper is not None and lower > upper:
        return NonComputable(variable, "bound-conflict", f"lower {lower} > upper {upper}")
    return ComputableCriterion(
        variable=variable,
        lower=lower,
        upper=upper,
        lower_inclusive=lower_inc,
        upper_inclusive=upper_inc,
        canonical_unit=units.canonical_unit.get(variable, ""),
        source=parsed.source,
    )


# ---------------------------------------------------------------------------
# Trial parsing pipeline
# ---------------------------------------------------------------------------


@dataclass
class TrialCriteria:
    trial_id: str
    criteria: list[ComputableCriterion]
    non_computable: list[NonComputable]
    unattached_bounds: int = 0


def make_grammar(units: UnitsTable) -> cx.BoundGrammar:
    spellings = sorted(set(units.spellings()) | set(cx.DEFAULT_UNIT_SPELLINGS))
    return cx.BoundGrammar(spellings)


def parse_trial(
    trial: cx.TrialRecord,
    lexicon: cx.Lexicon,
    synonyms: dict[str, str],
    units: UnitsTable,
    uln: ULNTable,
    available: set[str],
    include_exclusion: bool = False,
    grammar: cx.BoundGrammar | None = None,
) -> TrialCriteria:
    """Full text-to-criteria pipeline for one trial.

    Exclusion-section thresholds are parsed but left out of the criteria
    list unless include_exclusion is set; inclusion criteria are what the
    generalizability score filters on.
    """
    grammar = grammar or make_grammar(units)
    result = TrialCriteria(trial_id=trial.trial_id, criteria=[], non_computable=[])
    for sentence in cx.segment_criteria(trial):
        if sentence.section == "exclusion" and not include_exclusion:
            continue
        entities = cx.extract_entities(sentence, lexicon, grammar)
        attached = cx.attach_bounds(entities, sentence.text)
        result.unattached_bounds += len(attached.unattached)
        ref = cx.SentenceRef(sentence.trial_id, sentence.section, sentence.ordinal)
        for pair in attached.pairs:
            if not pair.bounds:
                continue  # a bare variable mention is not a threshold criterion
            raw_name = pair.variable.raw_text
            name = canonicalize_name(lexicon.canonical_for(raw_name) or raw_name, synonyms)
            bounds = []
            for bound in pair.bounds:
                kind = cx.comparator_before(sentence.text, bound.start)
                try:
                    bounds.append(parse_bound_text(bound.raw_text, comparator=kind))
                except UnparsableBound as err:
                    result.non_computable.append(
                        NonComputable(name, "unparsable-bound", str(err))
                    )
            if not bounds:
                continue  # every bound was unparsable; already reported above
            outcome = to_computable(
                ParsedVariable(variable=name, bounds=bounds, source=ref), uln, available, units
            )
            if isinstance(outcome, ComputableCriterion):
                result.criteria.append(outcome)
            else:
                result.non_computable.append(outcome)
    return result
