"""Segmentation of eligibility-criteria text and rule-based entity extraction.

The extractor is deterministic: a longest-match lexicon lookup for named
terms (clinical variables, diseases, cancers, chronic diseases, treatments)
plus a comparator grammar that recognizes numeric bound expressions such as
">= 1,500/mcL" or "within 1.25 x normal institutional limits".
"""

from __future__ import annotations

import bisect
import json
import re
from dataclasses import dataclass, field
from datetime import date
from importlib import resources

from .errors import EmptyCriteria

SECTIONS = ("inclusion", "exclusion")

ENTITY_TYPES = frozenset(
    {
        "clinical_variable",
        "lower_bound",
        "upper_bound",
        "disease",
        "cancer",
        "chronic_disease",
        "treatment",
    }
)

PHASES = ("1", "2", "3", "4", "NA")

_NCT_ID = re.compile(r"^NCT\d{8}$")


@dataclass(frozen=True)
class TrialRecord:
    """One registry trial: metadata plus raw criteria text split by section."""

    trial_id: str
    title: str = ""
    phase: str = "NA"
    condition: str = ""
    enrollment_start: date | None = None
    enrollment_end: date | None = None
    inclusion_text: str = ""
    exclusion_text: str = ""

    def validate(self) -> None:
        if not self.trial_id or not _NCT_ID.match(self.trial_id):
            raise ValueError(f"trial_id {self.trial_id!r} does not match NCT######## pattern")
        if self.phase not in PHASES:
            raise ValueError(f"phase {self.phase!r} not one of {PHASES}")
        if (
            self.enrollment_start is not None
            and self.enrollment_end is not None
            and self.enrollment_start > self.enrollment_end
        ):
            raise ValueError("enrollment_start after enrollment_end")

    @classmethod
    def from_dict(cls, record: dict) -> "TrialRecord":
        def parse_date(value):
            return date.fromisoformat(value) if value else None

        trial = cls(
            trial_id=str(record.get("trial_id", "")),
            title=str(record.get("title", "")),
            phase=str(record.get("phase", "NA")),
            condition=str(record.get("condition", "")),
            enrollment_start=parse_date(record.get("enrollment_start")),
            enrollment_end=parse_date(record.get("enrollment_end")),
            inclusion_text=str(record.get("inclusion_text", "")),
            exclusion_text=str(record.get("exclusion_text", "")),
        )
        trial.validate()
        return trial

    def to_dict(self) -> dict:
        return {
            "trial_id": self.trial_id,
            "title": self.title,
            "phase": self.phase,
            "condition": self.condition,
            "enrollment_start": self.enrollment_start.isoformat() if self.enrollment_start else None,
            "enrollment_end": self.enrollment_end.isoformat() if self.enrollment_end else None,
            "inclusion_text": self.inclusion_text,
            "exclusion_text": self.exclusion_text,
        }


@dataclass(frozen=True)
class CriterionSentence:
    trial_id: str
    section: str
    ordinal: int
    text: str


@dataclass(frozen=True)
class SentenceRef:
    trial_id: str
    section: str
    ordinal: int

    def to_dict(self) -> dict:
        return {"trial_id": self.trial_id, "section": self.section, "ordinal": self.ordinal}


@dataclass(frozen=True)
class ExtractedEntity:
    """A typed span over one criterion sentence; raw_text mirrors the span exactly."""

    sentence_ref: SentenceRef
    start: int
    end: int
    entity_type: str
    raw_text: str

    def to_dict(self) -> dict:
        return {
            "sentence_ref": self.sentence_ref.to_dict(),
            "span": [self.start, self.end],
            "entity_type": self.entity_type,
            "raw_text": self.raw_text,
        }


# ---------------------------------------------------------------------------
# Sentence segmentation
# ---------------------------------------------------------------------------

# Bullet glyphs and numbered-list markers at the start of a line.
_LIST_MARKER = re.compile(r"^\s*(?:[-*•·▪◦o]\s+|\(?\d{1,2}[.)]\s+|\(\d{1,2}\)\s+)")


def _segment_section(trial_id: str, section: str, text: str) -> list[CriterionSentence]:
    sentences = []
    for line in text.splitlines():
        body = _LIST_MARKER.sub("", line).strip()
        if not body:
            continue
        sentences.append(
            CriterionSentence(
                trial_id=trial_id, section=section, ordinal=len(sentences), text=body
            )
        )
    return sentences


def segment_criteria(trial: TrialRecord) -> list[CriterionSentence]:
    """Split both criteria sections into per-line sentences.

    Lines are the only sentence boundary; leading bullet or numbered-list
    markers are stripped. Raises EmptyCriteria when neither section yields
    a sentence.
    """
    sentences = _segment_section(trial.trial_id, "inclusion", trial.inclusion_text)
    sentences += _segment_section(trial.trial_id, "exclusion", trial.exclusion_text)
    if not sentences:
        raise EmptyCriteria(f"trial {trial.trial_id} has no criteria text")
    return sentences


# ---------------------------------------------------------------------------
# Lexicon
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LexiconEntry:
    term: str
    canonical: str
    entity_type: str


def _term_key(term: str) -> str:
    return " ".join(term.lower().split())


class Lexicon:
    """Term dictionary for the longest-match entity lookup.

    File format: one term per line, optionally "term|canonical|type".
    Bare lines default to type clinical_variable with the term itself as
    canonical. Lines starting with '#' are comments.
    """

    def __init__(self, entries: list[LexiconEntry]):
        self.entries = list(entries)
        self._by_key = {_term_key(e.term): e for e in self.entries}
        self._patterns = [
            (re.compile(r"(?<![A-Za-z0-9])" + re.escape(e.term) + r"(?![A-Za-z0-9])", re.IGNORECASE), e)
            for e in self.entries
        ]

    def __len__(self) -> int:
        return len(self.entries)

    def canonical_for(self, term: str) -> str | None:
        entry = self._by_key.get(_term_key(term))
        return entry.canonical if entry else None

    def iter_matches(self, text: str):
        """Yield (start, end, entry) for every lexicon occurrence in text."""
        for pattern, entry in self._patterns:
            for m in pattern.finditer(text):
                yield m.start(), m.end(), entry

    @classmethod
    def from_lines(cls, lines) -> "Lexicon":
        entries = []
        for raw in lines:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split("|")]
            term = parts[0]
            canonical = parts[1] if len(parts) > 1 and parts[1] else term.lower()
            entity_type = parts[2] if len(parts) > 2 and parts[2] else "clinical_variable"
            if entity_type not in ENTITY_TYPES:
                raise ValueError(f"unknown entity type {entity_type!r} in lexicon line {line!r}")
            entries.append(LexiconEntry(term=term, canonical=canonical, entity_type=entity_type))
        return cls(entries)

    @classmethod
    def load(cls, path) -> "Lexicon":
        with open(path, encoding="utf-8") as handle:
            return cls.from_lines(handle)

    @classmethod
    def default(cls) -> "Lexicon":
        text = resources.files("trialfit").joinpath("data/lexicon.txt").read_text("utf-8")
        return cls.from_lines(text.splitlines())


# ---------------------------------------------------------------------------
# Comparator grammar
# ---------------------------------------------------------------------------

GE, GT, LE, LT, EQ = "ge", "gt", "le", "lt", "eq"

# Fixed comparator vocabulary; word forms require word boundaries.
COMPARATORS = [
    (">=", GE),
    ("≥", GE),
    ("⩾", GE),
    ("=>", GE),
    ("at least", GE),
    ("no less than", GE),
    (">", GT),
    ("<=", LE),
    ("≤", LE),
    ("⩽", LE),
    ("=<", LE),
    ("within", LE),
    ("no more than", LE),
    ("<", LT),
    ("less than", LT),
    ("=", EQ),
]

_LOWER_SIDE = {GE, GT}
_UPPER_SIDE = {LE, LT}

NUMBER_RE = r"\d{1,3}(?:,\d{3})+(?:\.\d+)?|\d+(?:\.\d+)?"

ULN_WORDS_RE = (
    r"(?:the\s+)?(?:ULN|upper\s+limit(?:s)?\s+of\s+normal|"
    r"normal\s+institutional\s+limits?|institutional\s+normal\s+limits?|normal\s+limits?)"
)
ULN_EXPR_RE = r"(?:x|×|times)\s*" + ULN_WORDS_RE

# Unit spellings recognized by the default grammar; mirrors data/units.txt.
DEFAULT_UNIT_SPELLINGS = [
    "10^9/L",
    "x10^9/L",
    "x 10^9/L",
    "10*9/L",
    "109/L",
    "10⁹/L",
    "GI/L",
    "/mcL",
    "/uL",
    "/µL",
    "cells/mcL",
    "cells/uL",
    "K/uL",
    "x10^3/uL",
    "10^3/uL",
    "g/dL",
    "g/L",
    "mg/mL",
    "mg/dL",
    "mg/L",
    "umol/L",
    "µmol/L",
    "ukat/L",
    "U/L",
    "IU/L",
    "units per liter",
    "%",
]


def _comparator_alternation(include_eq: bool) -> str:
    lexemes = [c for c, kind in COMPARATORS if include_eq or kind != EQ]
    lexemes.sort(key=len, reverse=True)
    parts = []
    for lex in lexemes:
        if lex[0].isalpha():
            parts.append(r"\b" + re.escape(lex) + r"\b")
        else:
            parts.append(re.escape(lex))
    return "|".join(parts)


def classify_comparator(token: str) -> str:
    token = " ".join(token.lower().split())
    for lexeme, kind in COMPARATORS:
        if token == lexeme:
            return kind
    raise ValueError(f"unknown comparator {token!r}")


class BoundGrammar:
    """Recognizes comparator-introduced numeric expressions with units or ULN multiples."""

    def __init__(self, unit_spellings=None, include_eq: bool = False):
        spellings = list(unit_spellings or DEFAULT_UNIT_SPELLINGS)
        spellings.sort(key=len, reverse=True)
        unit_alt = "|".join(re.escape(u) for u in spellings)
        expr = (
            rf"(?P<num>{NUMBER_RE})"
            rf"(?:\s*(?:(?P<uln>{ULN_EXPR_RE})|(?P<unit>{unit_alt})))?"
            rf"(?P<paren>\s*\(\s*(?:{NUMBER_RE})\s*(?:{unit_alt})?\s*\))?"
        )
        self.expr_re = re.compile(expr, re.IGNORECASE)
        self.bound_re = re.compile(
            rf"(?P<cmp>{_comparator_alternation(include_eq)})\s*" + expr, re.IGNORECASE
        )

    def iter_bounds(self, text: str):
        """Yield (start, end, entity_type) spans for bound expressions.

        The span covers the numeric expression only; the comparator token
        stays outside it, matching how bounds are quoted in criteria text.
        """
        for m in self.bound_re.finditer(text):
            kind = classify_comparator(m.group("cmp"))
            if kind in _LOWER_SIDE:
                entity_type = "lower_bound"
            elif kind in _UPPER_SIDE:
                entity_type = "upper_bound"
            else:
                continue
            yield m.start("num"), m.end(), entity_type


_DEFAULT_GRAMMAR = None


def default_grammar() -> BoundGrammar:
    global _DEFAULT_GRAMMAR
    if _DEFAULT_GRAMMAR is None:
        _DEFAULT_GRAMMAR = BoundGrammar()
    return _DEFAULT_GRAMMAR


def comparator_before(text: str, start: int) -> str | None:
    """Return the comparator kind of the token immediately preceding position start."""
    head = text[:start].rstrip()
    lowered = head.lower()
    best = None
    for lexeme, kind in COMPARATORS:
        if lowered.endswith(lexeme):
            if lexeme[0].isalpha():
                boundary = len(lowered) - len(lexeme) - 1
                if boundary >= 0 and (lowered[boundary].isalnum()):
                    continue
            if best is None or len(lexeme) > len(best[0]):
                best = (lexeme, kind)
    return best[1] if best else None


# ---------------------------------------------------------------------------
# Entity extraction
# ---------------------------------------------------------------------------


def extract_entities(
    sentence: CriterionSentence,
    lexicon: Lexicon,
    grammar: BoundGrammar | None = None,
) -> list[ExtractedEntity]:
    """Extract typed entities from one sentence, ordered by span start.

    Overlapping candidates are resolved longest-match-first, then leftmost,
    so "absolute neutrophil count" wins over a bare "neutrophil" entry.
    Sentences with no matches return an empty list.
    """
    grammar = grammar or default_grammar()
    text = sentence.text
    ref = SentenceRef(sentence.trial_id, sentence.section, sentence.ordinal)

    candidates = []
    for start, end, entry in lexicon.iter_matches(text):
        candidates.append((start, end, entry.entity_type))
    for start, end, entity_type in grammar.iter_bounds(text):
        candidates.append((start, end, entity_type))

    candidates.sort(key=lambda c: (-(c[1] - c[0]), c[0]))
    chosen: list[tuple[int, int, str]] = []
    for start, end, entity_type in candidates:
        if any(start < c_end and c_start < end for c_start, c_end, _ in chosen):
            continue
        chosen.append((start, end, entity_type))
    chosen.sort(key=lambda c: c[0])

    return [
        ExtractedEntity(
            sentence_ref=ref,
            start=start,
            end=end,
            entity_type=entity_type,
            raw_text=text[start:end],
        )
        for start, end, entity_type in chosen
    ]


# ---------------------------------------------------------------------------
# Variable/bound attachment
# ---------------------------------------------------------------------------


@dataclass
class VariableBounds:
    variable: ExtractedEntity
    bounds: list[ExtractedEntity] = field(default_factory=list)


@dataclass
class AttachResult:
    pairs: list[VariableBounds]
    unattached: list[ExtractedEntity]


def attach_bounds(entities: list[ExtractedEntity], text: str) -> AttachResult:
    """Attach each bound to the nearest preceding clinical variable in its clause.

    Clauses are the ';'-delimited stretches of the sentence text; a bound
    never attaches across a clause boundary. Bounds with no preceding
    variable in their clause are reported unattached.
    """
    semis = [i for i, ch in enumerate(text) if ch == ";"]

    def clause_of(pos: int) -> int:
        return bisect.bisect_right(semis, pos)

    pairs: list[VariableBounds] = []
    unattached: list[ExtractedEntity] = []
    current: tuple[int, VariableBounds] | None = None  # (clause, open variable)

    for entity in sorted(entities, key=lambda e: e.start):
        clause = clause_of(entity.start)
        if entity.entity_type == "clinical_variable":
            current = (clause, VariableBounds(variable=entity))
            pairs.append(current[1])
        elif entity.entity_type in ("lower_bound", "upper_bound"):
            if current is not None and current[0] == clause:
                current[1].bounds.append(entity)
            else:
                unattached.append(entity)
    return AttachResult(pairs=pairs, unattached=unattached)


# ---------------------------------------------------------------------------
# JSON-lines IO
# ---------------------------------------------------------------------------


def read_trials_jsonl(path):
    """Yield (line_number, record_dict) for each non-blank line."""
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            yield lineno, json.loads(line)


def write_entities_jsonl(entities, handle) -> None:
    for entity in entities:
        handle.write(json.dumps(entity.to_dict(), ensure_ascii=False) + "\n")
