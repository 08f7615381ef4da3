"""Trial-corpus ingestion and eligibility-variable frequency ranking."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from importlib import resources

from . import criteria as cx
from .errors import EmptyCriteria, IngestError, InvalidParameter
from .normalize import canonicalize_name

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class VariableFrequency:
    variable: str
    entity_type: str
    n_trials: int
    n_mentions: int


class TrialCorpus:
    """An ordered, id-unique collection of trial records."""

    def __init__(self, trials: list[cx.TrialRecord]):
        self.trials = list(trials)
        self._by_id = {t.trial_id: t for t in self.trials}
        if len(self._by_id) != len(self.trials):
            raise IngestError("duplicate trial_id in corpus")

    def __len__(self) -> int:
        return len(self.trials)

    def __iter__(self):
        return iter(self.trials)

    def get(self, trial_id: str) -> cx.TrialRecord | None:
        return self._by_id.get(trial_id)


def ingest_trials(path) -> TrialCorpus:
    """Load a JSON-lines trial file, rejecting malformed records and duplicate ids."""
    trials: list[cx.TrialRecord] = []
    seen: set[str] = set()
    for lineno, record in _iter_records(path):
        try:
            trial = cx.TrialRecord.from_dict(record)
        except (ValueError, KeyError, TypeError) as err:
            raise IngestError(f"malformed trial record: {err}", line=lineno) from err
        if trial.trial_id in seen:
            raise IngestError(f"duplicate trial_id {trial.trial_id}", line=lineno)
        seen.add(trial.trial_id)
        trials.append(trial)
    log.info("ingested %d trials from %s", len(trials), path)
    return TrialCorpus(trials)


def _iter_records(path):
    for lineno, line in _numbered_lines(path):
        try:
            yield lineno, json.loads(line)
        except json.JSONDecodeError as err:
            raise IngestError(f"invalid JSON: {err}", line=lineno) from err


def _numbered_lines(path):
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if line.strip():
                yield lineno, line


def default_corpus() -> TrialCorpus:
    with resources.as_file(resources.files("trialfit").joinpath("data/demo_trials.jsonl")) as path:
        return ingest_trials(path)


def extract_corpus_entities(
    corpus: TrialCorpus,
    lexicon: cx.Lexicon,
    grammar: cx.BoundGrammar | None = None,
):
    """Yield every entity extracted from every criteria sentence of the corpus.

    Trials without any criteria text are skipped with a warning; ingest
    accepts them because the metadata is still valid.
    """
    for trial in corpus:
        try:
            sentences = cx.segment_criteria(trial)
        except EmptyCriteria:
            log.warning("trial %s has no criteria text; skipped", trial.trial_id)
            continue
        for sentence in sentences:
            yield from cx.extract_entities(sentence, lexicon, grammar)


def variable_frequency(
    corpus: TrialCorpus,
    entity_type: str,
    lexicon: cx.Lexicon,
    synonyms: dict[str, str],
    grammar: cx.BoundGrammar | None = None,
) -> list[VariableFrequency]:
    """Rank canonical variables of one entity type by the number of unique trials.

    A trial counts once per variable no matter how often it mentions it;
    mention totals are reported alongside. Ties in trial count break by
    variable name ascending so the ordering is total and reproducible.
    """
    if entity_type not in cx.ENTITY_TYPES:
        raise InvalidParameter(f"unknown entity type {entity_type!r}")
    trial_sets: dict[str, set[str]] = {}
    mentions: dict[str, int] = {}
    for entity in extract_corpus_entities(corpus, lexicon, grammar):
        if entity.entity_type != entity_type:
            continue
        name = canonicalize_name(
            lexicon.canonical_for(entity.raw_text) or entity.raw_text, synonyms
        )
        trial_sets.setdefault(name, set()).add(entity.sentence_ref.trial_id)
        mentions[name] = mentions.get(name, 0) + 1
    ranked = [
        VariableFrequency(
            variable=name,
            entity_type=entity_type,
            n_trials=len(trial_sets[name]),
            n_mentions=mentions[name],
        )
        for name in trial_sets
    ]
    ranked.sort(key=lambda f: (-f.n_trials, f.variable))
    return ranked


def common_variables(
    frequencies: list[VariableFrequency],
    top_k: int | None = None,
    min_support: int | None = None,
) -> list[str]:
    """Select the cohort-defining variable set from a frequency ranking."""
    if top_k is None and min_support is None:
        raise InvalidParameter("one of top_k or min_support is required")
    if top_k is not None and top_k <= 0:
        raise InvalidParameter(f"top_k must be positive, got {top_k}")
    if min_support is not None and min_support <= 0:
        raise InvalidParameter(f"min_support must be positive, got {min_support}")
    selected = list(frequencies)
    if min_support is not None:
        selected = [f for f in selected if f.n_trials >= min_support]
    if top_k is not None:
        selected = selected[:top_k]
    return [f.variable for f in selected]
