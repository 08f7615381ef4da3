"""Command-line interface: corpus stats, cohort evaluation, what-if scenarios,
synthetic data generation, and the HTTP service."""

from __future__ import annotations

import json
import sys
import tempfile

import click

from . import whatif
from .corpus import common_variables, default_corpus, extract_corpus_entities, ingest_trials, variable_frequency
from .criteria import Lexicon, write_entities_jsonl
from .errors import TrialfitError
from .normalize import (
    ComputableCriterion,
    ULNTable,
    UnitsTable,
    default_synonyms,
    make_grammar,
    parse_trial,
)
from .patients import IndexPeriod, ingest_patients
from .service import OVERALL_PERIOD, build_state, serve
from .synth import PopulationConfig, generate


def _load_corpus(trials_path):
    return ingest_trials(trials_path) if trials_path else default_corpus()


def _load_lexicon(path):
    return Lexicon.load(path) if path else Lexicon.default()


def _load_tables(units_path, uln_path):
    units = UnitsTable.load(units_path) if units_path else UnitsTable.default()
    uln = ULNTable.load(uln_path) if uln_path else ULNTable.default()
    return units, uln


@click.group()
def main():
    """Eligibility-criteria parsing, cohort scoring, and what-if analysis."""


def run():
    try:
        main(standalone_mode=False)
    except TrialfitError as err:
        click.echo(f"error: {err}", err=True)
        sys.exit(1)
    except click.ClickException as err:
        err.show()
        sys.exit(err.exit_code)
    except click.exceptions.Abort:
        sys.exit(1)


# ---------------------------------------------------------------------------
# corpus
# ---------------------------------------------------------------------------


@main.group()
def corpus():
    """Trial corpus ingestion and variable frequencies."""


@corpus.command("stats")
@click.option("--trials", "trials_path", type=click.Path(exists=True), default=None,
              help="Trial JSON-lines file (bundled demo corpus when omitted).")
@click.option("--type", "entity_type", default="clinical_variable", show_default=True)
@click.option("--top", "top_k", type=int, default=None, help="Keep the top K variables.")
@click.option("--min-support", type=int, default=None, help="Keep variables in >= N trials.")
@click.option("--lexicon", "lexicon_path", type=click.Path(exists=True), default=None)
def corpus_stats(trials_path, entity_type, top_k, min_support, lexicon_path):
    """Rank eligibility variables by the number of unique trials mentioning them."""
    trial_set = _load_corpus(trials_path)
    lexicon = _load_lexicon(lexicon_path)
    frequencies = variable_frequency(trial_set, entity_type, lexicon, default_synonyms())
    if top_k is not None or min_support is not None:
        keep = set(common_variables(frequencies, top_k=top_k, min_support=min_support))
        frequencies = [f for f in frequencies if f.variable in keep]
    click.echo("variable\tn_trials\tn_mentions")
    for f in frequencies:
        click.echo(f"{f.variable}\t{f.n_trials}\t{f.n_mentions}")


@corpus.command("extract")
@click.option("--trials", "trials_path", type=click.Path(exists=True), default=None)
@click.option("--lexicon", "lexicon_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_path", type=click.Path(), default=None, help="Output JSONL (stdout when omitted).")
def corpus_extract(trials_path, lexicon_path, out_path):
    """Dump every extracted entity as JSON lines."""
    trial_set = _load_corpus(trials_path)
    lexicon = _load_lexicon(lexicon_path)
    grammar = make_grammar(UnitsTable.default())
    entities = extract_corpus_entities(trial_set, lexicon, grammar)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as handle:
            write_entities_jsonl(entities, handle)
    else:
        write_entities_jsonl(entities, sys.stdout)


# ---------------------------------------------------------------------------
# cohort
# ---------------------------------------------------------------------------


def _criteria_from_file(path):
    with open(path, encoding="utf-8") as handle:
        payload = json.load(handle)
    if isinstance(payload, list):
        payload = {"criteria": payload}
    criteria = [ComputableCriterion.from_dict(c) for c in payload["criteria"]]
    period = IndexPeriod.from_dict(payload["index_period"]) if payload.get("index_period") else None
    return criteria, payload.get("icd_prefix"), period


@main.group("cohort")
def cohort_group():
    """Cohort identification and generalizability scoring."""


@cohort_group.command("eval")
@click.option("--trial", "trial_id", required=True, help="Trial id used as the report label.")
@click.option("--trials", "trials_path", type=click.Path(exists=True), default=None)
@click.option("--diagnoses", required=True, type=click.Path(exists=True))
@click.option("--labs", required=True, type=click.Path(exists=True))
@click.option("--criteria", "criteria_path", type=click.Path(exists=True), default=None,
              help="Criteria JSON; parsed from the trial's criteria text when omitted.")
@click.option("--policy", type=click.Choice(["exclude", "include"]), default="exclude", show_default=True)
@click.option("--icd", "icd_prefix", default="C50", show_default=True)
def cohort_eval(trial_id, trials_path, diagnoses, labs, criteria_path, policy, icd_prefix):
    """Evaluate a criteria set against the patient store; print a JSON report."""
    units, uln = _load_tables(None, None)
    synonyms = default_synonyms()
    store, _ = ingest_patients(diagnoses, labs, units, synonyms)
    trial_set = _load_corpus(trials_path)
    trial = trial_set.get(trial_id)

    criteria, file_icd, period = (None, None, None)
    if criteria_path:
        criteria, file_icd, period = _criteria_from_file(criteria_path)
    if criteria is None:
        if trial is None:
            raise click.ClickException(
                f"trial {trial_id!r} not in corpus and no --criteria file given"
            )
        parsed = parse_trial(
            trial, Lexicon.default(), synonyms, units, uln, store.variables()
        )
        criteria = parsed.criteria
    if period is None:
        period = (
            whatif.trial_index_period(trial, OVERALL_PERIOD) if trial is not None else OVERALL_PERIOD
        )

    scenario = whatif.Scenario(
        label=trial_id,
        base=criteria,
        index_period=period,
        icd_prefix=file_icd or icd_prefix,
        missing_policy=policy,
    )
    report = whatif.evaluate_scenario(scenario, store, units)
    click.echo(json.dumps(report.to_dict(), indent=2))


# ---------------------------------------------------------------------------
# whatif
# ---------------------------------------------------------------------------


@main.group("whatif")
def whatif_group():
    """Scenario evaluation and presets."""


def _scenario_from_file(path, store, units, uln, trials_path):
    with open(path, encoding="utf-8") as handle:
        payload = json.load(handle)
    if "base" not in payload and "trial_id" in payload:
        trial_set = _load_corpus(trials_path)
        trial = trial_set.get(payload["trial_id"])
        if trial is None:
            raise click.ClickException(f"trial {payload['trial_id']!r} not in corpus")
        parsed = parse_trial(
            trial, Lexicon.default(), default_synonyms(), units, uln, store.variables()
        )
        payload = dict(payload)
        payload["base"] = [c.to_dict() for c in parsed.criteria]
        payload.setdefault(
            "index_period", whatif.trial_index_period(trial, OVERALL_PERIOD).to_dict()
        )
        payload.setdefault("label", payload["trial_id"])
    return whatif.Scenario.from_dict(payload)


@whatif_group.command("eval")
@click.option("--scenario", "scenario_path", required=True, type=click.Path(exists=True))
@click.option("--diagnoses", required=True, type=click.Path(exists=True))
@click.option("--labs", required=True, type=click.Path(exists=True))
@click.option("--trials", "trials_path", type=click.Path(exists=True), default=None)
def whatif_eval(scenario_path, diagnoses, labs, trials_path):
    """Evaluate a scenario file; print a JSON generalizability report.

    The file is either a full scenario (with "base" criteria) or carries a
    "trial_id" whose criteria text provides the base.
    """
    units, uln = _load_tables(None, None)
    store, _ = ingest_patients(diagnoses, labs, units, default_synonyms())
    scenario = _scenario_from_file(scenario_path, store, units, uln, trials_path)
    report = whatif.evaluate_scenario(scenario, store, units)
    click.echo(json.dumps(report.to_dict(), indent=2))


@whatif_group.command("presets")
@click.option("--grade", type=click.Choice(["1", "2"]), required=True)
def whatif_presets(grade):
    """Print the CTCAE-style grade preset thresholds as JSON overrides."""
    overrides = whatif.grade_preset_overrides(int(grade))
    click.echo(
        json.dumps(
            {
                "grade": f"G{grade}",
                "thresholds": whatif.GRADE_PRESETS[f"G{grade}"],
                "overrides": [o.to_dict() for o in overrides],
            },
            indent=2,
        )
    )


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------


@main.group("synth")
def synth_group():
    """Synthetic patient data."""


@synth_group.command("generate")
@click.option("--seed", type=int, default=None, help="Overrides the config's seed.")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--n-patients", type=int, default=None, help="Overrides the config's n_patients.")
@click.option("--out", "out_dir", required=True, type=click.Path())
def synth_generate(seed, config_path, n_patients, out_dir):
    """Generate diagnoses.csv and labs.csv (deterministic for a fixed seed)."""
    if config_path:
        with open(config_path, encoding="utf-8") as handle:
            data = json.load(handle)
        if seed is not None:
            data["seed"] = seed
        if n_patients is not None:
            data["n_patients"] = n_patients
        config = PopulationConfig.from_dict(data)
    else:
        config = PopulationConfig.default(seed=seed, n_patients=n_patients)
    diagnoses_path, labs_path = generate(config, out_dir)
    click.echo(json.dumps({
        "diagnoses": str(diagnoses_path),
        "labs": str(labs_path),
        "seed": config.seed,
        "n_patients": config.n_patients,
    }))


# ---------------------------------------------------------------------------
# serve
# ---------------------------------------------------------------------------


@main.command("serve")
@click.option("--diagnoses", type=click.Path(exists=True), default=None)
@click.option("--labs", type=click.Path(exists=True), default=None)
@click.option("--trials", "trials_path", type=click.Path(exists=True), default=None)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--synth-seed", type=int, default=None,
              help="Bootstrap from generated data instead of CSV files.")
@click.option("--synth-patients", type=int, default=2000, show_default=True)
@click.option("--ui-dir", type=click.Path(exists=True), default=None,
              help="Serve a built dashboard from this directory.")
def serve_cmd(diagnoses, labs, trials_path, host, port, synth_seed, synth_patients, ui_dir):
    """Run the what-if HTTP JSON API."""
    if synth_seed is not None:
        tmp = tempfile.mkdtemp(prefix="trialfit-synth-")
        config = PopulationConfig.default(seed=synth_seed, n_patients=synth_patients)
        diagnoses, labs = generate(config, tmp)
        click.echo(f"generated synthetic store (seed={synth_seed}, n={synth_patients}) in {tmp}")
    if not diagnoses or not labs:
        raise click.ClickException("provide --diagnoses/--labs or --synth-seed")
    state = build_state(diagnoses, labs, trials_path)
    serve(state, host=host, port=port, ui_dir=ui_dir)


if __name__ == "__main__":
    run()
