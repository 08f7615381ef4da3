import json

import pytest
from click.testing import CliRunner

from trialfit.cli import main


@pytest.fixture()
def runner():
    return CliRunner()


def test_corpus_stats_table(runner):
    result = runner.invoke(main, ["corpus", "stats", "--type", "clinical_variable", "--top", "20"])
    assert result.exit_code == 0, result.output
    lines = result.output.strip().splitlines()
    assert lines[0] == "variable\tn_trials\tn_mentions"
    first = lines[1].split("\t")
    assert first[0] == "ecog"  # most common variable in the demo corpus
    assert int(first[1]) >= int(lines[-1].split("\t")[1])  # sorted by n_trials desc


def test_corpus_stats_top_k_limits(runner):
    result = runner.invoke(main, ["corpus", "stats", "--top", "3"])
    assert result.exit_code == 0
    assert len(result.output.strip().splitlines()) == 4  # header + 3


def test_corpus_extract_jsonl(runner, tmp_path):
    out = tmp_path / "entities.jsonl"
    result = runner.invoke(main, ["corpus", "extract", "--out", str(out)])
    assert result.exit_code == 0, result.output
    entities = [json.loads(line) for line in out.read_text().splitlines()]
    assert entities
    assert {"sentence_ref", "span", "entity_type", "raw_text"} <= set(entities[0])


def test_whatif_presets(runner):
    result = runner.invoke(main, ["whatif", "presets", "--grade", "2"])
    assert result.exit_code == 0
    body = json.loads(result.output)
    assert body["grade"] == "G2"
    assert body["thresholds"] == {"absolute neutrophil count": 1.0, "hemoglobin": 8.0}
    assert len(body["overrides"]) == 2


def test_synth_generate_deterministic(runner, tmp_path):
    a = runner.invoke(main, ["synth", "generate", "--seed", "7", "--n-patients", "50",
                             "--out", str(tmp_path / "a")])
    b = runner.invoke(main, ["synth", "generate", "--seed", "7", "--n-patients", "50",
                             "--out", str(tmp_path / "b")])
    assert a.exit_code == 0 and b.exit_code == 0
    assert (tmp_path / "a/labs.csv").read_bytes() == (tmp_path / "b/labs.csv").read_bytes()
    assert (tmp_path / "a/diagnoses.csv").read_bytes() == (tmp_path / "b/diagnoses.csv").read_bytes()


def test_cohort_eval_from_trial_text(runner, fixture_paths):
    result = runner.invoke(
        main,
        [
            "cohort", "eval",
            "--trial", "NCT02513394",
            "--diagnoses", str(fixture_paths[0]),
            "--labs", str(fixture_paths[1]),
            "--policy", "exclude",
        ],
    )
    assert result.exit_code == 0, result.output
    report = json.loads(result.output)
    assert report["scenario_label"] == "NCT02513394"
    assert 0 < report["sc_count"] <= report["tc_count"]
    assert len(report["attrition"]) == 5
    assert report["percent"].endswith("%")


def test_cohort_eval_criteria_file(runner, fixture_paths, tmp_path):
    criteria = {
        "icd_prefix": "C50",
        "index_period": {"start": "2009-01-01", "end": "2021-12-31"},
        "criteria": [
            {"variable": "hemoglobin", "lower": 10.0, "unit": "g/dL"},
        ],
    }
    path = tmp_path / "criteria.json"
    path.write_text(json.dumps(criteria))
    result = runner.invoke(
        main,
        [
            "cohort", "eval",
            "--trial", "NCT02513394",
            "--diagnoses", str(fixture_paths[0]),
            "--labs", str(fixture_paths[1]),
            "--criteria", str(path),
        ],
    )
    assert result.exit_code == 0, result.output
    report = json.loads(result.output)
    assert [step["criterion"] for step in report["attrition"]] == [
        "target",
        "hemoglobin >= 10 g/dL",
    ]


def test_whatif_eval_scenario_file(runner, fixture_paths, tmp_path):
    scenario = {
        "trial_id": "NCT02513394",
        "label": "g2-anc",
        "overrides": [
            {"variable": "absolute neutrophil count", "side": "lower", "value": 1.0}
        ],
    }
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(scenario))
    result = runner.invoke(
        main,
        [
            "whatif", "eval",
            "--scenario", str(path),
            "--diagnoses", str(fixture_paths[0]),
            "--labs", str(fixture_paths[1]),
        ],
    )
    assert result.exit_code == 0, result.output
    report = json.loads(result.output)
    assert report["scenario_label"] == "g2-anc"
    assert report["tc_count"] > 0


def test_unknown_trial_errors(runner, fixture_paths):
    result = runner.invoke(
        main,
        [
            "cohort", "eval",
            "--trial", "NCT11111111",
            "--diagnoses", str(fixture_paths[0]),
            "--labs", str(fixture_paths[1]),
        ],
    )
    assert result.exit_code != 0
