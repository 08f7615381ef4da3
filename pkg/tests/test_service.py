import pytest
from fastapi.testclient import TestClient

from trialfit import whatif
from trialfit.service import build_state, create_app


@pytest.fixture(scope="module")
def client(fixture_paths):
    state = build_state(*fixture_paths)
    return TestClient(create_app(state), raise_server_exceptions=False)


@pytest.fixture(scope="module")
def base_payload(client):
    spec = client.get("/trials/NCT02513394/criteria").json()
    return {
        "label": "base",
        "base": spec["criteria"],
        "overrides": [],
        "index_period": spec["index_period"],
        "icd_prefix": spec["icd_prefix"],
        "missing_policy": "exclude",
    }


def test_variables_listing(client):
    body = client.get("/variables").json()
    names = [v["name"] for v in body["variables"]]
    assert names == sorted(names)
    assert set(names) == {
        "absolute neutrophil count",
        "alt",
        "ast",
        "creatinine",
        "hemoglobin",
        "platelets",
        "total bilirubin",
    }
    by_name = {v["name"]: v for v in body["variables"]}
    assert by_name["absolute neutrophil count"]["canonical_unit"] == "10^9/L"
    assert by_name["hemoglobin"]["observed_min"] < by_name["hemoglobin"]["observed_max"]
    assert by_name["total bilirubin"]["uln"] == 1.2
    assert body["n_patients"] == 1000
    assert body["grade_presets"]["G2"]["hemoglobin"] == 8.0


def test_trial_criteria_endpoint(client):
    body = client.get("/trials/NCT02513394/criteria").json()
    assert body["trial_id"] == "NCT02513394"
    assert [c["variable"] for c in body["criteria"]] == [
        "absolute neutrophil count",
        "hemoglobin",
        "total bilirubin",
        "ast",
    ]
    anc, hgb, bili, ast = body["criteria"]
    assert anc["lower"] == 1.5 and hgb["lower"] == 10.0
    assert bili["upper"] == 3.6 and ast["upper"] == 36.0
    assert {nc["variable"] for nc in body["non_computable"]} == {"ecog"}
    assert body["index_period"]["enrollment_start"] == "2015-08-26"
    assert body["index_period"]["lookback_years"] == 2


def test_unknown_trial_404(client):
    response = client.get("/trials/NCT99999999/criteria")
    assert response.status_code == 404
    assert response.json()["error"] == "UnknownTrial"


def test_evaluate_matches_library(client, base_payload, store_1k, units):
    response = client.post("/scenarios/evaluate", json=base_payload)
    assert response.status_code == 200
    body = response.json()
    direct = whatif.evaluate_scenario(
        whatif.Scenario.from_dict(base_payload), store_1k, units
    )
    assert body["sc_count"] == direct.sc_count
    assert body["tc_count"] == direct.tc_count
    assert body["percent"] == direct.percent
    assert body["scenario_hash"] == direct.scenario_hash
    assert [step["criterion"] for step in body["attrition"]][0] == "target"
    assert len(body["attrition"]) == 5


def test_evaluate_cached_identical(client, base_payload):
    first = client.post("/scenarios/evaluate", json=base_payload).json()
    second = client.post("/scenarios/evaluate", json=base_payload).json()
    assert first == second


def test_relaxed_scenario_scores_higher(client, base_payload):
    base = client.post("/scenarios/evaluate", json=base_payload).json()
    relaxed_payload = dict(base_payload)
    relaxed_payload["label"] = "g2-anc"
    relaxed_payload["overrides"] = [
        {"variable": "absolute neutrophil count", "side": "lower", "value": 1.0}
    ]
    relaxed = client.post("/scenarios/evaluate", json=relaxed_payload).json()
    assert relaxed["score"] >= base["score"]


def test_invalid_scenario_400(client, base_payload):
    bad = dict(base_payload)
    bad["overrides"] = [{"variable": "hemoglobin", "side": "lower", "value": 1e9}]
    bad["base"] = [
        {"variable": "hemoglobin", "lower": 10.0, "upper": 15.0, "unit": "g/dL"}
    ]
    response = client.post("/scenarios/evaluate", json=bad)
    assert response.status_code == 400
    assert response.json()["error"] == "InvalidScenario"


def test_malformed_payload_400(client):
    response = client.post("/scenarios/evaluate", json={"label": "nope"})
    assert response.status_code == 400
    assert response.json()["error"] == "InvalidScenario"


def test_compare_endpoint(client, base_payload):
    g2_anc = dict(base_payload, label="g2-anc",
                  overrides=[{"variable": "absolute neutrophil count", "side": "lower", "value": 1.0}])
    g2_both = dict(base_payload, label="g2-anc-hgb",
                   overrides=[
                       {"variable": "absolute neutrophil count", "side": "lower", "value": 1.0},
                       {"variable": "hemoglobin", "side": "lower", "value": 8.0},
                   ])
    response = client.post(
        "/scenarios/compare", json={"scenarios": [base_payload, g2_anc, g2_both]}
    )
    assert response.status_code == 200
    rows = response.json()["rows"]
    assert [r["label"] for r in rows] == ["base", "g2-anc", "g2-anc-hgb"]
    assert len({r["tc_count"] for r in rows}) == 1
    scores = [r["score"] for r in rows]
    assert scores == sorted(scores)
    assert rows[0]["delta"] == "+0.00%"
    assert all(r["delta"].startswith("+") for r in rows[1:])


def test_compare_mismatched_targets_400(client, base_payload):
    other = dict(base_payload, label="asthma", icd_prefix="J45")
    response = client.post("/scenarios/compare", json={"scenarios": [base_payload, other]})
    assert response.status_code == 400
    assert response.json()["error"] == "IncomparableScenarios"


def test_compare_needs_two(client, base_payload):
    response = client.post("/scenarios/compare", json={"scenarios": [base_payload]})
    assert response.status_code == 400
    assert response.json()["error"] == "InvalidParameter"
