"""HTTP JSON API for what-if analysis; the dashboard's only data source.

All endpoints are read-only over an immutable store, so concurrent scenario
evaluations are safe. Domain errors map to 400 responses carrying the error
class name so clients can render inline messages.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from datetime import date

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import whatif
from .corpus import TrialCorpus, default_corpus, ingest_trials
from .criteria import BoundGrammar, Lexicon
from .errors import (
    EmptyTargetCohort,
    IncomparableScenarios,
    InvalidParameter,
    InvalidScenario,
)
from .normalize import ULNTable, UnitsTable, default_synonyms, make_grammar, parse_trial
from .patients import IndexPeriod, PatientStore, ingest_patients

log = logging.getLogger(__name__)

# Corpus-level default window; trial enrollment dates tighten it per scenario.
OVERALL_PERIOD = IndexPeriod(start=date(2009, 1, 1), end=date(2021, 12, 31))

_DOMAIN_ERRORS = (InvalidScenario, InvalidParameter, IncomparableScenarios, EmptyTargetCohort)


@dataclass
class ServiceState:
    store: PatientStore
    corpus: TrialCorpus
    lexicon: Lexicon
    synonyms: dict[str, str]
    units: UnitsTable
    uln: ULNTable
    grammar: BoundGrammar
    default_period: IndexPeriod = OVERALL_PERIOD
    default_icd_prefix: str = "C50"
    lookback_years: int = whatif.DEFAULT_LOOKBACK_YEARS
    scenario_cache: dict = field(default_factory=dict)


def build_state(
    diagnoses_path,
    labs_path,
    trials_path=None,
    lexicon: Lexicon | None = None,
    units: UnitsTable | None = None,
    uln: ULNTable | None = None,
    synonyms: dict[str, str] | None = None,
    default_icd_prefix: str = "C50",
) -> ServiceState:
    units = units or UnitsTable.default()
    lexicon = lexicon or Lexicon.default()
    synonyms = synonyms if synonyms is not None else default_synonyms()
    store, _report = ingest_patients(diagnoses_path, labs_path, units, synonyms)
    corpus = ingest_trials(trials_path) if trials_path else default_corpus()
    return ServiceState(
        store=store,
        corpus=corpus,
        lexicon=lexicon,
        synonyms=synonyms,
        units=units,
        uln=uln or ULNTable.default(),
        grammar=make_grammar(units),
        default_icd_prefix=default_icd_prefix,
    )


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="trialfit what-if service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.trialfit = state

    @app.exception_handler(Exception)
    async def _domain_error(request: Request, exc: Exception):
        if isinstance(exc, _DOMAIN_ERRORS):
            return JSONResponse(
                status_code=400,
                content={"error": type(exc).__name__, "detail": str(exc)},
            )
        log.exception("unhandled error on %s", request.url.path)
        return JSONResponse(status_code=500, content={"error": "InternalError", "detail": str(exc)})

    @app.get("/variables")
    def variables():
        rows = []
        for name in sorted(state.store.variables()):
            observed = state.store.observed_range(name)
            rows.append(
                {
                    "name": name,
                    "canonical_unit": state.units.canonical_unit.get(name, ""),
                    "observed_min": observed[0] if observed else None,
                    "observed_max": observed[1] if observed else None,
                    "uln": state.uln.values.get(name),
                }
            )
        return {
            "variables": rows,
            "n_patients": len(state.store),
            "missing_policies": ["exclude", "include"],
            "grade_presets": whatif.GRADE_PRESETS,
            "default_icd_prefix": state.default_icd_prefix,
            "default_index_period": state.default_period.to_dict(),
            "trials": [t.trial_id for t in state.corpus],
        }

    @app.get("/trials/{trial_id}/criteria")
    def trial_criteria(trial_id: str, include_exclusion: bool = False):
        trial = state.corpus.get(trial_id)
        if trial is None:
            return JSONResponse(
                status_code=404,
                content={"error": "UnknownTrial", "detail": f"no trial {trial_id!r} in corpus"},
            )
        parsed = parse_trial(
            trial,
            lexicon=state.lexicon,
            synonyms=state.synonyms,
            units=state.units,
            uln=state.uln,
            available=state.store.variables(),
            include_exclusion=include_exclusion,
            grammar=state.grammar,
        )
        period = whatif.trial_index_period(trial, state.default_period, state.lookback_years)
        return {
            "trial_id": trial.trial_id,
            "title": trial.title,
            "criteria": [c.to_dict() for c in parsed.criteria],
            "non_computable": [nc.to_dict() for nc in parsed.non_computable],
            "unattached_bounds": parsed.unattached_bounds,
            "icd_prefix": state.default_icd_prefix,
            "index_period": period.to_dict(),
            "missing_policy": "exclude",
        }

    @app.post("/scenarios/evaluate")
    def evaluate(payload: dict):
        scenario = whatif.Scenario.from_dict(payload)
        key = scenario.content_hash()
        if key not in state.scenario_cache:
            report = whatif.evaluate_scenario(scenario, state.store, state.units)
            state.scenario_cache[key] = report.to_dict()
        return state.scenario_cache[key]

    @app.post("/scenarios/compare")
    def compare_scenarios(payload: dict):
        raw = payload.get("scenarios")
        if not isinstance(raw, list):
            raise InvalidParameter('payload must carry a "scenarios" list')
        reports = [
            whatif.evaluate_scenario(whatif.Scenario.from_dict(entry), state.store, state.units)
            for entry in raw
        ]
        rows = whatif.compare(reports)
        return {"rows": [r.to_dict() for r in rows], "reports": [r.to_dict() for r in reports]}

    return app


def serve(state: ServiceState, host: str = "127.0.0.1", port: int = 8000, ui_dir=None) -> None:
    import uvicorn

    app = create_app(state)
    if ui_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    uvicorn.run(app, host=host, port=port, log_level="info")
