from pathlib import Path

import pytest

from trialfit.corpus import default_corpus
from trialfit.criteria import Lexicon
from trialfit.normalize import ULNTable, UnitsTable, default_synonyms, make_grammar, parse_trial
from trialfit.patients import ingest_patients
from trialfit.synth import PopulationConfig, generate

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def units():
    return UnitsTable.default()


@pytest.fixture(scope="session")
def uln():
    return ULNTable.default()


@pytest.fixture(scope="session")
def synonyms():
    return default_synonyms()


@pytest.fixture(scope="session")
def lexicon():
    return Lexicon.default()


@pytest.fixture(scope="session")
def grammar(units):
    return make_grammar(units)


@pytest.fixture(scope="session")
def fixture_paths():
    return FIXTURES / "diagnoses.csv", FIXTURES / "labs.csv"


@pytest.fixture(scope="session")
def ingest_1k(fixture_paths, units, synonyms):
    return ingest_patients(*fixture_paths, units, synonyms)


@pytest.fixture(scope="session")
def store_1k(ingest_1k):
    return ingest_1k[0]


@pytest.fixture(scope="session")
def store_10k_paths(tmp_path_factory):
    out = tmp_path_factory.mktemp("store10k")
    config = PopulationConfig.default(seed=42, n_patients=10000)
    return generate(config, out)


@pytest.fixture(scope="session")
def store_10k(store_10k_paths, units, synonyms):
    store, _report = ingest_patients(*store_10k_paths, units, synonyms)
    return store


@pytest.fixture(scope="session")
def demo_corpus():
    return default_corpus()


@pytest.fixture(scope="session")
def nct_trial(demo_corpus):
    return demo_corpus.get("NCT02513394")


@pytest.fixture(scope="session")
def synth_variables():
    return set(PopulationConfig.default().variables)


@pytest.fixture(scope="session")
def nct_criteria(nct_trial, lexicon, synonyms, units, uln, grammar, synth_variables):
    parsed = parse_trial(
        nct_trial, lexicon, synonyms, units, uln, synth_variables, grammar=grammar
    )
    assert len(parsed.criteria) == 4
    return parsed.criteria
