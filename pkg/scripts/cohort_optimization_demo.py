#!/usr/bin/env python3
"""End-to-end demo: build a seeded synthetic store, parse the demo trial's
criteria text, and compare the base design against the two broadened designs
(ANC lowered to 1.0, then hemoglobin lowered to 8).

Usage: python scripts/cohort_optimization_demo.py [--patients 10000] [--seed 42]
"""

import argparse
import tempfile

from trialfit import whatif
from trialfit.corpus import default_corpus
from trialfit.criteria import Lexicon
from trialfit.normalize import ULNTable, UnitsTable, default_synonyms, parse_trial
from trialfit.patients import ingest_patients
from trialfit.service import OVERALL_PERIOD
from trialfit.synth import PopulationConfig, generate

TRIAL_ID = "NCT02513394"


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--patients", type=int, default=10000)
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args()

    units, uln, synonyms = UnitsTable.default(), ULNTable.default(), default_synonyms()

    out_dir = tempfile.mkdtemp(prefix="trialfit-demo-")
    config = PopulationConfig.default(seed=args.seed, n_patients=args.patients)
    diagnoses, labs = generate(config, out_dir)
    store, report = ingest_patients(diagnoses, labs, units, synonyms)
    print(f"synthetic store: {report.n_patients} patients "
          f"({report.diagnoses_rows} diagnoses, {report.labs_rows} labs) in {out_dir}")

    trial = default_corpus().get(TRIAL_ID)
    parsed = parse_trial(trial, Lexicon.default(), synonyms, units, uln, store.variables())
    print(f"\n{TRIAL_ID} computable criteria:")
    for criterion in parsed.criteria:
        print(f"  - {criterion.describe()}")
    for nc in parsed.non_computable:
        print(f"  (filtered: {nc.variable}, {nc.reason})")

    period = whatif.trial_index_period(trial, OVERALL_PERIOD)
    scenarios = [
        whatif.Scenario(label="real trial", base=parsed.criteria, index_period=period),
        whatif.Scenario(
            label="simulated 1 (ANC >= 1.0)", base=parsed.criteria, index_period=period,
            overrides=[whatif.Override("absolute neutrophil count", "lower", 1.0)],
        ),
        whatif.Scenario(
            label="simulated 2 (ANC >= 1.0, Hgb >= 8)", base=parsed.criteria,
            index_period=period, overrides=whatif.grade_preset_overrides(2),
        ),
    ]
    reports = [whatif.evaluate_scenario(s, store, units) for s in scenarios]
    rows = whatif.compare(reports)

    print(f"\n{'design':<34} {'study':>8} {'target':>8} {'score':>8} {'delta':>8}")
    for row in rows:
        print(f"{row.label:<34} {row.sc_count:>8} {row.tc_count:>8} {row.percent:>8} {row.delta:>8}")

    print("\nattrition (base design):")
    for step in reports[0].attrition:
        print(f"  {step.remaining:>8}  {step.criterion}")


if __name__ == "__main__":
    main()
