#!/usr/bin/env python3
"""Regenerate the checked-in 1,000-patient fixture store (tests/fixtures).

The output is byte-deterministic for the default config (seed 42), so this
only produces a diff if the generator or the default population config
changed — in which case the fixture and any frozen expectations need review.
"""

from pathlib import Path

from trialfit.synth import PopulationConfig, generate

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def main() -> None:
    diagnoses, labs = generate(PopulationConfig.default(), FIXTURES)
    print(f"wrote {diagnoses}")
    print(f"wrote {labs}")


if __name__ == "__main__":
    main()
