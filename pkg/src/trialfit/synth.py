"""Seeded synthetic diagnoses/labs generator.

Randomness comes from an explicitly specified generator rather than the
platform default so fixtures can be reproduced from the written-down
algorithm alone:

  * bit stream: SplitMix64 (Steele et al. mixing constants);
  * uniforms: top 53 bits of each 64-bit word, i.e. (word >> 11) * 2^-53;
  * integers in [0, n): word mod n;
  * normals: Box-Muller, z = sqrt(-2 ln(1 - u1)) * cos(2 pi u2), one normal
    per uniform pair (the sine mate is discarded);
  * lognormals: exp(mu + sigma * z).

Identical (seed, config) yields byte-identical CSV files on a given
platform; values are written with 4 decimal places.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from datetime import date, timedelta
from importlib import resources
from pathlib import Path

from .errors import ConfigError
from .normalize import UnitsTable, normalize_unit
from .patients import IndexPeriod

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """Deterministic 64-bit generator; see module docstring for the contract."""

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_uint64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        return (self.next_uint64() >> 11) * 2.0**-53

    def below(self, n: int) -> int:
        return self.next_uint64() % n

    def randint(self, lo: int, hi: int) -> int:
        return lo + self.below(hi - lo + 1)

    def normal(self, mean: float = 0.0, sd: float = 1.0) -> float:
        u1 = self.uniform()
        u2 = self.uniform()
        z = math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)
        return mean + sd * z

    def lognormal(self, mu: float, sigma: float) -> float:
        return math.exp(self.normal(mu, sigma))


@dataclass(frozen=True)
class VariableSpec:
    dist: str  # "normal" | "lognormal"
    params: dict

    def draw(self, rng: SplitMix64) -> float:
        if self.dist == "normal":
            return rng.normal(self.params["mean"], self.params["sd"])
        return rng.lognormal(self.params["mu"], self.params["sigma"])

    def cdf(self, x: float) -> float:
        """Closed-form CDF, for distribution checks."""
        if self.dist == "normal":
            z = (x - self.params["mean"]) / self.params["sd"]
        else:
            if x <= 0:
                return 0.0
            z = (math.log(x) - self.params["mu"]) / self.params["sigma"]
        return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


@dataclass
class PopulationConfig:
    seed: int
    n_patients: int
    icd_mix: dict[str, float]
    diagnoses_per_patient: tuple[int, int]
    labs_per_patient: tuple[int, int]
    date_range: IndexPeriod
    variables: dict[str, VariableSpec] = field(default_factory=dict)

    def validate(self) -> None:
        if self.n_patients <= 0:
            raise ConfigError(f"n_patients must be positive, got {self.n_patients}")
        if not self.icd_mix:
            raise ConfigError("icd_mix must not be empty")
        total = sum(self.icd_mix.values())
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(f"icd_mix probabilities sum to {total}, expected 1")
        if any(p < 0 for p in self.icd_mix.values()):
            raise ConfigError("icd_mix probabilities must be non-negative")
        for name, rng in (
            ("diagnoses_per_patient", self.diagnoses_per_patient),
            ("labs_per_patient", self.labs_per_patient),
        ):
            lo, hi = rng
            if lo < 0 or hi < lo:
                raise ConfigError(f"{name} range {rng} is invalid")
        for variable, spec in self.variables.items():
            if spec.dist not in ("normal", "lognormal"):
                raise ConfigError(f"{variable}: unknown distribution {spec.dist!r}")
            wanted = ("mean", "sd") if spec.dist == "normal" else ("mu", "sigma")
            for key in wanted:
                value = spec.params.get(key)
                if value is None or not math.isfinite(float(value)):
                    raise ConfigError(f"{variable}: parameter {key} missing or not finite")
            if spec.dist == "normal" and spec.params["sd"] <= 0:
                raise ConfigError(f"{variable}: sd must be positive")
            if spec.dist == "lognormal" and spec.params["sigma"] <= 0:
                raise ConfigError(f"{variable}: sigma must be positive")

    @classmethod
    def from_dict(cls, data: dict) -> "PopulationConfig":
        try:
            variables = {
                name: VariableSpec(
                    dist=spec["dist"],
                    params={k: float(v) for k, v in spec.items() if k != "dist"},
                )
                for name, spec in data.get("variables", {}).items()
            }
            config = cls(
                seed=int(data["seed"]),
                n_patients=int(data["n_patients"]),
                icd_mix={str(k): float(v) for k, v in data["icd_mix"].items()},
                diagnoses_per_patient=tuple(int(x) for x in data.get("diagnoses_per_patient", [1, 3])),
                labs_per_patient=tuple(int(x) for x in data.get("labs_per_patient", [1, 3])),
                date_range=IndexPeriod.from_dict(data["date_range"]),
                variables=variables,
            )
        except (KeyError, TypeError, ValueError) as err:
            raise ConfigError(f"bad population config: {err}") from err
        config.validate()
        return config

    @classmethod
    def load(cls, path) -> "PopulationConfig":
        with open(path, encoding="utf-8") as handle:
            return cls.from_dict(json.load(handle))

    @classmethod
    def default(cls, seed: int | None = None, n_patients: int | None = None) -> "PopulationConfig":
        text = resources.files("trialfit").joinpath("data/population.json").read_text("utf-8")
        data = json.loads(text)
        if seed is not None:
            data["seed"] = seed
        if n_patients is not None:
            data["n_patients"] = n_patients
        return cls.from_dict(data)


def _weighted_choice(rng: SplitMix64, items: list[tuple[str, float]]) -> str:
    u = rng.uniform()
    cumulative = 0.0
    for key, probability in items:
        cumulative += probability
        if u < cumulative:
            return key
    return items[-1][0]


def _random_day(rng: SplitMix64, start: date, end: date) -> date:
    span = (end - start).days
    return start + timedelta(days=rng.randint(0, span))


def generate(
    config: PopulationConfig,
    out_dir,
    units: UnitsTable | None = None,
) -> tuple[Path, Path]:
    """Write diagnoses.csv and labs.csv for the configured population.

    Lab rows are emitted in a mix of units drawn from the conversion table
    (canonical unit ~60% of the time) so downstream conversion is exercised.
    """
    config.validate()
    units = units or UnitsTable.default()
    rng = SplitMix64(config.seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    diagnoses_path = out / "diagnoses.csv"
    labs_path = out / "labs.csv"

    mix = sorted(config.icd_mix.items())
    start, end = config.date_range.start, config.date_range.end
    unit_choices = {
        variable: [units.canonical_unit[variable]]
        + [u for u in _variable_units(units, variable) if u != units.canonical_unit[variable]]
        for variable in config.variables
        if variable in units.canonical_unit
    }

    with open(diagnoses_path, "w", newline="", encoding="utf-8") as dfh, open(
        labs_path, "w", newline="", encoding="utf-8"
    ) as lfh:
        dwriter = csv.writer(dfh, lineterminator="\n")
        lwriter = csv.writer(lfh, lineterminator="\n")
        dwriter.writerow(["patient_id", "icd10_code", "diagnosis_date"])
        lwriter.writerow(["patient_id", "variable", "value", "unit", "lab_date"])

        for i in range(config.n_patients):
            pid = f"P{i:06d}"
            n_dx = rng.randint(*config.diagnoses_per_patient)
            for _ in range(n_dx):
                code = _weighted_choice(rng, mix)
                day = _random_day(rng, start, end)
                dwriter.writerow([pid, code, day.isoformat()])
            for variable, spec in config.variables.items():
                choices = unit_choices.get(variable)
                n_labs = rng.randint(*config.labs_per_patient)
                for _ in range(n_labs):
                    canonical_value = spec.draw(rng)
                    day = _random_day(rng, start, end)
                    if choices and len(choices) > 1 and rng.uniform() >= 0.6:
                        unit = choices[1 + rng.below(len(choices) - 1)]
                    elif choices:
                        unit = choices[0]
                    else:
                        unit = ""
                    raw = (
                        units.from_canonical(canonical_value, variable, unit)
                        if choices
                        else canonical_value
                    )
                    lwriter.writerow([pid, variable, f"{raw:.4f}", unit, day.isoformat()])
    return diagnoses_path, labs_path


def _variable_units(units: UnitsTable, variable: str) -> list[str]:
    # Spellings de-duplicated by normalized key, keeping first-listed display form.
    seen = set()
    result = []
    for spelling in units.spellings():
        if units.knows(variable, spelling):
            key = normalize_unit(spelling)
            if (variable, key) not in seen:
                seen.add((variable, key))
                result.append(spelling)
    return result
