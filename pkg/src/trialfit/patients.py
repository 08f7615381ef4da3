"""Patient store: diagnoses + labs ingestion, index-period rules, and the
relational patient model (one vector of computable variables per patient).

The store is immutable after ingestion; lab values are converted into each
variable's canonical unit at load so queries never re-touch units.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from datetime import date

import numpy as np

from .cohort import Cohort
from .errors import IngestError, InvalidParameter
from .normalize import UnitsTable, canonicalize_name

log = logging.getLogger(__name__)

DIAGNOSES_HEADER = ["patient_id", "icd10_code", "diagnosis_date"]
LABS_HEADER = ["patient_id", "variable", "value", "unit", "lab_date"]

POLICIES = ("most_recent", "mean", "min", "max")


def years_before(day: date, years: int) -> date:
    """Calendar-year subtraction; Feb 29 clamps to Feb 28."""
    try:
        return day.replace(year=day.year - years)
    except ValueError:
        return day.replace(year=day.year - years, day=28)


@dataclass(frozen=True)
class IndexPeriod:
    """Calendar window for diagnoses and labs, optionally tied to a trial's
    enrollment window with a lookback from enrollment start."""

    start: date
    end: date
    enrollment_start: date | None = None
    enrollment_end: date | None = None
    lookback_years: int | None = None

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError(f"period start {self.start} after end {self.end}")

    def diagnosis_window(self) -> tuple[int, int, int | None]:
        """(lowest ordinal, highest ordinal, exclusive enrollment-end ordinal).

        The lower bound is period.start, tightened to enrollment_start minus
        the lookback when both are given; enrollment_end is exclusive.
        """
        low = self.start.toordinal()
        if self.enrollment_start is not None and self.lookback_years is not None:
            low = max(low, years_before(self.enrollment_start, self.lookback_years).toordinal())
        exclusive_end = self.enrollment_end.toordinal() if self.enrollment_end else None
        return low, self.end.toordinal(), exclusive_end

    def to_dict(self) -> dict:
        return {
            "start": self.start.isoformat(),
            "end": self.end.isoformat(),
            "enrollment_start": self.enrollment_start.isoformat() if self.enrollment_start else None,
            "enrollment_end": self.enrollment_end.isoformat() if self.enrollment_end else None,
            "lookback_years": self.lookback_years,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "IndexPeriod":
        def parse(value):
            return date.fromisoformat(value) if value else None

        return cls(
            start=date.fromisoformat(data["start"]),
            end=date.fromisoformat(data["end"]),
            enrollment_start=parse(data.get("enrollment_start")),
            enrollment_end=parse(data.get("enrollment_end")),
            lookback_years=data.get("lookback_years"),
        )


@dataclass(frozen=True)
class Diagnosis:
    icd10_code: str
    diagnosis_date: date


@dataclass(frozen=True)
class LabResult:
    variable: str
    value: float
    unit: str
    lab_date: date


@dataclass(frozen=True)
class PatientRecord:
    patient_id: str
    diagnoses: tuple[Diagnosis, ...]
    labs: tuple[LabResult, ...]


@dataclass(frozen=True)
class PatientVector:
    patient_id: str
    values: dict[str, float]
    resolved_dates: dict[str, date]


@dataclass
class IngestReport:
    diagnoses_rows: int = 0
    diagnoses_rejected: int = 0
    labs_rows: int = 0
    labs_rejected: int = 0
    reject_reasons: dict[str, int] = field(default_factory=dict)
    n_patients: int = 0

    def count_reject(self, reason: str) -> None:
        self.reject_reasons[reason] = self.reject_reasons.get(reason, 0) + 1


def _norm_code(code: str) -> str:
    return code.replace(".", "").upper()


class _LabSeries:
    """All measurements of one variable, sorted by (patient, date, load order)."""

    def __init__(self):
        self.rows: list[tuple[int, int, float, float, str]] = []  # pidx, date, canonical, raw, unit
        self.pidx = self.dates = self.values = None
        self.raw = []

    def finalize(self):
        order = sorted(range(len(self.rows)), key=lambda i: (self.rows[i][0], self.rows[i][1], i))
        self.rows = [self.rows[i] for i in order]
        self.pidx = np.array([r[0] for r in self.rows], dtype=np.int64)
        self.dates = np.array([r[1] for r in self.rows], dtype=np.int64)
        self.values = np.array([r[2] for r in self.rows], dtype=np.float64)


class VectorTable:
    """Patient vectors for one (variables, period, policy) resolution,
    aligned to the store's patient order for vectorized filtering."""

    def __init__(self, store: "PatientStore", variables: tuple[str, ...], columns, dates):
        self._store = store
        self.variables = variables
        self._columns = columns  # var -> (values ndarray, present ndarray)
        self._dates = dates  # var -> ordinal ndarray

    def column(self, variable: str):
        if variable in self._columns:
            return self._columns[variable]
        empty = np.zeros(len(self._store), dtype=np.float64)
        return empty, np.zeros(len(self._store), dtype=bool)

    def target_indices(self, patient_ids: frozenset[str]):
        """Store-order indices (and ids) of the given patients."""
        ids = self._store.patient_ids
        idx = np.fromiter(
            (i for i, pid in enumerate(ids) if pid in patient_ids), dtype=np.int64
        )
        return idx, [ids[i] for i in idx]

    def get(self, patient_id: str) -> PatientVector | None:
        idx = self._store.index_of(patient_id)
        if idx is None:
            return None
        values, dates = {}, {}
        for variable in self.variables:
            column_values, present = self.column(variable)
            if present[idx]:
                values[variable] = float(column_values[idx])
                dates[variable] = date.fromordinal(int(self._dates[variable][idx]))
        return PatientVector(patient_id=patient_id, values=values, resolved_dates=dates)


class PatientStore:
    """Read-only after ingestion; all queries are deterministic."""

    def __init__(self):
        self.patient_ids: list[str] = []
        self._index: dict[str, int] = {}
        self._diag_rows: list[tuple[int, str, int]] = []  # pidx, normalized code, ordinal date
        self._diag_raw: list[tuple[int, str, int]] = []  # pidx, original code, ordinal date
        self._labs: dict[str, _LabSeries] = {}
        self._finalized = False
        self._diag_pidx = self._diag_dates = None
        self._diag_codes = None
        # Query memos; safe because the store is immutable once finalized.
        self._cohort_cache: dict = {}
        self._vector_cache: dict = {}

    def __len__(self) -> int:
        return len(self.patient_ids)

    def index_of(self, patient_id: str) -> int | None:
        return self._index.get(patient_id)

    def _pidx(self, patient_id: str) -> int:
        if patient_id not in self._index:
            self._index[patient_id] = len(self.patient_ids)
            self.patient_ids.append(patient_id)
        return self._index[patient_id]

    def add_diagnosis(self, patient_id: str, code: str, day: date) -> None:
        assert not self._finalized, "store is immutable after ingestion"
        pidx = self._pidx(patient_id)
        self._diag_rows.append((pidx, _norm_code(code), day.toordinal()))
        self._diag_raw.append((pidx, code, day.toordinal()))

    def add_lab(self, patient_id: str, variable: str, canonical_value: float,
                raw_value: float, unit: str, day: date) -> None:
        assert not self._finalized, "store is immutable after ingestion"
        pidx = self._pidx(patient_id)
        series = self._labs.setdefault(variable, _LabSeries())
        series.rows.append((pidx, day.toordinal(), canonical_value, raw_value, unit))

    def finalize(self) -> None:
        for series in self._labs.values():
            series.finalize()
        self._diag_pidx = np.array([r[0] for r in self._diag_rows], dtype=np.int64)
        self._diag_dates = np.array([r[2] for r in self._diag_rows], dtype=np.int64)
        codes = [r[1] for r in self._diag_rows]
        self._diag_codes = np.array(codes, dtype="U16") if codes else np.array([], dtype="U16")
        self._finalized = True

    # -- introspection -----------------------------------------------------

    def variables(self) -> set[str]:
        return set(self._labs)

    def observed_range(self, variable: str) -> tuple[float, float] | None:
        series = self._labs.get(variable)
        if series is None or len(series.values) == 0:
            return None
        return float(series.values.min()), float(series.values.max())

    def patient(self, patient_id: str) -> PatientRecord | None:
        idx = self.index_of(patient_id)
        if idx is None:
            return None
        diagnoses = tuple(
            Diagnosis(code, date.fromordinal(day))
            for pidx, code, day in self._diag_raw
            if pidx == idx
        )
        labs = []
        for variable, series in sorted(self._labs.items()):
            for pidx, day, _canonical, raw, unit in series.rows:
                if pidx == idx:
                    labs.append(LabResult(variable, raw, unit, date.fromordinal(day)))
        return PatientRecord(patient_id=patient_id, diagnoses=diagnoses, labs=tuple(labs))

    # -- cohort + vector queries -------------------------------------------

    def target_cohort(self, icd_prefix: str, period: IndexPeriod) -> Cohort:
        """Patients whose diagnoses match the (dot-insensitive) ICD-10 prefix
        and whose last matching diagnosis date falls in the period's
        diagnosis window."""
        if not icd_prefix or not icd_prefix.strip():
            raise InvalidParameter("icd_prefix must be non-empty")
        prefix = _norm_code(icd_prefix.strip())
        cache_key = (prefix, period)
        if cache_key in self._cohort_cache:
            return self._cohort_cache[cache_key]
        low, high, exclusive_end = period.diagnosis_window()

        last = np.full(len(self.patient_ids), -1, dtype=np.int64)
        if len(self._diag_codes):
            match = np.char.startswith(self._diag_codes, prefix)
            np.maximum.at(last, self._diag_pidx[match], self._diag_dates[match])

        included = (last >= low) & (last <= high)
        if exclusive_end is not None:
            included &= last < exclusive_end
        ids = frozenset(pid for pid, ok in zip(self.patient_ids, included) if ok)
        cohort = Cohort(label=f"target:{icd_prefix.strip()}", patient_ids=ids)
        self._cohort_cache[cache_key] = cohort
        return cohort

    def resolve_vectors(
        self,
        variables,
        period: IndexPeriod,
        policy: str = "most_recent",
    ) -> VectorTable:
        """Resolve one value per (patient, variable) over the index period.

        most_recent takes the latest in-period measurement (ties broken by
        load order); mean/min/max aggregate all in-period measurements. The
        resolved date is always the latest contributing measurement date.
        """
        if policy not in POLICIES:
            raise InvalidParameter(f"policy must be one of {POLICIES}")
        cache_key = (tuple(variables), period, policy)
        if cache_key in self._vector_cache:
            return self._vector_cache[cache_key]
        low, high = period.start.toordinal(), period.end.toordinal()
        n = len(self.patient_ids)
        columns, dates = {}, {}
        for variable in variables:
            series = self._labs.get(variable)
            values = np.zeros(n, dtype=np.float64)
            resolved = np.zeros(n, dtype=np.int64)
            present = np.zeros(n, dtype=bool)
            if series is not None and len(series.pidx):
                in_period = (series.dates >= low) & (series.dates <= high)
                rows = np.nonzero(in_period)[0]
                if len(rows):
                    pidx = series.pidx[rows]
                    # rows are sorted by (patient, date, load order): the last
                    # row of each patient group is the most recent value.
                    tail = np.append(pidx[1:] != pidx[:-1], True)
                    tail_rows = rows[tail]
                    present[pidx[tail]] = True
                    resolved[pidx[tail]] = series.dates[tail_rows]
                    if policy == "most_recent":
                        values[pidx[tail]] = series.values[tail_rows]
                    elif policy == "mean":
                        sums = np.zeros(n)
                        counts = np.zeros(n)
                        np.add.at(sums, pidx, series.values[rows])
                        np.add.at(counts, pidx, 1.0)
                        values[present] = sums[present] / counts[present]
                    elif policy == "min":
                        acc = np.full(n, np.inf)
                        np.minimum.at(acc, pidx, series.values[rows])
                        values[present] = acc[present]
                    else:
                        acc = np.full(n, -np.inf)
                        np.maximum.at(acc, pidx, series.values[rows])
                        values[present] = acc[present]
            columns[variable] = (values, present)
            dates[variable] = resolved
        table = VectorTable(self, tuple(variables), columns, dates)
        self._vector_cache[cache_key] = table
        return table

    def resolve_vector(
        self,
        patient_id: str,
        variables,
        period: IndexPeriod,
        policy: str = "most_recent",
    ) -> PatientVector:
        vector = self.resolve_vectors(variables, period, policy).get(patient_id)
        if vector is None:
            return PatientVector(patient_id=patient_id, values={}, resolved_dates={})
        return vector


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------


def _open_csv(path, required: list[str]):
    handle = open(path, newline="", encoding="utf-8")
    reader = csv.DictReader(handle)
    if reader.fieldnames is None:
        return handle, reader  # empty file: zero data rows
    missing = [c for c in required if c not in reader.fieldnames]
    if missing:
        handle.close()
        raise IngestError(f"{path}: missing columns {missing}", line=1)
    return handle, reader


def ingest_patients(
    diagnoses_path,
    labs_path,
    units: UnitsTable | None = None,
    synonyms: dict[str, str] | None = None,
) -> tuple[PatientStore, IngestReport]:
    """Load the two CSV files into a store, validating every row.

    Malformed rows are logged and counted rather than fatal, but a file
    with more than 10% rejects aborts with IngestError. Lab units must be
    present in the conversion table; values are stored in canonical units.
    """
    from .normalize import default_synonyms  # local default to keep signature light

    units = units or UnitsTable.default()
    synonyms = synonyms if synonyms is not None else default_synonyms()
    store = PatientStore()
    report = IngestReport()

    handle, reader = _open_csv(diagnoses_path, DIAGNOSES_HEADER)
    with handle:
        for lineno, row in enumerate(reader, start=2):
            report.diagnoses_rows += 1
            try:
                pid = (row.get("patient_id") or "").strip()
                code = (row.get("icd10_code") or "").strip()
                day = date.fromisoformat((row.get("diagnosis_date") or "").strip())
                if not pid or not code:
                    raise ValueError("empty patient_id or icd10_code")
            except (ValueError, TypeError) as err:
                report.diagnoses_rejected += 1
                report.count_reject("bad-diagnosis-row")
                log.warning("%s line %d rejected: %s", diagnoses_path, lineno, err)
                continue
            store.add_diagnosis(pid, code, day)
    _check_reject_rate(diagnoses_path, report.diagnoses_rows, report.diagnoses_rejected)

    handle, reader = _open_csv(labs_path, LABS_HEADER)
    with handle:
        for lineno, row in enumerate(reader, start=2):
            report.labs_rows += 1
            try:
                pid = (row.get("patient_id") or "").strip()
                raw_variable = (row.get("variable") or "").strip()
                raw_value = float((row.get("value") or "").strip())
                unit = (row.get("unit") or "").strip()
                day = date.fromisoformat((row.get("lab_date") or "").strip())
                if not pid or not raw_variable:
                    raise ValueError("empty patient_id or variable")
            except (ValueError, TypeError) as err:
                report.labs_rejected += 1
                report.count_reject("bad-lab-row")
                log.warning("%s line %d rejected: %s", labs_path, lineno, err)
                continue
            variable = canonicalize_name(raw_variable, synonyms)
            if not units.knows(variable, unit):
                report.labs_rejected += 1
                report.count_reject("unknown-unit")
                log.warning(
                    "%s line %d rejected: unknown unit %r for %r",
                    labs_path, lineno, unit, variable,
                )
                continue
            canonical_value = units.convert(raw_value, unit, variable)
            store.add_lab(pid, variable, canonical_value, raw_value, unit, day)
    _check_reject_rate(labs_path, report.labs_rows, report.labs_rejected)

    store.finalize()
    report.n_patients = len(store)
    log.info(
        "ingested %d patients (%d diagnoses rows, %d labs rows, %d rejected)",
        len(store), report.diagnoses_rows, report.labs_rows,
        report.diagnoses_rejected + report.labs_rejected,
    )
    return store, report


def _check_reject_rate(path, rows: int, rejected: int) -> None:
    if rows and rejected > 0.10 * rows:
        raise IngestError(f"{path}: {rejected}/{rows} rows rejected (> 10%)")
