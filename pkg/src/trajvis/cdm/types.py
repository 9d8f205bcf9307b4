"""Core data model: feature catalog, patients, encounters, cohort.

All types are immutable after construction and safe to share across
threads. Values are stored sparsely per encounter; missing observations
are simply absent (no sentinel numbers).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import date

from trajvis.errors import ValidationError

FEATURE_KINDS = ("numeric", "categorical")
FEATURE_CATEGORIES = ("demographic", "vital", "laboratory", "derived")
SEXES = ("female", "male", "unknown")

DAYS_PER_YEAR = 365.25


@dataclass(frozen=True)
class FeatureDef:
    """One clinical feature: identity, kind, units, and normal range."""

    code: str
    name: str
    kind: str
    units: str = ""
    normal_low: float | None = None
    normal_high: float | None = None
    category: str = "laboratory"

    def __post_init__(self):
        if not self.code:
            raise ValidationError("feature code must be non-empty")
        if self.kind not in FEATURE_KINDS:
            raise ValidationError(f"feature {self.code!r}: unknown kind {self.kind!r}")
        if self.category not in FEATURE_CATEGORIES:
            raise ValidationError(f"feature {self.code!r}: unknown category {self.category!r}")
        if self.kind == "categorical" and (self.normal_low is not None or self.normal_high is not None):
            raise ValidationError(f"feature {self.code!r}: categorical features cannot carry normal bounds")
        if self.normal_low is not None and self.normal_high is not None:
            if not self.normal_low < self.normal_high:
                raise ValidationError(
                    f"feature {self.code!r}: normal_low {self.normal_low} must be < normal_high {self.normal_high}"
                )

    @property
    def has_bounds(self) -> bool:
        return self.normal_low is not None or self.normal_high is not None


@dataclass(frozen=True)
class FeatureCatalog:
    """Ordered registry of features with unique codes."""

    features: tuple[FeatureDef, ...]

    def __post_init__(self):
        codes = [f.code for f in self.features]
        if len(set(codes)) != len(codes):
            dupes = sorted({c for c in codes if codes.count(c) > 1})
            raise ValidationError(f"duplicate feature codes in catalog: {dupes}")
        object.__setattr__(self, "_by_code", {f.code: f for f in self.features})

    def __contains__(self, code: str) -> bool:
        return code in self._by_code

    def __iter__(self):
        return iter(self.features)

    def __len__(self) -> int:
        return len(self.features)

    def get(self, code: str) -> FeatureDef:
        try:
            return self._by_code[code]
        except KeyError:
            raise ValidationError(f"unknown feature code {code!r}") from None

    def numeric_codes(self) -> list[str]:
        """Numeric feature codes in catalog order."""
        return [f.code for f in self.features if f.kind == "numeric"]

    def categorical_codes(self) -> list[str]:
        return [f.code for f in self.features if f.kind == "categorical"]


@dataclass(frozen=True)
class Patient:
    patient_id: str
    sex: str
    race: str
    birth_date: date

    def __post_init__(self):
        if not self.patient_id:
            raise ValidationError("patient_id must be non-empty")
        if self.sex not in SEXES:
            raise ValidationError(f"patient {self.patient_id!r}: sex must be one of {SEXES}, got {self.sex!r}")


@dataclass(frozen=True)
class Encounter:
    """A single clinical visit with its observed feature values.

    Values map feature_code -> float (numeric) or str (categorical).
    """

    encounter_id: str
    patient_id: str
    date: date
    values: dict[str, float | str] = field(default_factory=dict)

    def __post_init__(self):
        for code, value in self.values.items():
            if isinstance(value, float) and not math.isfinite(value):
                raise ValidationError(
                    f"encounter {self.encounter_id!r}: non-finite value for {code!r}"
                )

    def numeric_value(self, code: str) -> float | None:
        v = self.values.get(code)
        return float(v) if isinstance(v, (int, float)) else None


@dataclass(frozen=True)
class Cohort:
    """Validated collection of patients and their encounters.

    Encounters are held in canonical order (patient_id, date, encounter_id)
    so that per-patient retrieval is nondecreasing in date and all derived
    matrices have a reproducible row order.
    """

    catalog: FeatureCatalog
    patients: tuple[Patient, ...]
    encounters: tuple[Encounter, ...]
    diagnostics: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        by_id = {}
        for p in self.patients:
            if p.patient_id in by_id:
                raise ValidationError(f"duplicate patient_id {p.patient_id!r}")
            by_id[p.patient_id] = p
        object.__setattr__(self, "patients", tuple(sorted(self.patients, key=lambda p: p.patient_id)))
        object.__setattr__(self, "_patients_by_id", {p.patient_id: p for p in self.patients})

        enc_ids = set()
        for e in self.encounters:
            if e.encounter_id in enc_ids:
                raise ValidationError(f"duplicate encounter_id {e.encounter_id!r}")
            enc_ids.add(e.encounter_id)
            patient = by_id.get(e.patient_id)
            if patient is None:
                raise ValidationError(
                    f"encounter {e.encounter_id!r} references unknown patient {e.patient_id!r}"
                )
            if e.date < patient.birth_date:
                raise ValidationError(
                    f"encounter {e.encounter_id!r} predates birth of patient {e.patient_id!r}"
                )
            for code in e.values:
                if code not in self.catalog:
                    raise ValidationError(
                        f"encounter {e.encounter_id!r}: feature code {code!r} not in catalog"
                    )
        ordered = tuple(sorted(self.encounters, key=lambda e: (e.patient_id, e.date, e.encounter_id)))
        object.__setattr__(self, "encounters", ordered)
        index: dict[str, list[Encounter]] = {p.patient_id: [] for p in self.patients}
        for e in ordered:
            index[e.patient_id].append(e)
        object.__setattr__(self, "_encounters_by_patient", index)
        object.__setattr__(self, "_encounters_by_id", {e.encounter_id: e for e in ordered})

    @property
    def n_patients(self) -> int:
        return len(self.patients)

    @property
    def n_encounters(self) -> int:
        return len(self.encounters)

    def patient(self, patient_id: str) -> Patient:
        try:
            return self._patients_by_id[patient_id]
        except KeyError:
            raise ValidationError(f"unknown patient {patient_id!r}") from None

    def has_patient(self, patient_id: str) -> bool:
        return patient_id in self._patients_by_id

    def encounters_for(self, patient_id: str) -> list[Encounter]:
        """Encounters of one patient in nondecreasing date order."""
        self.patient(patient_id)
        return list(self._encounters_by_patient[patient_id])

    def encounter(self, encounter_id: str) -> Encounter:
        try:
            return self._encounters_by_id[encounter_id]
        except KeyError:
            raise ValidationError(f"unknown encounter {encounter_id!r}") from None

    def age_at(self, encounter: Encounter) -> float:
        """Age in fractional years at the encounter date."""
        birth = self.patient(encounter.patient_id).birth_date
        return (encounter.date - birth).days / DAYS_PER_YEAR
