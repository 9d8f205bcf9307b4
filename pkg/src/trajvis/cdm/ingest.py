"""Cohort file ingestion and export.

File formats (see README):
  patients.csv       patient_id,sex,race,birth_date        (ISO-8601 dates)
  observations.csv   patient_id,encounter_id,date,feature_code,value
  catalog.json       array of feature definitions

Rows that violate row-level invariants are rejected and reported as
diagnostics (with line numbers); file-level problems raise IngestError.
Export writes canonical, re-ingestable files: ingest(export(c)) == c.
"""

from __future__ import annotations

import csv
import math
from datetime import date
from pathlib import Path

from trajvis.cdm.catalog import load_catalog, save_catalog
from trajvis.cdm.derive import derive_age, derive_egfr
from trajvis.cdm.types import SEXES, Cohort, Encounter, FeatureCatalog, Patient
from trajvis.errors import IngestError

PATIENTS_HEADER = ["patient_id", "sex", "race", "birth_date"]
OBSERVATIONS_HEADER = ["patient_id", "encounter_id", "date", "feature_code", "value"]


def _read_rows(path: Path, expected_header: list[str]) -> list[tuple[int, list[str]]]:
    if not path.exists():
        raise IngestError(f"file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: empty file") from None
        if header != expected_header:
            raise IngestError(
                f"{path}: expected header {','.join(expected_header)!r}, got {','.join(header)!r}"
            )
        return [(lineno, row) for lineno, row in enumerate(reader, start=2)]


def _parse_date(raw: str) -> date:
    return date.fromisoformat(raw)


def ingest_cohort(
    patients_file: str | Path,
    observations_file: str | Path,
    catalog_file: str | Path,
) -> Cohort:
    """Load and validate a cohort, materializing derived eGFR.

    Bad rows are skipped and reported in ``cohort.diagnostics`` as
    ``"file:line: reason"`` strings. An encounter's eGFR is derived from
    creatinine, age, and sex whenever creatinine is observed and no eGFR
    value is already present (observed values win over derivation).
    """
    patients_file = Path(patients_file)
    observations_file = Path(observations_file)
    catalog = load_catalog(catalog_file)
    diagnostics: list[str] = []

    patients: dict[str, Patient] = {}
    for lineno, row in _read_rows(patients_file, PATIENTS_HEADER):
        where = f"{patients_file.name}:{lineno}"
        if len(row) != len(PATIENTS_HEADER):
            diagnostics.append(f"{where}: expected {len(PATIENTS_HEADER)} fields, got {len(row)}")
            continue
        pid, sex, race, birth_raw = row
        if not pid:
            diagnostics.append(f"{where}: empty patient_id")
            continue
        if pid in patients:
            diagnostics.append(f"{where}: duplicate patient_id {pid!r}")
            continue
        if sex not in SEXES:
            diagnostics.append(f"{where}: invalid sex {sex!r} for patient {pid!r}")
            continue
        try:
            birth = _parse_date(birth_raw)
        except ValueError:
            diagnostics.append(f"{where}: unparseable birth_date {birth_raw!r} for patient {pid!r}")
            continue
        patients[pid] = Patient(patient_id=pid, sex=sex, race=race, birth_date=birth)

    # encounter_id -> (patient_id, date, values); rows accumulate into encounters
    encounters: dict[str, tuple[str, date, dict]] = {}
    for lineno, row in _read_rows(observations_file, OBSERVATIONS_HEADER):
        where = f"{observations_file.name}:{lineno}"
        if len(row) != len(OBSERVATIONS_HEADER):
            diagnostics.append(f"{where}: expected {len(OBSERVATIONS_HEADER)} fields, got {len(row)}")
            continue
        pid, eid, date_raw, code, value_raw = row
        patient = patients.get(pid)
        if patient is None:
            diagnostics.append(f"{where}: unknown patient {pid!r}")
            continue
        if code not in catalog:
            diagnostics.append(f"{where}: unknown feature code {code!r}")
            continue
        try:
            enc_date = _parse_date(date_raw)
        except ValueError:
            diagnostics.append(f"{where}: unparseable date {date_raw!r}")
            continue
        if enc_date < patient.birth_date:
            diagnostics.append(f"{where}: encounter date {enc_date} precedes birth of {pid!r}")
            continue
        feature = catalog.get(code)
        value: float | str
        if feature.kind == "numeric":
            try:
                value = float(value_raw)
            except ValueError:
                diagnostics.append(f"{where}: non-numeric value {value_raw!r} for {code!r}")
                continue
            if not math.isfinite(value):
                diagnostics.append(f"{where}: non-finite value for {code!r}")
                continue
        else:
            value = value_raw
        known = encounters.get(eid)
        if known is None:
            encounters[eid] = (pid, enc_date, {code: value})
            continue
        kpid, kdate, kvalues = known
        if kpid != pid or kdate != enc_date:
            diagnostics.append(
                f"{where}: encounter {eid!r} conflicts with earlier rows "
                f"(patient {kpid!r} on {kdate})"
            )
            continue
        if code in kvalues:
            diagnostics.append(f"{where}: duplicate value for {code!r} in encounter {eid!r}")
            continue
        kvalues[code] = value

    built = []
    for eid, (pid, enc_date, values) in encounters.items():
        patient = patients[pid]
        if "egfr" in catalog and "egfr" not in values:
            creat = values.get("creatinine")
            if isinstance(creat, float) and creat > 0:
                age = derive_age(patient.birth_date, enc_date)
                if age > 0:
                    values["egfr"] = derive_egfr(creat, age, patient.sex)
        built.append(Encounter(encounter_id=eid, patient_id=pid, date=enc_date, values=values))

    return Cohort(
        catalog=catalog,
        patients=tuple(patients.values()),
        encounters=tuple(built),
        diagnostics=tuple(diagnostics),
    )


def _format_value(value: float | str) -> str:
    if isinstance(value, str):
        return value
    # repr round-trips doubles exactly
    return repr(float(value))


def export_cohort(cohort: Cohort, out_dir: str | Path) -> dict[str, Path]:
    """Write patients.csv, observations.csv, catalog.json in canonical order."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "patients": out_dir / "patients.csv",
        "observations": out_dir / "observations.csv",
        "catalog": out_dir / "catalog.json",
    }
    with paths["patients"].open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PATIENTS_HEADER)
        for p in cohort.patients:
            writer.writerow([p.patient_id, p.sex, p.race, p.birth_date.isoformat()])
    with paths["observations"].open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(OBSERVATIONS_HEADER)
        for e in cohort.encounters:
            for code in sorted(e.values):
                writer.writerow(
                    [e.patient_id, e.encounter_id, e.date.isoformat(), code, _format_value(e.values[code])]
                )
    save_catalog(cohort.catalog, paths["catalog"])
    return paths
