"""Deterministic synthetic cohorts.

Two generators:

* ``generate_synthetic`` de-identifies an existing cohort by per-patient
  date shifting and partial encounter swapping, mirroring how the demo
  data for the original system was produced.
* ``simulate_archetype_cohort`` builds a desk-scale fixture with three
  planted progression archetypes (healthy / late / fast) and a known
  ground-truth label per patient, used by the acceptance suite.

Both are pure functions of (input, seed).
"""

from __future__ import annotations

from datetime import date, timedelta

import numpy as np

from trajvis.cdm.catalog import default_catalog
from trajvis.cdm.derive import derive_age
from trajvis.cdm.types import Cohort, Encounter, Patient
from trajvis.errors import ValidationError

ARCHETYPES = ("healthy", "late", "fast")

SWAP_AGE_WINDOW_YEARS = 2.0


def generate_synthetic(
    source: Cohort,
    max_shift_days: int = 183,
    swap_fraction: float = 0.10,
    seed: int = 0,
) -> Cohort:
    """De-identified copy of ``source``: shifted dates, swapped encounters.

    Every patient's dates (birth and encounters) move together by one
    uniform draw from [-max_shift_days, +max_shift_days], so ages and
    within-patient intervals are preserved exactly. round(swap_fraction * N)
    encounters have their value maps replaced by a similar encounter of a
    different patient (same sex, age within 2 years, nearest age wins).
    Patient and encounter identifiers are re-issued. Encounters with no
    eligible swap partner are skipped and counted in ``diagnostics``.
    """
    if not 0.0 <= swap_fraction <= 1.0:
        raise ValidationError(f"swap_fraction must be in [0, 1], got {swap_fraction}")
    if max_shift_days < 0:
        raise ValidationError(f"max_shift_days must be >= 0, got {max_shift_days}")
    rng = np.random.default_rng(seed)

    pid_map = {p.patient_id: f"S{idx:06d}" for idx, p in enumerate(source.patients)}
    shifts = {
        p.patient_id: int(rng.integers(-max_shift_days, max_shift_days + 1)) if max_shift_days else 0
        for p in source.patients
    }

    # swap targets drawn over the canonical encounter order
    n = source.n_encounters
    n_swaps = round(swap_fraction * n)
    swap_idx = set(rng.choice(n, size=n_swaps, replace=False).tolist()) if n_swaps else set()

    ages = np.array([source.age_at(e) for e in source.encounters])
    sexes = [source.patient(e.patient_id).sex for e in source.encounters]

    diagnostics = []
    skipped = 0
    new_values: list[dict] = []
    for i, enc in enumerate(source.encounters):
        if i not in swap_idx:
            new_values.append(dict(enc.values))
            continue
        best = None
        for j, other in enumerate(source.encounters):
            if other.patient_id == enc.patient_id or sexes[j] != sexes[i]:
                continue
            gap = abs(ages[j] - ages[i])
            if gap > SWAP_AGE_WINDOW_YEARS:
                continue
            key = (gap, other.encounter_id)
            if best is None or key < best[0]:
                best = (key, j)
        if best is None:
            skipped += 1
            new_values.append(dict(enc.values))
        else:
            new_values.append(dict(source.encounters[best[1]].values))
    if skipped:
        diagnostics.append(f"swap skipped for {skipped} encounters: no eligible partner")

    patients = tuple(
        Patient(
            patient_id=pid_map[p.patient_id],
            sex=p.sex,
            race=p.race,
            birth_date=p.birth_date + timedelta(days=shifts[p.patient_id]),
        )
        for p in source.patients
    )
    encounters = tuple(
        Encounter(
            encounter_id=f"E{i:06d}",
            patient_id=pid_map[enc.patient_id],
            date=enc.date + timedelta(days=shifts[enc.patient_id]),
            values=new_values[i],
        )
        for i, enc in enumerate(source.encounters)
    )
    return Cohort(
        catalog=source.catalog,
        patients=patients,
        encounters=encounters,
        diagnostics=tuple(diagnostics),
    )


def _archetype_counts(n_patients: int, mix: dict[str, float]) -> dict[str, int]:
    """Largest-remainder apportionment in fixed archetype order."""
    if n_patients < 3:
        raise ValidationError(f"n_patients must be >= 3, got {n_patients}")
    unknown = set(mix) - set(ARCHETYPES)
    if unknown:
        raise ValidationError(f"unknown archetypes in mix: {sorted(unknown)}")
    if any(v < 0 for v in mix.values()):
        raise ValidationError("mix proportions must be nonnegative")
    total = sum(mix.values())
    if abs(total - 1.0) > 1e-6:
        raise ValidationError(f"mix proportions must sum to 1, got {total}")
    shares = {a: mix.get(a, 0.0) * n_patients for a in ARCHETYPES}
    counts = {a: int(np.floor(shares[a])) for a in ARCHETYPES}
    remainder = n_patients - sum(counts.values())
    by_frac = sorted(ARCHETYPES, key=lambda a: (-(shares[a] - counts[a]), ARCHETYPES.index(a)))
    for a in by_frac[:remainder]:
        counts[a] += 1
    return counts


# (age_start, age_end) of the visit window per archetype
_AGE_SPANS = {"healthy": (40.0, 78.0), "late": (40.0, 78.0), "fast": (40.0, 68.0)}


def _egfr_curve(archetype: str, age: float, offset: float) -> float:
    """Planted eGFR-vs-age profiles; archetypes share the pre-50 regime."""
    if archetype == "healthy":
        value = 91.0 + offset - 0.05 * (age - 40.0)
    elif archetype == "late":
        value = 90.0 + offset - 0.20 * (age - 40.0)
        if age > 60.0:
            value -= 2.8 * (age - 60.0)
    else:  # fast
        value = 89.0 + offset - 0.20 * (age - 40.0)
        if age > 50.0:
            value -= 3.5 * (age - 50.0)
    return max(value, 6.0)


def simulate_archetype_cohort(
    n_patients: int,
    archetype_mix: dict[str, float],
    seed: int = 0,
) -> tuple[Cohort, dict[str, str]]:
    """Cohort with three planted eGFR slopes plus archetype-linked hemoglobin.

    Healthy patients stay near eGFR 90; late progressors decline after age
    60; fast progressors decline steeply from age 50 and carry hemoglobin
    two noise standard deviations below the others at every age (the
    planted predictor). Remaining laboratory features are identically
    distributed across archetypes. Returns (cohort, ground-truth labels).
    """
    counts = _archetype_counts(n_patients, archetype_mix)
    rng = np.random.default_rng(seed)
    catalog = default_catalog()

    patients = []
    encounters = []
    labels: dict[str, str] = {}
    idx = 0
    for archetype in ARCHETYPES:
        for _ in range(counts[archetype]):
            pid = f"A{idx:04d}"
            idx += 1
            labels[pid] = archetype
            sex = "female" if rng.random() < 0.5 else "male"
            race = str(rng.choice(["white", "black", "asian", "other"], p=[0.6, 0.2, 0.1, 0.1]))
            birth = date(1940, 1, 1) + timedelta(days=int(rng.integers(0, 5479)))
            patients.append(Patient(patient_id=pid, sex=sex, race=race, birth_date=birth))

            lo, hi = _AGE_SPANS[archetype]
            n_visits = int(rng.integers(10, 16))
            ages = np.linspace(lo, hi, n_visits) + rng.uniform(-0.8, 0.8, n_visits)
            ages = np.sort(np.clip(ages, lo, hi + 1.0))
            egfr_offset = rng.normal(0.0, 1.5)
            hgb_center = 14.2 - (1.6 if archetype == "fast" else 0.0) + rng.normal(0.0, 0.3)
            for j, age in enumerate(ages):
                egfr = max(_egfr_curve(archetype, float(age), egfr_offset) + rng.normal(0.0, 1.2), 5.0)
                values: dict[str, float | str] = {
                    "egfr": round(egfr, 4),
                    # fast progressors run two noise-sd low at every age (planted predictor)
                    "hemoglobin": round(hgb_center + rng.normal(0.0, 0.8), 4),
                    # kidney-damage labs track the eGFR decline
                    "uacr": round(max(5.0, 15.0 + 2.2 * max(0.0, 90.0 - egfr) + rng.normal(0.0, 10.0)), 2),
                    "creatinine": round(max(0.4, 0.95 * (92.0 / max(egfr, 8.0)) ** 0.9 + rng.normal(0.0, 0.06)), 4),
                }
                if rng.random() < 0.9:
                    values["sbp"] = round(rng.normal(126.0, 10.0), 2)
                if rng.random() < 0.9:
                    values["dbp"] = round(rng.normal(78.0, 8.0), 2)
                if rng.random() < 0.75:
                    values["cholesterol_total"] = round(rng.normal(185.0, 25.0), 2)
                enc_date = birth + timedelta(days=int(round(age * 365.25)))
                encounters.append(
                    Encounter(
                        encounter_id=f"{pid}-V{j:02d}",
                        patient_id=pid,
                        date=enc_date,
                        values=values,
                    )
                )

    cohort = Cohort(catalog=catalog, patients=tuple(patients), encounters=tuple(encounters))
    return cohort, labels


def write_labels_csv(labels: dict[str, str], path) -> None:
    """Sidecar ground-truth file: patient_id,archetype."""
    lines = ["patient_id,archetype"]
    lines += [f"{pid},{labels[pid]}" for pid in sorted(labels)]
    from pathlib import Path

    Path(path).write_text("\n".join(lines) + "\n")


def read_labels_csv(path) -> dict[str, str]:
    from pathlib import Path

    text = Path(path).read_text().strip().splitlines()
    if not text or text[0] != "patient_id,archetype":
        raise ValidationError(f"{path}: expected header 'patient_id,archetype'")
    out = {}
    for line in text[1:]:
        pid, archetype = line.split(",", 1)
        out[pid] = archetype
    return out
