"""Default feature catalog and catalog file I/O.

The shipped catalog covers the 22 harmonized features used throughout:
3 demographics, 4 vitals, and 15 laboratory tests (two of them derived).
Normal ranges are standard adult reference intervals and are meant to be
edited per deployment; they are configuration, not code. Features without
a clinically meaningful band (height, weight, age) carry no bounds.
"""

from __future__ import annotations

import json
from pathlib import Path

from trajvis.cdm.types import FeatureCatalog, FeatureDef
from trajvis.errors import IngestError

_DEFAULT_FEATURES = [
    # demographics
    ("sex", "Sex", "categorical", "", None, None, "demographic"),
    ("race", "Race", "categorical", "", None, None, "demographic"),
    ("age", "Age", "numeric", "years", None, None, "derived"),
    # vitals
    ("dbp", "Diastolic blood pressure", "numeric", "mmHg", 60.0, 80.0, "vital"),
    ("sbp", "Systolic blood pressure", "numeric", "mmHg", 90.0, 120.0, "vital"),
    ("height", "Height", "numeric", "cm", None, None, "vital"),
    ("weight", "Weight", "numeric", "kg", None, None, "vital"),
    # laboratory
    ("alt", "Alanine aminotransferase (ALT/SGPT)", "numeric", "U/L", 7.0, 56.0, "laboratory"),
    ("ast", "Aspartate aminotransferase (AST/SGOT)", "numeric", "U/L", 10.0, 40.0, "laboratory"),
    ("alk", "Alkaline phosphatase (ALK)", "numeric", "U/L", 44.0, 147.0, "laboratory"),
    ("cholesterol_total", "Total cholesterol", "numeric", "mg/dL", 125.0, 200.0, "laboratory"),
    ("ldl", "Low density lipoprotein cholesterol (LDL)", "numeric", "mg/dL", 50.0, 130.0, "laboratory"),
    ("hdl", "High density lipoprotein cholesterol (HDL)", "numeric", "mg/dL", 40.0, 60.0, "laboratory"),
    ("creatine_kinase", "Creatine kinase", "numeric", "U/L", 30.0, 200.0, "laboratory"),
    ("creatinine", "Serum creatinine", "numeric", "mg/dL", 0.6, 1.3, "laboratory"),
    ("egfr", "Estimated glomerular filtration rate (eGFR)", "numeric", "mL/min/1.73m2", 60.0, 120.0, "derived"),
    ("uacr", "Urine albumin/creatinine ratio", "numeric", "mg/g", 0.0, 30.0, "laboratory"),
    ("hemoglobin", "Hemoglobin", "numeric", "g/dL", 12.0, 17.5, "laboratory"),
    ("hba1c", "Hemoglobin A1c (HbA1c)", "numeric", "%", 4.0, 5.7, "laboratory"),
    ("triglycerides", "Triglycerides", "numeric", "mg/dL", 35.0, 150.0, "laboratory"),
    ("inr", "International normalized ratio of prothrombin time (INR)", "numeric", "", 0.8, 1.1, "laboratory"),
    ("troponin", "Troponin", "numeric", "ng/mL", 0.0, 0.04, "laboratory"),
]


def default_catalog() -> FeatureCatalog:
    """The shipped 22-feature catalog."""
    return FeatureCatalog(
        features=tuple(
            FeatureDef(code=c, name=n, kind=k, units=u, normal_low=lo, normal_high=hi, category=cat)
            for c, n, k, u, lo, hi, cat in _DEFAULT_FEATURES
        )
    )


def load_catalog(path: str | Path) -> FeatureCatalog:
    """Read a catalog.json file (array of feature objects)."""
    path = Path(path)
    if not path.exists():
        raise IngestError(f"catalog file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise IngestError(f"catalog {path}: invalid JSON ({exc})") from exc
    if not isinstance(raw, list):
        raise IngestError(f"catalog {path}: expected a JSON array of feature objects")
    feats = []
    for i, item in enumerate(raw):
        try:
            feats.append(
                FeatureDef(
                    code=item["code"],
                    name=item.get("name", item["code"]),
                    kind=item["kind"],
                    units=item.get("units", ""),
                    normal_low=item.get("normal_low"),
                    normal_high=item.get("normal_high"),
                    category=item.get("category", "laboratory"),
                )
            )
        except (KeyError, TypeError) as exc:
            raise IngestError(f"catalog {path}: entry {i} malformed ({exc})") from exc
    return FeatureCatalog(features=tuple(feats))


def save_catalog(catalog: FeatureCatalog, path: str | Path) -> None:
    entries = [
        {
            "code": f.code,
            "name": f.name,
            "kind": f.kind,
            "units": f.units,
            "normal_low": f.normal_low,
            "normal_high": f.normal_high,
            "category": f.category,
        }
        for f in catalog
    ]
    Path(path).write_text(json.dumps(entries, indent=2) + "\n")
