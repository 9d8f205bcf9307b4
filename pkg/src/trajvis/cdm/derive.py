"""Derived features and normal-range classification."""

from __future__ import annotations

from datetime import date

from trajvis.cdm.types import DAYS_PER_YEAR, FeatureDef
from trajvis.errors import ValidationError

# CKD-EPI 2021 creatinine equation (race-free). Coefficients keyed by sex:
# (kappa, alpha, sex_multiplier).
_CKD_EPI_2021 = {
    "female": (0.7, -0.241, 1.012),
    "male": (0.9, -0.302, 1.0),
}


def derive_age(birth_date: date, encounter_date: date) -> float:
    """Fractional years between birth and encounter (day difference / 365.25)."""
    days = (encounter_date - birth_date).days
    if days < 0:
        raise ValidationError(
            f"encounter date {encounter_date} precedes birth date {birth_date}"
        )
    return days / DAYS_PER_YEAR


def derive_egfr(serum_creatinine: float, age: float, sex: str) -> float:
    """Estimated GFR in mL/min/1.73m2 from serum creatinine (mg/dL), age, sex.

    Strictly decreasing in creatinine for fixed age and sex. Patients with
    unknown sex use the male coefficients.
    """
    if serum_creatinine <= 0:
        raise ValidationError(f"creatinine must be positive, got {serum_creatinine}")
    if age <= 0:
        raise ValidationError(f"age must be positive, got {age}")
    kappa, alpha, sex_mult = _CKD_EPI_2021.get(sex, _CKD_EPI_2021["male"])
    ratio = serum_creatinine / kappa
    return 142.0 * min(ratio, 1.0) ** alpha * max(ratio, 1.0) ** -1.2 * 0.9938**age * sex_mult


def classify_value(feature: FeatureDef, value: float) -> tuple[str, float]:
    """Band a numeric value against the feature's normal range.

    Returns (band, deviation) with band in {"below", "normal", "above"}.
    The normal interval is closed. Deviation is the distance to the violated
    bound, divided by the range width when both bounds exist; 0 when normal.
    """
    if feature.kind != "numeric":
        raise ValidationError(f"feature {feature.code!r} is categorical; cannot band")
    lo, hi = feature.normal_low, feature.normal_high
    if lo is None and hi is None:
        raise ValidationError(f"feature {feature.code!r} has no normal bounds")
    width = (hi - lo) if (lo is not None and hi is not None) else None
    if lo is not None and value < lo:
        dist = lo - value
        return "below", dist / width if width else dist
    if hi is not None and value > hi:
        dist = value - hi
        return "above", dist / width if width else dist
    return "normal", 0.0
