"""JSON-ready payload builders shared by the REST service and the exporter."""

from __future__ import annotations

import math

from trajvis.cdm.types import Cohort
from trajvis.enrichment import EnrichmentReport
from trajvis.model import TrajectoryModel, trajectory_probability
from trajvis.views import analysis_bundle, indicator_glyphs, patient_series, trajectory_map


def clean_float(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def profile_payload(cohort: Cohort, patient_id: str, codes: list[str]) -> list[dict]:
    series = patient_series(cohort, patient_id, codes)
    out = []
    for s in series:
        feature = cohort.catalog.get(s.feature_code)
        out.append(
            {
                "patient_id": s.patient_id,
                "feature_code": s.feature_code,
                "units": feature.units,
                "normal_low": feature.normal_low,
                "normal_high": feature.normal_high,
                "points": [{"age": a, "value": v, "band": band} for a, v, band in s.points],
            }
        )
    return out


def map_payload(
    model: TrajectoryModel, cohort: Cohort, color_by: str, highlight: str | None = None
) -> dict:
    return trajectory_map(model, cohort, color_by, highlight)


def indicators_payload(
    cohort: Cohort,
    patient_id: str,
    bin_width: float,
    enrichment: EnrichmentReport | None,
) -> dict:
    rows, order = indicator_glyphs(cohort, patient_id, bin_width)
    tags = {}
    if enrichment is not None:
        for code in rows:
            feature_tags = enrichment.tags_for_feature(code)
            if feature_tags:
                tags[code] = [{"trajectory": t, "role": r} for t, r in feature_tags]
    return {
        "leaf_order": order,
        "rows": [
            {
                "feature_code": code,
                "tags": tags.get(code, []),
                "bins": [
                    {
                        "age_start": g.age_start,
                        "age_end": g.age_end,
                        "n_below": g.n_below,
                        "n_normal": g.n_normal,
                        "n_above": g.n_above,
                        "dev_below": g.dev_below,
                        "dev_above": g.dev_above,
                        "max_dev_below": g.max_dev_below,
                        "max_dev_above": g.max_dev_above,
                    }
                    for g in rows[code]
                ],
            }
            for code in order
        ],
    }


def probability_payload(model: TrajectoryModel, cohort: Cohort, patient_id: str) -> dict:
    prob = trajectory_probability(patient_id, model, cohort)
    return {
        "patient_id": prob.patient_id,
        "ages": prob.ages,
        "per_label": prob.per_label,
        "undetermined": prob.undetermined,
    }


def analysis_payload(
    model: TrajectoryModel, cohort: Cohort, patient_id: str, bin_width: float
) -> dict:
    bundle = analysis_bundle(model, cohort, patient_id, bin_width)
    prob = bundle.probability
    return {
        "patient_id": bundle.patient_id,
        "trajectories": {
            label: [
                {
                    "age_start": c.age_start,
                    "age_end": c.age_end,
                    "central": c.central,
                    "lower": c.lower,
                    "upper": c.upper,
                    "n": c.n,
                }
                for c in curve
            ]
            for label, curve in bundle.trajectories.items()
        },
        "probability": {
            "patient_id": prob.patient_id,
            "ages": prob.ages,
            "per_label": prob.per_label,
            "undetermined": prob.undetermined,
        },
        "demographics": bundle.demographics,
        "age_histogram": bundle.age_histogram,
        "egfr_histogram": bundle.egfr_histogram,
    }


def enrichment_payload(
    report: EnrichmentReport, trajectory: str | None = None, phase: str | None = None
) -> list[dict]:
    role = {"pre_fork": "predictor", "post_fork": "marker"}.get(phase, phase)
    out = []
    for r in report.results:
        if trajectory and r.trajectory != trajectory:
            continue
        if role and r.role != role:
            continue
        out.append(
            {
                "feature_code": r.feature_code,
                "role": r.role,
                "trajectory": r.trajectory,
                "statistic": clean_float(r.statistic),
                "df": r.df,
                "p_value": r.p_value,
                "q_value": r.q_value,
                "n_a": r.n_a,
                "n_b": r.n_b,
                "effect_direction": r.effect_direction,
                "significant": r.significant,
            }
        )
    return out


def catalog_payload(cohort: Cohort) -> list[dict]:
    return [
        {
            "code": f.code,
            "name": f.name,
            "kind": f.kind,
            "units": f.units,
            "normal_low": f.normal_low,
            "normal_high": f.normal_high,
            "category": f.category,
        }
        for f in cohort.catalog
    ]
