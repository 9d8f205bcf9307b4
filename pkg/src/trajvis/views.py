"""Data products behind the four clinician panels.

Everything here is a pure, deterministic function of (model, cohort,
request); no rendering or color decisions happen at this layer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from trajvis.cdm.derive import classify_value
from trajvis.cdm.types import Cohort, FeatureDef
from trajvis.errors import ValidationError
from trajvis.model import TrajectoryModel, attribute_all, patient_memberships, trajectory_probability

GLYPH_BIN_YEARS = 0.25
ANALYSIS_BIN_YEARS = 1.0
AGE_HIST_EDGES = [float(v) for v in range(0, 105, 5)]
EGFR_HIST_EDGES = [float(v) for v in range(0, 160, 10)]


def _band(feature: FeatureDef, value: float) -> tuple[str, float]:
    """classify_value, with unbounded features counting as normal."""
    if not feature.has_bounds:
        return "normal", 0.0
    return classify_value(feature, value)


@dataclass
class IndicatorSeries:
    patient_id: str
    feature_code: str
    points: list[tuple[float, float, str]]  # (age, value, band), ages ascending


def patient_series(cohort: Cohort, patient_id: str, feature_codes) -> list[IndicatorSeries]:
    """Age-ordered observed values for one or two numeric indicators."""
    codes = list(feature_codes)
    if not 1 <= len(codes) <= 2:
        raise ValidationError(f"patient_series accepts 1 or 2 features, got {len(codes)}")
    series = []
    for code in codes:
        feature = cohort.catalog.get(code)
        if feature.kind != "numeric":
            raise ValidationError(f"feature {code!r} is categorical; series needs numeric features")
        points = []
        for enc in cohort.encounters_for(patient_id):
            age = cohort.age_at(enc)
            if code == "age":
                points.append((age, age, "normal"))
                continue
            value = enc.numeric_value(code)
            if value is None:
                continue
            band, _ = _band(feature, value)
            points.append((age, value, band))
        series.append(IndicatorSeries(patient_id=patient_id, feature_code=code, points=points))
    return series


def trajectory_map(
    model: TrajectoryModel,
    cohort: Cohort,
    color_by: str = "egfr",
    highlight_patient: str | None = None,
) -> dict:
    """Scatter payload: all visit coordinates, branch polylines, highlights."""
    if color_by not in ("egfr", "age", "trajectory"):
        raise ValidationError(f"color_by must be egfr|age|trajectory, got {color_by!r}")
    attributions = attribute_all(model.tree, model.branches)
    visits = []
    for i, (pid, eid) in enumerate(model.visit_keys):
        enc = cohort.encounter(eid)
        if color_by == "egfr":
            value = enc.numeric_value("egfr")
        elif color_by == "age":
            value = cohort.age_at(enc)
        else:
            label = model.label_of_branch(attributions[i]) if attributions[i] is not None else None
            value = label or "undetermined"
        visits.append(
            {
                "patient_id": pid,
                "encounter_id": eid,
                "x": float(model.coords2d[i, 0]),
                "y": float(model.coords2d[i, 1]),
                "value": value,
            }
        )
    branches = []
    for b in model.branches:
        curve = model.smoothed_curves.get(b.branch_id)
        polyline = [[float(x), float(y)] for x, y in curve] if curve is not None else []
        branches.append(
            {
                "branch_id": b.branch_id,
                "label": model.label_of_branch(b.branch_id),
                "kind": b.kind,
                "polyline": polyline,
            }
        )
    highlight = []
    if highlight_patient is not None:
        cohort.patient(highlight_patient)  # raises on unknown id
        rows = [
            (cohort.age_at(cohort.encounter(eid)), i, eid)
            for i, (pid, eid) in enumerate(model.visit_keys)
            if pid == highlight_patient
        ]
        for age, i, eid in sorted(rows):
            enc = cohort.encounter(eid)
            highlight.append(
                {
                    "encounter_id": eid,
                    "x": float(model.coords2d[i, 0]),
                    "y": float(model.coords2d[i, 1]),
                    "age": age,
                    "egfr": enc.numeric_value("egfr"),
                }
            )
    return {"color_by": color_by, "visits": visits, "branches": branches, "highlight": highlight}


@dataclass
class GlyphBin:
    feature_code: str
    age_start: float
    age_end: float
    n_below: int
    n_normal: int
    n_above: int
    dev_below: float
    dev_above: float
    max_dev_below: float
    max_dev_above: float


def indicator_glyphs(
    cohort: Cohort, patient_id: str, bin_width_years: float = GLYPH_BIN_YEARS
) -> tuple[dict[str, list[GlyphBin]], list[str]]:
    """Per-feature, per-age-bin band counts and mean deviations.

    Bins lie on the global grid [k*w, (k+1)*w). Features the patient never
    had measured produce no rows. The returned feature order comes from
    hierarchical clustering of data availability.
    """
    if bin_width_years <= 0:
        raise ValidationError(f"bin_width_years must be positive, got {bin_width_years}")
    encounters = cohort.encounters_for(patient_id)
    per_feature: dict[str, dict[int, list[tuple[str, float]]]] = {}
    for enc in encounters:
        age = cohort.age_at(enc)
        bin_idx = int(np.floor(age / bin_width_years))
        for code, value in enc.values.items():
            feature = cohort.catalog.get(code)
            if feature.kind != "numeric" or not isinstance(value, (int, float)):
                continue
            band, dev = _band(feature, float(value))
            per_feature.setdefault(code, {}).setdefault(bin_idx, []).append((band, dev))

    rows: dict[str, list[GlyphBin]] = {}
    for code, bins in per_feature.items():
        out = []
        for bin_idx in sorted(bins):
            entries = bins[bin_idx]
            below = [d for band, d in entries if band == "below"]
            above = [d for band, d in entries if band == "above"]
            n_normal = sum(1 for band, _ in entries if band == "normal")
            out.append(
                GlyphBin(
                    feature_code=code,
                    age_start=bin_idx * bin_width_years,
                    age_end=(bin_idx + 1) * bin_width_years,
                    n_below=len(below),
                    n_normal=n_normal,
                    n_above=len(above),
                    dev_below=float(np.mean(below)) if below else 0.0,
                    dev_above=float(np.mean(above)) if above else 0.0,
                    max_dev_below=max(below) if below else 0.0,
                    max_dev_above=max(above) if above else 0.0,
                )
            )
        rows[code] = out

    codes = sorted(rows)
    if not codes:
        return rows, []
    all_bins = sorted({b.age_start for code in codes for b in rows[code]})
    bin_pos = {b: i for i, b in enumerate(all_bins)}
    availability = np.zeros((len(codes), len(all_bins)), dtype=bool)
    for r, code in enumerate(codes):
        for gb in rows[code]:
            availability[r, bin_pos[gb.age_start]] = True
    order = cluster_indicators(availability)
    return rows, [codes[i] for i in order]


def _jaccard(a: np.ndarray, b: np.ndarray) -> float:
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 0.0
    return 1.0 - np.logical_and(a, b).sum() / union


def cluster_indicators(availability) -> list[int]:
    """Dendrogram leaf order from agglomerative clustering of availability.

    Jaccard distance between rows, unweighted average linkage, ties merged
    toward the lexicographically smallest cluster-id pair. Returns a
    permutation of row indices.
    """
    avail = np.asarray(availability, dtype=bool)
    if avail.ndim != 2 or avail.shape[0] < 1:
        raise ValidationError("availability must be a non-empty 2-D boolean matrix")
    n = avail.shape[0]
    if n == 1:
        return [0]
    # leaves of each active cluster, keyed by cluster id (rows 0..n-1, merges n..)
    clusters: dict[int, list[int]] = {i: [i] for i in range(n)}
    base = np.array([[_jaccard(avail[i], avail[j]) for j in range(n)] for i in range(n)])
    next_id = n
    while len(clusters) > 1:
        ids = sorted(clusters)
        best_pair = None
        best_dist = None
        for ai in range(len(ids)):
            for bi in range(ai + 1, len(ids)):
                a, b = ids[ai], ids[bi]
                dist = float(
                    np.mean([base[x, y] for x in clusters[a] for y in clusters[b]])
                )
                if best_dist is None or dist < best_dist or (dist == best_dist and (a, b) < best_pair):
                    best_dist = dist
                    best_pair = (a, b)
        a, b = best_pair
        clusters[next_id] = clusters.pop(a) + clusters.pop(b)
        next_id += 1
    return clusters.popitem()[1]


@dataclass
class CurveBin:
    age_start: float
    age_end: float
    central: float
    lower: float
    upper: float
    n: int


@dataclass
class AnalysisBundle:
    patient_id: str
    trajectories: dict[str, list[CurveBin]]
    probability: object
    demographics: dict[str, dict[str, dict[str, int]]]
    age_histogram: dict
    egfr_histogram: dict


def _histogram(values, edges) -> dict:
    counts = [0] * (len(edges) - 1)
    lo, hi = edges[0], edges[-1]
    width = edges[1] - edges[0]
    for v in values:
        clipped = min(max(v, lo), np.nextafter(hi, lo))
        counts[int((clipped - lo) // width)] += 1
    return {"edges": list(edges), "counts": counts}


def analysis_bundle(
    model: TrajectoryModel,
    cohort: Cohort,
    patient_id: str,
    age_bin_years: float = ANALYSIS_BIN_YEARS,
) -> AnalysisBundle:
    """Panel-D payload: trajectory eGFR bands, patient probabilities, cohort mix.

    The central curve per trajectory is the median eGFR of attributed
    visits per age bin, banded by the interquartile range (linear
    interpolation quartiles). Bins with no attributed eGFR are absent.
    """
    if age_bin_years <= 0:
        raise ValidationError(f"age_bin_years must be positive, got {age_bin_years}")
    cohort.patient(patient_id)  # raises on unknown id
    attributions = attribute_all(model.tree, model.branches)

    per_label_bins: dict[str, dict[int, list[float]]] = {lab: {} for lab in sorted(model.labels)}
    for i, (pid, eid) in enumerate(model.visit_keys):
        label = model.label_of_branch(attributions[i]) if attributions[i] is not None else None
        if label is None:
            continue
        enc = cohort.encounter(eid)
        egfr = enc.numeric_value("egfr")
        if egfr is None:
            continue
        bin_idx = int(np.floor(cohort.age_at(enc) / age_bin_years))
        per_label_bins[label].setdefault(bin_idx, []).append(egfr)

    trajectories = {}
    for label, bins in per_label_bins.items():
        curve = []
        for bin_idx in sorted(bins):
            values = np.array(bins[bin_idx])
            q25, q50, q75 = np.percentile(values, [25.0, 50.0, 75.0])
            curve.append(
                CurveBin(
                    age_start=bin_idx * age_bin_years,
                    age_end=(bin_idx + 1) * age_bin_years,
                    central=float(q50),
                    lower=float(q25),
                    upper=float(q75),
                    n=len(values),
                )
            )
        trajectories[label] = curve

    memberships = patient_memberships(model, cohort)
    demographics: dict[str, dict[str, dict[str, int]]] = {
        lab: {"sex": {}, "race": {}} for lab in sorted(model.labels)
    }
    for p in cohort.patients:
        label = memberships.get(p.patient_id)
        if label is None:
            continue
        demo = demographics[label]
        demo["sex"][p.sex] = demo["sex"].get(p.sex, 0) + 1
        demo["race"][p.race] = demo["race"].get(p.race, 0) + 1

    last_ages = [cohort.age_at(cohort.encounters_for(p.patient_id)[-1]) for p in cohort.patients if cohort.encounters_for(p.patient_id)]
    egfr_values = [
        e.numeric_value("egfr") for e in cohort.encounters if e.numeric_value("egfr") is not None
    ]
    return AnalysisBundle(
        patient_id=patient_id,
        trajectories=trajectories,
        probability=trajectory_probability(patient_id, model, cohort),
        demographics=demographics,
        age_histogram=_histogram(last_ages, AGE_HIST_EDGES),
        egfr_histogram=_histogram(egfr_values, EGFR_HIST_EDGES),
    )
