"""Predictor / marker discovery for labeled trajectories.

For every labeled terminal trajectory the cohort splits at its fork: a
feature whose distribution differs between future trajectory members and
non-members over the visits *before* each patient joins the trajectory is
a predictor; the same comparison over visits *at or after* joining yields
markers. Numeric features use Welch's t-test on visit-level values,
categorical ones a chi-square over level-by-group counts. p-values are
adjusted per (trajectory, phase) family with Benjamini-Hochberg.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from trajvis.cdm.types import Cohort
from trajvis.errors import ValidationError
from trajvis.model import TrajectoryModel, attribute_all, patient_memberships
from trajvis.stats import bh_fdr, chi_square_test, welch_t_test

DEFAULT_ALPHA_FDR = 0.05

PHASES = ("pre_fork", "post_fork")
_ROLE_OF_PHASE = {"pre_fork": "predictor", "post_fork": "marker"}


@dataclass
class ForkSplit:
    """Visit groups for one (trajectory, phase) comparison."""

    trajectory: str
    fork_landmark: int
    phase: str
    group_a: list[tuple[str, str]]  # visits of trajectory members
    group_b: list[tuple[str, str]]  # visits of members of other labeled trajectories


@dataclass
class TestResult:
    feature_code: str
    role: str
    trajectory: str
    statistic: float
    df: float
    p_value: float
    q_value: float
    n_a: int
    n_b: int
    effect_direction: str
    significant: bool


@dataclass
class SkippedTest:
    feature_code: str
    role: str
    trajectory: str
    reason: str


@dataclass
class EnrichmentReport:
    alpha_fdr: float
    results: list[TestResult] = field(default_factory=list)
    skipped: list[SkippedTest] = field(default_factory=list)

    def significant_results(self) -> list[TestResult]:
        return [r for r in self.results if r.significant]

    def tags_for_feature(self, feature_code: str) -> list[tuple[str, str]]:
        """(trajectory, role) pairs where the feature is significant."""
        return sorted(
            {(r.trajectory, r.role) for r in self.results if r.significant and r.feature_code == feature_code}
        )


def build_fork_split(
    model: TrajectoryModel, cohort: Cohort, trajectory: str, phase: str
) -> ForkSplit:
    """Assemble the two visit groups for one trajectory and phase.

    Patients belong to the trajectory whose branch claims the majority of
    their labeled visits (ties excluded). Each patient's timeline splits at
    the age of their first visit attributed to their own trajectory:
    pre_fork collects strictly earlier visits, post_fork the rest. Patients
    without labeled visits contribute to neither group.
    """
    if phase not in PHASES:
        raise ValidationError(f"phase must be one of {PHASES}, got {phase!r}")
    if trajectory not in model.labels:
        raise ValidationError(f"trajectory {trajectory!r} is not labeled in this model")
    branch = next(b for b in model.branches if b.branch_id == model.labels[trajectory])
    if branch.fork_landmark is None:
        raise ValidationError(f"trajectory {trajectory!r} has no fork landmark")

    memberships = patient_memberships(model, cohort)
    attributions = attribute_all(model.tree, model.branches)
    member_a = {p for p, lab in memberships.items() if lab == trajectory}
    member_b = {p for p, lab in memberships.items() if lab is not None and lab != trajectory}
    if not member_a:
        raise ValidationError(f"trajectory {trajectory!r} has no member patients")

    # age of each patient's first visit attributed to their own trajectory
    join_age: dict[str, float] = {}
    for (pid, eid), att in zip(model.visit_keys, attributions):
        label = model.label_of_branch(att) if att is not None else None
        if label is None or memberships.get(pid) != label:
            continue
        age = cohort.age_at(cohort.encounter(eid))
        if pid not in join_age or age < join_age[pid]:
            join_age[pid] = age

    group_a: list[tuple[str, str]] = []
    group_b: list[tuple[str, str]] = []
    for pid, eid in model.visit_keys:
        target = group_a if pid in member_a else group_b if pid in member_b else None
        if target is None or pid not in join_age:
            continue
        age = cohort.age_at(cohort.encounter(eid))
        in_phase = age < join_age[pid] if phase == "pre_fork" else age >= join_age[pid]
        if in_phase:
            target.append((pid, eid))
    return ForkSplit(
        trajectory=trajectory,
        fork_landmark=branch.fork_landmark,
        phase=phase,
        group_a=group_a,
        group_b=group_b,
    )


def _collect_values(
    cohort: Cohort, visits: list[tuple[str, str]], code: str, per_patient_means: bool
):
    """Visit-level observed values of one feature (or per-patient means)."""
    feature = cohort.catalog.get(code)
    raw: list[tuple[str, float | str]] = []
    for pid, eid in visits:
        enc = cohort.encounter(eid)
        if feature.kind == "categorical":
            patient = cohort.patient(pid)
            if code == "sex":
                raw.append((pid, patient.sex))
            elif code == "race":
                raw.append((pid, patient.race))
            elif code in enc.values:
                raw.append((pid, str(enc.values[code])))
        elif code == "age":
            raw.append((pid, cohort.age_at(enc)))
        else:
            v = enc.numeric_value(code)
            if v is not None:
                raw.append((pid, v))
    if feature.kind == "numeric" and per_patient_means:
        sums: dict[str, list[float]] = {}
        for pid, v in raw:
            sums.setdefault(pid, []).append(v)
        return [sum(vs) / len(vs) for pid, vs in sorted(sums.items())]
    return [v for _, v in raw]


def find_predictors_and_markers(
    model: TrajectoryModel,
    cohort: Cohort,
    alpha_fdr: float = DEFAULT_ALPHA_FDR,
    per_patient_means: bool = False,
) -> EnrichmentReport:
    """Run all (trajectory, phase, feature) tests with per-family BH-FDR.

    Features that cannot be tested (too few values, degenerate tables, no
    fork) are listed with an explicit skip reason instead of a result.
    ``per_patient_means`` switches numeric tests to per-patient averages
    as a sensitivity mode; the default is visit-level values.
    """
    if not model.labels:
        raise ValidationError("model has no labeled trajectories")
    report = EnrichmentReport(alpha_fdr=alpha_fdr)
    for trajectory in sorted(model.labels):
        for phase in PHASES:
            role = _ROLE_OF_PHASE[phase]
            try:
                split = build_fork_split(model, cohort, trajectory, phase)
            except ValidationError as exc:
                for feature in cohort.catalog:
                    report.skipped.append(SkippedTest(feature.code, role, trajectory, str(exc)))
                continue
            family: list[TestResult] = []
            for feature in cohort.catalog:
                outcome = _test_feature(cohort, split, feature.code, role, per_patient_means)
                if isinstance(outcome, SkippedTest):
                    report.skipped.append(outcome)
                else:
                    family.append(outcome)
            if family:
                qs = bh_fdr([r.p_value for r in family])
                for r, q in zip(family, qs):
                    r.q_value = q
                    r.significant = q < alpha_fdr
                report.results.extend(family)
    report.results.sort(
        key=lambda r: (
            r.q_value,
            -abs(r.statistic) if math.isfinite(r.statistic) else -math.inf,
            r.trajectory,
            r.role,
            r.feature_code,
        )
    )
    return report


def _test_feature(cohort, split, code, role, per_patient_means):
    feature = cohort.catalog.get(code)
    a = _collect_values(cohort, split.group_a, code, per_patient_means)
    b = _collect_values(cohort, split.group_b, code, per_patient_means)
    if feature.kind == "numeric":
        if len(a) < 2 or len(b) < 2:
            return SkippedTest(code, role, split.trajectory, f"insufficient samples (n_a={len(a)}, n_b={len(b)})")
        t, df, p = welch_t_test(a, b)
        mean_a = sum(a) / len(a)
        mean_b = sum(b) / len(b)
        direction = "higher_in_trajectory" if mean_a > mean_b else "lower_in_trajectory"
        return TestResult(
            feature_code=code,
            role=role,
            trajectory=split.trajectory,
            statistic=t,
            df=df,
            p_value=p,
            q_value=p,
            n_a=len(a),
            n_b=len(b),
            effect_direction=direction,
            significant=False,
        )
    levels = sorted({str(v) for v in a} | {str(v) for v in b})
    counts_a = {lvl: 0 for lvl in levels}
    counts_b = {lvl: 0 for lvl in levels}
    for v in a:
        counts_a[str(v)] += 1
    for v in b:
        counts_b[str(v)] += 1
    # levels unobserved in either group were never added; rows are never all-zero
    table = [[counts_a[lvl], counts_b[lvl]] for lvl in levels]
    if len(table) < 2 or not a or not b:
        return SkippedTest(code, role, split.trajectory, "needs >= 2 observed levels and both groups non-empty")
    try:
        stat, df, p = chi_square_test(table)
    except ValidationError as exc:
        return SkippedTest(code, role, split.trajectory, str(exc))
    return TestResult(
        feature_code=code,
        role=role,
        trajectory=split.trajectory,
        statistic=stat,
        df=df,
        p_value=p,
        q_value=p,
        n_a=len(a),
        n_b=len(b),
        effect_direction="categorical",
        significant=False,
    )
