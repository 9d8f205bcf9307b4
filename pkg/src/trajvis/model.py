"""Fitted trajectory model: visit attribution and per-patient probabilities."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from trajvis.branches import Branch, LandmarkAnnotation
from trajvis.cdm.types import Cohort
from trajvis.errors import ValidationError
from trajvis.tree import PrincipalTree

UNDETERMINED = "undetermined"


@dataclass
class TrajectoryModel:
    """Everything the analytics layer needs, immutable after fitting."""

    tree: PrincipalTree
    branches: list[Branch]
    labels: dict[str, int]  # trajectory label -> branch id
    smoothed_curves: dict[int, np.ndarray]  # branch id -> polyline over oriented landmarks
    annotations: LandmarkAnnotation
    visit_keys: list[tuple[str, str]]
    coords2d: np.ndarray
    provenance: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.visit_keys) != self.coords2d.shape[0]:
            raise ValidationError("coords2d row count must equal visit count")
        seen = {}
        for label, bid in self.labels.items():
            if bid in seen:
                raise ValidationError(f"branch {bid} labeled twice ({seen[bid]} and {label})")
            seen[bid] = label
        object.__setattr__(self, "_label_of_branch", {bid: lab for lab, bid in self.labels.items()})
        object.__setattr__(self, "_visit_row", {key: i for i, key in enumerate(self.visit_keys)})

    def label_of_branch(self, branch_id: int) -> str | None:
        return self._label_of_branch.get(branch_id)

    def visit_row(self, patient_id: str, encounter_id: str) -> int | None:
        return self._visit_row.get((patient_id, encounter_id))


def landmark_branch_map(branches: list[Branch], n_landmarks: int) -> list[list[int]]:
    """Branch ids touching each landmark (forks belong to several)."""
    owner: list[list[int]] = [[] for _ in range(n_landmarks)]
    for b in branches:
        for v in b.landmark_ids:
            owner[v].append(b.branch_id)
    return owner


def attribute_landmark(landmark: int, branches: list[Branch], owner=None) -> int | None:
    """Branch attribution of a landmark: a unique terminal branch, or None.

    Fork landmarks (shared by several branches) and landmarks on internal
    branches are undetermined.
    """
    if owner is None:
        n = max(max(b.landmark_ids) for b in branches) + 1
        owner = landmark_branch_map(branches, n)
    by_id = {b.branch_id: b for b in branches}
    ids = owner[landmark]
    if len(ids) != 1:
        return None
    branch = by_id[ids[0]]
    return branch.branch_id if branch.kind == "terminal" else None


def attribute_visit(visit_coords, tree: PrincipalTree, branches: list[Branch]) -> int | None:
    """Attribute one 2-D point: nearest landmark decides (ties to lowest index)."""
    pt = np.asarray(visit_coords, dtype=float)
    d2 = ((tree.landmarks - pt[None, :]) ** 2).sum(axis=1)
    nearest = int(np.argmin(d2))
    owner = landmark_branch_map(branches, tree.n_landmarks)
    return attribute_landmark(nearest, branches, owner)


def attribute_all(tree: PrincipalTree, branches: list[Branch]) -> list[int | None]:
    """Branch attribution for every fitted visit, via stored assignments."""
    owner = landmark_branch_map(branches, tree.n_landmarks)
    per_landmark = [attribute_landmark(k, branches, owner) for k in range(tree.n_landmarks)]
    return [per_landmark[int(k)] for k in tree.assignments]


@dataclass
class TrajectoryProbability:
    """Step functions P(label | visits up to age) on the patient's age grid."""

    patient_id: str
    ages: list[float]
    per_label: dict[str, list[float]]
    undetermined: list[float]


def trajectory_probability(
    patient_id: str, model: TrajectoryModel, cohort: Cohort
) -> TrajectoryProbability:
    """Cumulative share of the patient's visits attributed to each trajectory.

    At each visit age a_t, P(label) is the count of visits at ages <= a_t
    attributed to the labeled branch divided by all visits at ages <= a_t;
    everything else (fork, trunk, unlabeled branch) is undetermined mass.
    """
    attributions = attribute_all(model.tree, model.branches)
    rows = [
        (cohort.age_at(enc), attributions[model.visit_row(patient_id, enc.encounter_id)])
        for enc in cohort.encounters_for(patient_id)
        if model.visit_row(patient_id, enc.encounter_id) is not None
    ]
    if not rows:
        raise ValidationError(f"patient {patient_id!r} has no fitted visits")
    rows.sort(key=lambda r: r[0])
    grid = sorted({age for age, _ in rows})
    labels = sorted(model.labels)
    per_label = {lab: [] for lab in labels}
    undetermined = []
    for a_t in grid:
        upto = [att for age, att in rows if age <= a_t]
        denom = len(upto)
        labeled_total = 0
        for lab in labels:
            bid = model.labels[lab]
            count = sum(1 for att in upto if att == bid)
            per_label[lab].append(count / denom)
            labeled_total += count
        undetermined.append((denom - labeled_total) / denom)
    return TrajectoryProbability(
        patient_id=patient_id, ages=grid, per_label=per_label, undetermined=undetermined
    )


def patient_memberships(model: TrajectoryModel, cohort: Cohort) -> dict[str, str | None]:
    """Majority trajectory per patient over labeled attributions.

    Patients with no labeled visit, or with a tied vote, map to None and
    are excluded from group comparisons downstream.
    """
    attributions = attribute_all(model.tree, model.branches)
    votes: dict[str, dict[str, int]] = {}
    for (pid, _), att in zip(model.visit_keys, attributions):
        label = model.label_of_branch(att) if att is not None else None
        if label is None:
            continue
        votes.setdefault(pid, {}).setdefault(label, 0)
        votes[pid][label] += 1
    memberships: dict[str, str | None] = {}
    for p in cohort.patients:
        counts = votes.get(p.patient_id)
        if not counts:
            memberships[p.patient_id] = None
            continue
        best = max(counts.values())
        winners = sorted(lab for lab, c in counts.items() if c == best)
        memberships[p.patient_id] = winners[0] if len(winners) == 1 else None
    return memberships
