"""Branch structure of a fitted tree: segmentation, direction, relevance.

Forks are nodes of degree >= 3 (degree-4 nodes are possible in an MST, so
the fork definition generalizes past exactly-3). Branches are the maximal
chains whose endpoints are forks or leaves and whose interiors have degree
2; they partition the edge set exactly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from trajvis.errors import ValidationError
from trajvis.stats import pearson_r
from trajvis.tree import PrincipalTree

# |eGFR slope| (units per year) at or below which a trend counts as flat
FLAT_SLOPE = 0.5

TRAJECTORY_LABELS = ("healthy", "late_progression", "fast_progression")


@dataclass
class LandmarkAnnotation:
    """Per-landmark medians over the assigned visits."""

    median_age: list[float | None]
    median_egfr: list[float | None]
    visit_count: list[int]


@dataclass
class Branch:
    branch_id: int
    landmark_ids: list[int]
    kind: str  # "terminal" | "internal"
    direction_sign: int = 0
    ckd_relevance: float | None = None
    fork_landmark: int | None = None

    def oriented_landmarks(self) -> list[int]:
        """Landmarks in progression order.

        direction_sign +1 keeps stored order, -1 reverses; a tie (0) falls
        back to orienting toward the higher-index endpoint.
        """
        seq = self.landmark_ids
        if self.direction_sign > 0:
            return list(seq)
        if self.direction_sign < 0:
            return list(reversed(seq))
        return list(seq) if seq[-1] >= seq[0] else list(reversed(seq))


def annotate_landmarks(tree: PrincipalTree, ages, egfr_values) -> LandmarkAnnotation:
    """Median age / median eGFR / visit count per landmark.

    ``ages`` and ``egfr_values`` are per-visit arrays aligned with
    ``tree.assignments``; eGFR entries may be None where unobserved.
    """
    ages = np.asarray(ages, dtype=float)
    if ages.shape[0] != tree.assignments.shape[0]:
        raise ValidationError("ages must align with tree assignments")
    m = tree.n_landmarks
    median_age: list[float | None] = [None] * m
    median_egfr: list[float | None] = [None] * m
    counts = [0] * m
    for k in range(m):
        members = np.flatnonzero(tree.assignments == k)
        counts[k] = int(members.size)
        if not members.size:
            continue
        median_age[k] = float(np.median(ages[members]))
        observed = [egfr_values[i] for i in members if egfr_values[i] is not None]
        if observed:
            median_egfr[k] = float(np.median(observed))
    return LandmarkAnnotation(median_age=median_age, median_egfr=median_egfr, visit_count=counts)


def segment_branches(tree: PrincipalTree) -> list[Branch]:
    """Split the tree into fork-to-fork / fork-to-leaf chains."""
    m = tree.n_landmarks
    if m == 1:
        return [Branch(branch_id=0, landmark_ids=[0], kind="terminal")]
    adj = tree.adjacency()
    degree = [len(a) for a in adj]
    anchors = {v for v in range(m) if degree[v] != 2}

    chains = []
    seen_edges = set()
    for start in sorted(anchors):
        for first in adj[start]:
            if (min(start, first), max(start, first)) in seen_edges:
                continue
            chain = [start, first]
            prev, cur = start, first
            while cur not in anchors:
                nxt = adj[cur][0] if adj[cur][0] != prev else adj[cur][1]
                chain.append(nxt)
                prev, cur = cur, nxt
            for a, b in zip(chain, chain[1:]):
                seen_edges.add((min(a, b), max(a, b)))
            if chain[0] > chain[-1]:
                chain.reverse()
            chains.append(chain)
    # a pure cycle cannot occur in a tree; every edge is reached from an anchor
    chains.sort()

    degree_of = degree
    branches = []
    for bid, chain in enumerate(chains):
        end_degrees = (degree_of[chain[0]], degree_of[chain[-1]])
        kind = "terminal" if 1 in end_degrees else "internal"
        forks = [v for v in (chain[0], chain[-1]) if degree_of[v] >= 3]
        branches.append(
            Branch(
                branch_id=bid,
                landmark_ids=chain,
                kind=kind,
                fork_landmark=min(forks) if forks else None,
            )
        )
    return branches


def orient_branch(branch: Branch, annotations: LandmarkAnnotation) -> int:
    """Direction of aging along the branch.

    The consecutive age differences telescope, so the sign is that of
    (last annotated landmark age - first annotated landmark age).
    Unannotated landmarks are skipped; fewer than 2 annotated is an error.
    """
    annotated = [v for v in branch.landmark_ids if annotations.median_age[v] is not None]
    if len(annotated) < 2:
        raise ValidationError(
            f"branch {branch.branch_id}: needs >= 2 landmarks with visits to orient "
            f"(got {len(annotated)})"
        )
    delta = annotations.median_age[annotated[-1]] - annotations.median_age[annotated[0]]
    if delta > 0:
        return 1
    if delta < 0:
        return -1
    warnings.warn(
        f"branch {branch.branch_id}: age trend is tied; orienting toward the "
        f"higher-index endpoint",
        stacklevel=2,
    )
    return 0


def score_branch_ckd_relevance(branch: Branch, annotations: LandmarkAnnotation) -> float | None:
    """Pearson correlation of oriented node order vs median eGFR.

    Returns None (explicitly undefined) when the branch eGFR medians have
    zero variance; never propagates NaN.
    """
    ordered = branch.oriented_landmarks()
    egfr = [annotations.median_egfr[v] for v in ordered if annotations.median_egfr[v] is not None]
    if len(egfr) < 3:
        raise ValidationError(
            f"branch {branch.branch_id}: needs >= 3 annotated landmarks to score "
            f"(got {len(egfr)})"
        )
    ranks = list(range(1, len(egfr) + 1))
    if len(set(egfr)) == 1:
        return None
    return pearson_r(ranks, egfr)


def branch_egfr_slope(branch: Branch, annotations: LandmarkAnnotation) -> float | None:
    """Least-squares eGFR change per year of median landmark age."""
    pairs = [
        (annotations.median_age[v], annotations.median_egfr[v])
        for v in branch.landmark_ids
        if annotations.median_age[v] is not None and annotations.median_egfr[v] is not None
    ]
    if len(pairs) < 2:
        return None
    ages = np.array([p[0] for p in pairs])
    egfrs = np.array([p[1] for p in pairs])
    da = ages - ages.mean()
    denom = (da**2).sum()
    if denom == 0:
        return None
    return float((da * (egfrs - egfrs.mean())).sum() / denom)


def label_trajectories(
    branches: list[Branch], annotations: LandmarkAnnotation
) -> dict[str, int]:
    """Attach healthy / late / fast labels to terminal branches.

    Candidates are terminal branches with a defined relevance and slope.
    Severity order is by eGFR slope ascending (steepest decline first),
    with relevance then branch id breaking ties. With three or more
    candidates the two steepest take fast and late and the flattest of the
    rest takes healthy; with fewer, labels are assigned only where the
    trend supports them (flat -> healthy, declining -> fast/late) and a
    warning is emitted.
    """
    if not any(b.kind == "terminal" for b in branches):
        raise ValidationError("no terminal branches to label")
    candidates = []
    for b in branches:
        if b.kind != "terminal" or b.ckd_relevance is None:
            continue
        slope = branch_egfr_slope(b, annotations)
        if slope is None:
            continue
        candidates.append((b.branch_id, slope, b.ckd_relevance))
    labels: dict[str, int] = {}
    if not candidates:
        warnings.warn("no labelable terminal branches (missing relevance or slope)", stacklevel=2)
        return labels
    severity = sorted(candidates, key=lambda c: (c[1], c[2], c[0]))
    if len(severity) >= 3:
        labels["fast_progression"] = severity[0][0]
        labels["late_progression"] = severity[1][0]
        rest = severity[2:]
        healthy = min(rest, key=lambda c: (abs(c[1]), c[0]))
        labels["healthy"] = healthy[0]
        return labels

    warnings.warn(
        f"only {len(severity)} labelable terminal branches; labeling what exists",
        stacklevel=2,
    )
    remaining = list(severity)
    flattest = min(remaining, key=lambda c: (abs(c[1]), c[0]))
    if abs(flattest[1]) <= FLAT_SLOPE:
        labels["healthy"] = flattest[0]
        remaining = [c for c in remaining if c[0] != flattest[0]]
    for label in ("fast_progression", "late_progression"):
        if not remaining:
            break
        candidate = remaining.pop(0)
        if candidate[1] <= -FLAT_SLOPE:
            labels[label] = candidate[0]
    return labels
