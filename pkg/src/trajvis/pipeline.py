"""End-to-end fitting pipeline: cohort in, labeled model + enrichment out."""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np

from trajvis.branches import (
    annotate_landmarks,
    label_trajectories,
    orient_branch,
    score_branch_ckd_relevance,
    segment_branches,
)
from trajvis.cdm.types import Cohort
from trajvis.embedding import (
    DEFAULT_LATENT_DIM,
    LatentSpace,
    baseline_embed,
    build_age_similarity_graph,
    build_visit_matrix,
    import_latent,
    matrix_rank,
    project_2d,
    standardize_features,
)
from trajvis.enrichment import DEFAULT_ALPHA_FDR, EnrichmentReport, find_predictors_and_markers
from trajvis.errors import ValidationError
from trajvis.lowess import smooth_trajectory
from trajvis.model import TrajectoryModel
from trajvis.tree import (
    DEFAULT_GRAPH_WEIGHT,
    DEFAULT_LANDMARKS,
    DEFAULT_MAX_ITERS,
    DEFAULT_TOL,
    fit_principal_tree,
)


@dataclass
class FitParams:
    landmarks: int = DEFAULT_LANDMARKS
    sigma: float | None = None  # None -> 0.1 x median pairwise distance
    graph_weight: float = DEFAULT_GRAPH_WEIGHT
    max_iters: int = DEFAULT_MAX_ITERS
    tol: float = DEFAULT_TOL
    latent_dim: int = DEFAULT_LATENT_DIM
    span: float = 2.0 / 3.0
    robust_iters: int = 3
    alpha_fdr: float = DEFAULT_ALPHA_FDR
    latent_import: str | None = None
    coords_import: str | None = None


@dataclass
class FitSummary:
    iterations: int
    final_objective: float
    n_branches: int
    n_terminal_branches: int
    labels: dict[str, int]
    n_significant: int
    latent_dim_effective: int
    age_graph_nodes: int
    age_graph_edges: int


def run_fit(
    cohort: Cohort, params: FitParams | None = None
) -> tuple[TrajectoryModel, EnrichmentReport, FitSummary, LatentSpace]:
    """Standardize, embed, project, fit, segment, label, smooth, test."""
    params = params or FitParams()
    matrix = build_visit_matrix(cohort)

    if params.latent_import:
        latent_space = import_latent(params.latent_import, cohort)
        d_effective = latent_space.latent.shape[1]
    else:
        standardized, _ = standardize_features(matrix.values, matrix.mask, matrix.feature_codes)
        centered = standardized - standardized.mean(axis=0)
        achievable = matrix_rank(np.linalg.svd(centered, compute_uv=False))
        d_effective = min(params.latent_dim, achievable)
        if d_effective < 1:
            raise ValidationError("visit matrix has rank 0; nothing to embed")
        latent_space = LatentSpace(
            visit_keys=matrix.visit_keys,
            latent=baseline_embed(standardized, d_effective),
            provenance="baseline",
        )

    if params.coords_import:
        coords2d = project_2d(latent_space.latent, "import", params.coords_import, cohort)
    else:
        coords2d = project_2d(latent_space.latent, "pca")
    latent_space.coords2d = coords2d

    tree = fit_principal_tree(
        coords2d,
        n_landmarks=params.landmarks,
        sigma=params.sigma,
        graph_weight=params.graph_weight,
        max_iters=params.max_iters,
        tol=params.tol,
    )

    ages = matrix.ages
    egfr = [e.numeric_value("egfr") for e in matrix.visits]
    annotations = annotate_landmarks(tree, ages, egfr)

    branches = segment_branches(tree)
    for b in branches:
        if len(b.landmark_ids) < 2:
            continue
        try:
            b.direction_sign = orient_branch(b, annotations)
        except ValidationError as exc:
            warnings.warn(f"cannot orient branch {b.branch_id}: {exc}", stacklevel=2)
        try:
            b.ckd_relevance = score_branch_ckd_relevance(b, annotations)
        except ValidationError:
            b.ckd_relevance = None

    labels = label_trajectories(branches, annotations)

    smoothed = {}
    for b in branches:
        pts = tree.landmarks[b.oriented_landmarks()]
        smoothed[b.branch_id] = (
            smooth_trajectory(pts, params.span, params.robust_iters) if len(pts) >= 3 else pts.copy()
        )

    model = TrajectoryModel(
        tree=tree,
        branches=branches,
        labels=labels,
        smoothed_curves=smoothed,
        annotations=annotations,
        visit_keys=matrix.visit_keys,
        coords2d=coords2d,
        provenance=latent_space.provenance,
        params={
            **{k: v for k, v in asdict(params).items()},
            "sigma_effective": tree.sigma,
            "latent_dim_effective": d_effective,
        },
    )

    report = find_predictors_and_markers(model, cohort, params.alpha_fdr) if labels else EnrichmentReport(
        alpha_fdr=params.alpha_fdr
    )

    graph = build_age_similarity_graph(cohort)
    summary = FitSummary(
        iterations=len(tree.fit_trace),
        final_objective=tree.fit_trace[-1],
        n_branches=len(branches),
        n_terminal_branches=sum(1 for b in branches if b.kind == "terminal"),
        labels=labels,
        n_significant=len(report.significant_results()),
        latent_dim_effective=d_effective,
        age_graph_nodes=len(graph.nodes),
        age_graph_edges=len(graph.edges),
    )
    return model, report, summary, latent_space
