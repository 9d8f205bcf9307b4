"""Principal spanning-tree fitting over 2-D visit coordinates.

Alternating minimization of

    lambda * sum_{(i,j) in T} ||z_i - z_j||^2
      - sigma * sum_n log sum_k exp(-||x_n - z_k||^2 / sigma)

over landmark positions Z, the spanning tree T (always the Euclidean MST
of Z), and implicit soft assignments. Each iteration recomputes the MST,
the soft responsibilities r_nk proportional to exp(-||x_n - z_k||^2/sigma),
and then solves the exact regularized least-squares update

    (lambda * L + diag(r^T 1)) Z = R^T X

where L is the tree Laplacian. Every block update is an exact minimizer,
so the recorded objective is nonincreasing up to float roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from trajvis.errors import FitDivergenceError, FitError, ValidationError
from trajvis.mst import adjacency, mst, pairwise_distances

DEFAULT_LANDMARKS = 100
DEFAULT_GRAPH_WEIGHT = 1.0
DEFAULT_MAX_ITERS = 50
DEFAULT_TOL = 1e-5

# fit_trace may rise by this relative amount before we call it divergence
_DIVERGENCE_SLACK = 1e-6


@dataclass
class PrincipalTree:
    """Fitted tree: landmark positions, MST edges, hard visit assignments."""

    landmarks: np.ndarray
    edges: list[tuple[int, int]]
    assignments: np.ndarray
    fit_trace: list[float]
    sigma: float
    graph_weight: float
    responsibilities: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_landmarks(self) -> int:
        return self.landmarks.shape[0]

    def degrees(self) -> list[int]:
        deg = [0] * self.n_landmarks
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def adjacency(self) -> list[list[int]]:
        return adjacency(self.n_landmarks, self.edges)


def deterministic_kmeans(points: np.ndarray, k: int, max_iters: int = 100) -> np.ndarray:
    """K-means with reproducible farthest-point seeding.

    The first center is the point nearest the data centroid; each further
    center is the point farthest from its nearest chosen center (ties to
    the lowest index). Lloyd updates run until assignments stabilize;
    clusters that empty out keep their previous centroid.
    """
    n = points.shape[0]
    if k > n:
        raise ValidationError(f"k-means needs k <= n ({k} > {n})")
    centroid = points.mean(axis=0)
    first = int(np.argmin(((points - centroid) ** 2).sum(axis=1)))
    chosen = [first]
    min_d2 = ((points - points[first]) ** 2).sum(axis=1)
    for _ in range(1, k):
        nxt = int(np.argmax(min_d2))
        chosen.append(nxt)
        d2 = ((points - points[nxt]) ** 2).sum(axis=1)
        min_d2 = np.minimum(min_d2, d2)
    centers = points[chosen].astype(float).copy()

    labels = np.full(n, -1)
    for _ in range(max_iters):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = np.argmin(d2, axis=1)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(k):
            members = points[labels == c]
            if len(members):
                centers[c] = members.mean(axis=0)
    return centers


def _objective(points: np.ndarray, landmarks: np.ndarray, edges, sigma: float, lam: float) -> float:
    d2 = ((points[:, None, :] - landmarks[None, :, :]) ** 2).sum(axis=2)
    scaled = -d2 / sigma
    shift = scaled.max(axis=1)
    log_sum = shift + np.log(np.exp(scaled - shift[:, None]).sum(axis=1))
    data_fit = -sigma * log_sum.sum()
    edge_len = sum(((landmarks[i] - landmarks[j]) ** 2).sum() for i, j in edges)
    return lam * edge_len + data_fit


def fit_principal_tree(
    coords2d,
    n_landmarks: int = DEFAULT_LANDMARKS,
    sigma: float | None = None,
    graph_weight: float = DEFAULT_GRAPH_WEIGHT,
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
    keep_responsibilities: bool = False,
    iteration_hook=None,
) -> PrincipalTree:
    """Fit the principal tree; see module docstring for the scheme.

    ``sigma`` defaults to 0.1 x the median pairwise distance of the input.
    ``iteration_hook(iteration, landmarks, edges, objective)`` is invoked
    once per iteration (diagnostics / invariant checks in tests).
    """
    points = np.asarray(coords2d, dtype=float)
    if points.ndim != 2 or points.shape[1] != 2:
        raise ValidationError("coords2d must be an n x 2 matrix")
    if not np.isfinite(points).all():
        raise ValidationError("coords2d contains non-finite values")
    n = points.shape[0]
    if n_landmarks < 1:
        raise ValidationError(f"n_landmarks must be >= 1, got {n_landmarks}")
    if n_landmarks > n:
        raise FitError(f"n_landmarks ({n_landmarks}) exceeds number of points ({n})")
    if sigma is None:
        sigma = default_bandwidth(points)
    if sigma <= 0:
        raise ValidationError(f"sigma must be positive, got {sigma}")
    if graph_weight < 0:
        raise ValidationError(f"graph_weight must be >= 0, got {graph_weight}")

    landmarks = deterministic_kmeans(points, n_landmarks)
    m = n_landmarks
    trace: list[float] = []
    edges: list[tuple[int, int]] = []
    resp = None
    for iteration in range(max_iters):
        edges = mst(landmarks)
        obj = _objective(points, landmarks, edges, sigma, graph_weight)
        if trace:
            prev = trace[-1]
            if obj > prev + _DIVERGENCE_SLACK * max(1.0, abs(prev)):
                raise FitDivergenceError(
                    f"objective increased at iteration {iteration}: {prev} -> {obj}"
                )
            obj = min(obj, prev)  # clamp float roundoff so the trace is monotone
        trace.append(obj)
        if iteration_hook is not None:
            iteration_hook(iteration, landmarks.copy(), list(edges), obj)
        if len(trace) >= 2 and abs(trace[-2] - trace[-1]) <= tol * max(1.0, abs(trace[-2])):
            break

        d2 = ((points[:, None, :] - landmarks[None, :, :]) ** 2).sum(axis=2)
        scaled = -d2 / sigma
        scaled -= scaled.max(axis=1, keepdims=True)
        resp = np.exp(scaled)
        resp /= resp.sum(axis=1, keepdims=True)

        mass = resp.sum(axis=0)
        laplacian = np.zeros((m, m))
        for i, j in edges:
            laplacian[i, i] += 1.0
            laplacian[j, j] += 1.0
            laplacian[i, j] -= 1.0
            laplacian[j, i] -= 1.0
        system = graph_weight * laplacian + np.diag(mass)
        landmarks = np.linalg.solve(system, resp.T @ points)

    edges = mst(landmarks)
    d2 = ((points[:, None, :] - landmarks[None, :, :]) ** 2).sum(axis=2)
    assignments = np.argmin(d2, axis=1)  # argmin takes the lowest index on ties
    return PrincipalTree(
        landmarks=landmarks,
        edges=edges,
        assignments=assignments,
        fit_trace=trace,
        sigma=float(sigma),
        graph_weight=float(graph_weight),
        responsibilities=resp if keep_responsibilities else None,
    )


def default_bandwidth(points: np.ndarray, subsample: int = 2000) -> float:
    """0.1 x median pairwise distance, on a deterministic subsample if large."""
    pts = np.asarray(points, dtype=float)
    if pts.shape[0] > subsample:
        step = int(np.ceil(pts.shape[0] / subsample))
        pts = pts[::step]
    if pts.shape[0] < 2:
        return 1.0
    dist = pairwise_distances(pts)
    iu = np.triu_indices(pts.shape[0], k=1)
    med = float(np.median(dist[iu]))
    return 0.1 * med if med > 0 else 1.0
