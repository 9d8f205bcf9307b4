"""Visit matrix construction, age-similarity graph, latent embedding.

The per-visit latent representation is either produced by a deterministic
principal-component baseline or imported from an external model run (the
integration seam for graph-learning embeddings trained elsewhere). The
age-similarity graph over visits is built for validation and diagnostics;
the baseline embedding itself does not consume it.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from trajvis.cdm.types import DAYS_PER_YEAR, Cohort, Encounter
from trajvis.errors import IngestError, ValidationError

DEFAULT_LATENT_DIM = 18
DEFAULT_AGE_WINDOW_DAYS = 30


def visit_encounters(cohort: Cohort) -> list[Encounter]:
    """Encounters carrying at least one numeric observation, canonical order."""
    numeric = set(cohort.catalog.numeric_codes())
    return [
        e
        for e in cohort.encounters
        if any(code in numeric and isinstance(v, (int, float)) for code, v in e.values.items())
    ]


@dataclass
class VisitMatrix:
    """Dense visit-by-feature matrix with an observedness mask.

    ``values`` holds NaN where unobserved; ``mask`` is True where observed.
    The synthetic ``age`` feature is always observed (derived from dates).
    """

    visits: list[Encounter]
    feature_codes: list[str]
    values: np.ndarray
    mask: np.ndarray
    ages: np.ndarray

    @property
    def visit_keys(self) -> list[tuple[str, str]]:
        return [(e.patient_id, e.encounter_id) for e in self.visits]


def build_visit_matrix(cohort: Cohort, observed_only: bool = True) -> VisitMatrix:
    """Assemble the numeric feature matrix over visits in catalog order.

    With ``observed_only`` (the default) features never observed in the
    cohort are dropped, which is what the fitting pipeline wants; pass
    False to keep the full numeric catalog (standardization will then
    reject never-observed features).
    """
    visits = visit_encounters(cohort)
    if not visits:
        raise ValidationError("cohort has no encounters with numeric observations")
    codes = cohort.catalog.numeric_codes()
    ages = np.array([cohort.age_at(e) for e in visits])
    columns: dict[str, np.ndarray] = {}
    for code in codes:
        if code == "age":
            columns[code] = ages.copy()
            continue
        col = np.full(len(visits), np.nan)
        for i, e in enumerate(visits):
            v = e.numeric_value(code)
            if v is not None:
                col[i] = v
        columns[code] = col
    if observed_only:
        codes = [c for c in codes if np.isfinite(columns[c]).any()]
    values = np.column_stack([columns[c] for c in codes])
    return VisitMatrix(
        visits=visits,
        feature_codes=codes,
        values=values,
        mask=np.isfinite(values),
        ages=ages,
    )


@dataclass
class AgeSimilarityGraph:
    """Visits linked when they happened at nearly the same age."""

    nodes: list[tuple[str, str]]
    edges: list[tuple[int, int]]
    window_days: int


def build_age_similarity_graph(
    cohort: Cohort, window_days: int = DEFAULT_AGE_WINDOW_DAYS
) -> AgeSimilarityGraph:
    """Edge (i, j) iff |age_i - age_j| * 365.25 < window_days, i != j."""
    if window_days <= 0:
        raise ValidationError(f"window_days must be positive, got {window_days}")
    visits = visit_encounters(cohort)
    if not visits:
        raise ValidationError("cohort has no encounters with numeric observations")
    ages = np.array([cohort.age_at(e) for e in visits])
    order = np.argsort(ages, kind="stable")
    edges: list[tuple[int, int]] = []
    lo = 0
    for pos in range(len(order)):
        i = order[pos]
        while (ages[i] - ages[order[lo]]) * DAYS_PER_YEAR >= window_days:
            lo += 1
        for prev in range(lo, pos):
            j = order[prev]
            a, b = (int(j), int(i)) if j < i else (int(i), int(j))
            edges.append((a, b))
    edges.sort()
    return AgeSimilarityGraph(
        nodes=[(e.patient_id, e.encounter_id) for e in visits],
        edges=edges,
        window_days=window_days,
    )


@dataclass
class ImputationReport:
    feature_codes: list[str]
    missing_fraction: list[float]
    imputed_count: list[int]
    zero_variance: list[bool]


def standardize_features(
    values: np.ndarray,
    mask: np.ndarray | None = None,
    feature_codes: list[str] | None = None,
) -> tuple[np.ndarray, ImputationReport]:
    """Median-impute missing entries, then z-score each column.

    Columns are scaled to sample standard deviation 1 (ddof=1); columns
    with zero variance become all-zero and are flagged. A feature with no
    observations at all cannot be imputed and raises.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise ValidationError("expected a 2-D visit matrix")
    n, p = values.shape
    if n < 2:
        raise ValidationError(f"standardization needs >= 2 visits, got {n}")
    if mask is None:
        mask = np.isfinite(values)
    out = values.copy()
    missing_fraction = []
    imputed_count = []
    zero_variance = []
    for j in range(p):
        observed = mask[:, j]
        n_obs = int(observed.sum())
        if n_obs == 0:
            raise ValidationError(f"feature column {j} has zero observations; cannot impute")
        median = np.median(out[observed, j])
        n_missing = n - n_obs
        out[~observed, j] = median
        missing_fraction.append(n_missing / n)
        imputed_count.append(n_missing)
        mean = out[:, j].mean()
        sd = out[:, j].std(ddof=1)
        if sd == 0.0:
            out[:, j] = 0.0
            zero_variance.append(True)
        else:
            out[:, j] = (out[:, j] - mean) / sd
            zero_variance.append(False)
    report = ImputationReport(
        feature_codes=list(feature_codes) if feature_codes else [f"col{j}" for j in range(p)],
        missing_fraction=missing_fraction,
        imputed_count=imputed_count,
        zero_variance=zero_variance,
    )
    return out, report


def _signed_svd(centered: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """SVD with each right singular vector's largest-|.| loading forced positive."""
    u, s, vt = np.linalg.svd(centered, full_matrices=False)
    for j in range(vt.shape[0]):
        pivot = int(np.argmax(np.abs(vt[j])))
        if vt[j, pivot] < 0:
            vt[j] = -vt[j]
            u[:, j] = -u[:, j]
    return u, s, vt


def matrix_rank(s: np.ndarray) -> int:
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int((s > s[0] * 1e-10).sum())


def baseline_embed(matrix: np.ndarray, d: int = DEFAULT_LATENT_DIM) -> np.ndarray:
    """Top-d principal-component scores of the standardized visit matrix.

    Components are ordered by decreasing explained variance; signs follow
    the largest-loading-positive convention so results are reproducible.
    """
    x = np.asarray(matrix, dtype=float)
    if not np.isfinite(x).all():
        raise ValidationError("embedding input must be finite (standardize first)")
    n, p = x.shape
    if d < 1:
        raise ValidationError(f"d must be >= 1, got {d}")
    if d > p:
        raise ValidationError(f"d={d} exceeds the number of features ({p})")
    centered = x - x.mean(axis=0)
    u, s, vt = _signed_svd(centered)
    rank = matrix_rank(s)
    if d > rank:
        raise ValidationError(f"d={d} exceeds achievable rank {rank}")
    return u[:, :d] * s[:d]


def explained_variances(matrix: np.ndarray) -> np.ndarray:
    x = np.asarray(matrix, dtype=float)
    centered = x - x.mean(axis=0)
    _, s, _ = np.linalg.svd(centered, full_matrices=False)
    return s**2 / max(x.shape[0] - 1, 1)


@dataclass
class LatentSpace:
    """Per-visit latent vectors and their 2-D projection."""

    visit_keys: list[tuple[str, str]]
    latent: np.ndarray
    provenance: str  # "baseline" | "imported"
    coords2d: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if len(self.visit_keys) != self.latent.shape[0]:
            raise ValidationError("latent row count must equal visit count")
        if not np.isfinite(self.latent).all():
            raise ValidationError("latent matrix contains non-finite entries")


def _read_keyed_csv(path: Path, n_value_cols: int | None, what: str):
    if not path.exists():
        raise IngestError(f"{what} file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:2] != ["patient_id", "encounter_id"]:
            raise IngestError(f"{path}: header must start with patient_id,encounter_id")
        width = len(header) - 2
        if width < 1 or (n_value_cols is not None and width != n_value_cols):
            raise IngestError(f"{path}: expected {n_value_cols or '>=1'} value columns, got {width}")
        rows = {}
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise IngestError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            key = (row[0], row[1])
            if key in rows:
                raise IngestError(f"{path}:{lineno}: duplicate visit key {key}")
            try:
                vec = [float(v) for v in row[2:]]
            except ValueError:
                raise IngestError(f"{path}:{lineno}: non-numeric entry") from None
            if any(not math.isfinite(v) for v in vec):
                raise IngestError(f"{path}:{lineno}: non-finite entry for visit {key}")
            rows[key] = vec
    return rows, width


def _align_rows(rows: dict, visits: list[Encounter], path: Path) -> np.ndarray:
    wanted = [(e.patient_id, e.encounter_id) for e in visits]
    missing = [k for k in wanted if k not in rows]
    if missing:
        raise IngestError(f"{path}: missing visit {missing[0]} (and {len(missing) - 1} more)")
    extra = set(rows) - set(wanted)
    if extra:
        raise IngestError(f"{path}: {len(extra)} rows do not match any cohort visit, e.g. {sorted(extra)[0]}")
    return np.array([rows[k] for k in wanted])


def import_latent(file: str | Path, cohort: Cohort) -> LatentSpace:
    """Load an externally produced latent space keyed by visit."""
    path = Path(file)
    visits = visit_encounters(cohort)
    rows, _ = _read_keyed_csv(path, None, "latent import")
    latent = _align_rows(rows, visits, path)
    return LatentSpace(
        visit_keys=[(e.patient_id, e.encounter_id) for e in visits],
        latent=latent,
        provenance="imported",
    )


def project_2d(
    latent: np.ndarray,
    method: str = "pca",
    coords_file: str | Path | None = None,
    cohort: Cohort | None = None,
) -> np.ndarray:
    """2-D visit coordinates: principal projection or imported file."""
    if method == "pca":
        x = np.asarray(latent, dtype=float)
        if not np.isfinite(x).all():
            raise ValidationError("latent matrix contains non-finite entries")
        if x.shape[1] == 1:
            x = np.column_stack([x[:, 0], np.zeros(x.shape[0])])
        centered = x - x.mean(axis=0)
        u, s, _ = _signed_svd(centered)
        return u[:, :2] * s[:2]
    if method == "import":
        if coords_file is None or cohort is None:
            raise ValidationError("method='import' requires coords_file and cohort")
        path = Path(coords_file)
        visits = visit_encounters(cohort)
        rows, width = _read_keyed_csv(path, 2, "2-D coordinates import")
        return _align_rows(rows, visits, path)
    raise ValidationError(f"unknown projection method {method!r}")
