"""Versioned, checksummed artifact files (model, enrichment report, manifest).

Artifacts are JSON with a schema_version and a sha256 checksum over the
canonical payload encoding (sorted keys, no whitespace). Floats serialize
through Python's shortest round-trip repr, so load(persist(m)) restores
every value bit-for-bit. Writes are atomic (temp file + rename).
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from trajvis.branches import Branch, LandmarkAnnotation
from trajvis.enrichment import EnrichmentReport, SkippedTest, TestResult
from trajvis.errors import ArtifactError
from trajvis.model import TrajectoryModel
from trajvis.tree import PrincipalTree

MODEL_SCHEMA_VERSION = 1
ENRICHMENT_SCHEMA_VERSION = 1


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def atomic_write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _checksum(payload_text: str) -> str:
    return "sha256:" + hashlib.sha256(payload_text.encode()).hexdigest()


def _write_envelope(payload: dict, schema_version: int, path: str | Path) -> None:
    payload_text = canonical_json(payload)
    envelope = {
        "schema_version": schema_version,
        "checksum": _checksum(payload_text),
        "payload": payload,
    }
    atomic_write_text(path, canonical_json(envelope) + "\n")


def _read_envelope(path: str | Path, expected_version: int, what: str) -> dict:
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"{what} not found: {path}")
    try:
        envelope = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"{path}: corrupt or truncated {what} ({exc})") from exc
    if not isinstance(envelope, dict) or "payload" not in envelope:
        raise ArtifactError(f"{path}: not a {what} envelope")
    found = envelope.get("schema_version")
    if found != expected_version:
        raise ArtifactError(
            f"{path}: {what} schema_version mismatch (expected {expected_version}, found {found})"
        )
    payload_text = canonical_json(envelope["payload"])
    if _checksum(payload_text) != envelope.get("checksum"):
        raise ArtifactError(f"{path}: {what} checksum mismatch (file damaged?)")
    return envelope["payload"]


def model_to_payload(model: TrajectoryModel) -> dict:
    return {
        "provenance": model.provenance,
        "params": model.params,
        "visits": [[p, e] for p, e in model.visit_keys],
        "coords2d": model.coords2d.tolist(),
        "tree": {
            "landmarks": model.tree.landmarks.tolist(),
            "edges": [[int(i), int(j)] for i, j in model.tree.edges],
            "assignments": [int(a) for a in model.tree.assignments],
            "fit_trace": list(model.tree.fit_trace),
            "sigma": model.tree.sigma,
            "graph_weight": model.tree.graph_weight,
        },
        "annotations": {
            "median_age": model.annotations.median_age,
            "median_egfr": model.annotations.median_egfr,
            "visit_count": model.annotations.visit_count,
        },
        "branches": [
            {
                "branch_id": b.branch_id,
                "landmark_ids": b.landmark_ids,
                "kind": b.kind,
                "direction_sign": b.direction_sign,
                "ckd_relevance": b.ckd_relevance,
                "fork_landmark": b.fork_landmark,
            }
            for b in model.branches
        ],
        "labels": model.labels,
        "smoothed_curves": {str(bid): curve.tolist() for bid, curve in model.smoothed_curves.items()},
    }


def payload_to_model(payload: dict) -> TrajectoryModel:
    tree = PrincipalTree(
        landmarks=np.array(payload["tree"]["landmarks"], dtype=float),
        edges=[(int(i), int(j)) for i, j in payload["tree"]["edges"]],
        assignments=np.array(payload["tree"]["assignments"], dtype=int),
        fit_trace=[float(v) for v in payload["tree"]["fit_trace"]],
        sigma=float(payload["tree"]["sigma"]),
        graph_weight=float(payload["tree"]["graph_weight"]),
    )
    branches = [
        Branch(
            branch_id=int(b["branch_id"]),
            landmark_ids=[int(v) for v in b["landmark_ids"]],
            kind=b["kind"],
            direction_sign=int(b["direction_sign"]),
            ckd_relevance=b["ckd_relevance"],
            fork_landmark=b["fork_landmark"],
        )
        for b in payload["branches"]
    ]
    annotations = LandmarkAnnotation(
        median_age=payload["annotations"]["median_age"],
        median_egfr=payload["annotations"]["median_egfr"],
        visit_count=[int(v) for v in payload["annotations"]["visit_count"]],
    )
    return TrajectoryModel(
        tree=tree,
        branches=branches,
        labels={k: int(v) for k, v in payload["labels"].items()},
        smoothed_curves={int(k): np.array(v, dtype=float) for k, v in payload["smoothed_curves"].items()},
        annotations=annotations,
        visit_keys=[(p, e) for p, e in payload["visits"]],
        coords2d=np.array(payload["coords2d"], dtype=float),
        provenance=payload["provenance"],
        params=payload["params"],
    )


def persist_model(model: TrajectoryModel, path: str | Path) -> None:
    _write_envelope(model_to_payload(model), MODEL_SCHEMA_VERSION, path)


def load_model(path: str | Path) -> TrajectoryModel:
    return payload_to_model(_read_envelope(path, MODEL_SCHEMA_VERSION, "model artifact"))


def models_identical(a: TrajectoryModel, b: TrajectoryModel) -> bool:
    """Field-for-field equality, exact on every float bit pattern."""
    return model_to_payload(a) == model_to_payload(b)


def _result_to_dict(r: TestResult) -> dict:
    d = asdict(r)
    if not math.isfinite(r.statistic):
        # JSON cannot carry inf (degenerate zero-variance convention)
        d["statistic"] = None
        d["statistic_sign"] = 1 if r.statistic > 0 else -1
    return d


def save_enrichment(report: EnrichmentReport, path: str | Path) -> None:
    payload = {
        "alpha_fdr": report.alpha_fdr,
        "results": [_result_to_dict(r) for r in report.results],
        "skipped": [asdict(s) for s in report.skipped],
    }
    _write_envelope(payload, ENRICHMENT_SCHEMA_VERSION, path)


def load_enrichment(path: str | Path) -> EnrichmentReport:
    payload = _read_envelope(path, ENRICHMENT_SCHEMA_VERSION, "enrichment report")
    results = []
    for d in payload["results"]:
        stat = d["statistic"]
        if stat is None:
            stat = math.inf * d.get("statistic_sign", 1)
        results.append(
            TestResult(
                feature_code=d["feature_code"],
                role=d["role"],
                trajectory=d["trajectory"],
                statistic=stat,
                df=d["df"],
                p_value=d["p_value"],
                q_value=d["q_value"],
                n_a=int(d["n_a"]),
                n_b=int(d["n_b"]),
                effect_direction=d["effect_direction"],
                significant=bool(d["significant"]),
            )
        )
    skipped = [SkippedTest(**s) for s in payload["skipped"]]
    return EnrichmentReport(alpha_fdr=payload["alpha_fdr"], results=results, skipped=skipped)


def sha256_of_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


class ManifestTimer:
    def __init__(self):
        self.start = time.monotonic()

    def seconds(self) -> float:
        return round(time.monotonic() - self.start, 3)


def write_manifest(
    path: str | Path,
    command: str,
    inputs: dict[str, str | Path],
    parameters: dict,
    seed: int | None,
    outputs: list[str | Path],
    duration_seconds: float,
) -> None:
    """Reproducibility record written atomically next to the artifacts.

    Identical inputs + parameters + seed reproduce identical artifacts;
    the duration field is informational and varies between runs.
    """
    manifest = {
        "command": command,
        "inputs": {name: sha256_of_file(p) for name, p in sorted(inputs.items())},
        "input_paths": {name: str(p) for name, p in sorted(inputs.items())},
        "parameters": parameters,
        "seed": seed,
        "outputs": [str(p) for p in outputs],
        "duration_seconds": duration_seconds,
    }
    atomic_write_text(path, json.dumps(manifest, sort_keys=True, indent=2) + "\n")
