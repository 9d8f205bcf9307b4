"""REST service over a fitted model artifact and its cohort.

All state loads once at startup and is immutable afterwards; every
endpoint is a side-effect-free GET returning JSON, so identical requests
against the same artifact produce byte-identical bodies. Errors use
{code, message, detail} objects with stable code strings.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from trajvis import __version__
from trajvis.artifact import MODEL_SCHEMA_VERSION, load_enrichment, load_model
from trajvis.cdm.ingest import ingest_cohort
from trajvis.cdm.types import Cohort
from trajvis.enrichment import EnrichmentReport
from trajvis.errors import TrajvisError, ValidationError
from trajvis.model import TrajectoryModel
from trajvis.payloads import (
    analysis_payload,
    catalog_payload,
    enrichment_payload,
    indicators_payload,
    map_payload,
    profile_payload,
)

DEFAULT_PORT = 8400


@dataclass
class ServiceConfig:
    model_artifact: str
    patients_csv: str
    observations_csv: str
    catalog_json: str
    enrichment_report: str | None = None
    host: str = "127.0.0.1"
    port: int = DEFAULT_PORT
    static_assets_path: str | None = None
    request_log: bool = False

    @classmethod
    def from_file(cls, path: str | Path) -> "ServiceConfig":
        path = Path(path)
        if not path.exists():
            raise ValidationError(f"config file not found: {path}")
        raw = json.loads(path.read_text())
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        missing = {"model_artifact", "patients_csv", "observations_csv", "catalog_json"} - set(raw)
        if missing:
            raise ValidationError(f"config missing required keys: {sorted(missing)}")
        return cls(**raw)


@dataclass
class ServiceState:
    config: ServiceConfig
    cohort: Cohort
    model: TrajectoryModel
    enrichment: EnrichmentReport | None


def load_state(config: ServiceConfig) -> ServiceState:
    """Fail-fast startup: every referenced file must exist and validate."""
    for label, p in (
        ("model_artifact", config.model_artifact),
        ("patients_csv", config.patients_csv),
        ("observations_csv", config.observations_csv),
        ("catalog_json", config.catalog_json),
    ):
        if not Path(p).exists():
            raise ValidationError(f"{label} does not exist: {p}")
    model = load_model(config.model_artifact)
    cohort = ingest_cohort(config.patients_csv, config.observations_csv, config.catalog_json)
    enrichment = load_enrichment(config.enrichment_report) if config.enrichment_report else None
    missing = [k for k in model.visit_keys if not cohort.has_patient(k[0])]
    if missing:
        raise ValidationError(
            f"model references patients absent from the cohort, e.g. {missing[0][0]!r}"
        )
    return ServiceState(config=config, cohort=cohort, model=model, enrichment=enrichment)


def _error(status: int, code: str, message: str, detail: str = "") -> JSONResponse:
    return JSONResponse(
        status_code=status, content={"code": code, "message": message, "detail": detail}
    )


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="trajvis", version=__version__)
    cohort = state.cohort
    model = state.model

    @app.exception_handler(ValidationError)
    async def _validation_handler(request: Request, exc: ValidationError):
        text = str(exc)
        if "unknown patient" in text or "unknown encounter" in text:
            return _error(404, "not_found", text)
        return _error(400, "bad_request", text)

    @app.exception_handler(TrajvisError)
    async def _trajvis_handler(request: Request, exc: TrajvisError):
        return _error(400, "bad_request", str(exc))

    @app.exception_handler(RequestValidationError)
    async def _fastapi_validation_handler(request: Request, exc: RequestValidationError):
        return _error(400, "bad_request", "invalid query or path parameters", str(exc))

    @app.get("/api/health")
    def health():
        return {
            "status": "ok",
            "version": __version__,
            "model_schema_version": MODEL_SCHEMA_VERSION,
            "n_patients": cohort.n_patients,
            "n_encounters": cohort.n_encounters,
            "n_landmarks": model.tree.n_landmarks,
            "n_branches": len(model.branches),
            "labels": model.labels,
        }

    @app.get("/api/patients")
    def patients(q: str = "", limit: int = 100, offset: int = 0):
        if limit < 1 or offset < 0:
            raise ValidationError("limit must be >= 1 and offset >= 0")
        rows = []
        for p in cohort.patients:
            if q and q not in p.patient_id:
                continue
            encounters = cohort.encounters_for(p.patient_id)
            ages = [cohort.age_at(e) for e in encounters]
            rows.append(
                {
                    "patient_id": p.patient_id,
                    "sex": p.sex,
                    "race": p.race,
                    "n_encounters": len(encounters),
                    "age_range": [min(ages), max(ages)] if ages else None,
                }
            )
        return rows[offset : offset + limit]

    @app.get("/api/patient/{patient_id}/profile")
    def profile(patient_id: str, indicators: str = "egfr"):
        codes = [c for c in indicators.split(",") if c]
        cohort.patient(patient_id)
        return profile_payload(cohort, patient_id, codes)

    @app.get("/api/trajectory/map")
    def traj_map(color_by: str = "egfr", highlight: str | None = None):
        return map_payload(model, cohort, color_by, highlight)

    @app.get("/api/patient/{patient_id}/indicators")
    def indicators(patient_id: str, bin: float = 0.25):
        cohort.patient(patient_id)
        return indicators_payload(cohort, patient_id, bin, state.enrichment)

    @app.get("/api/patient/{patient_id}/analysis")
    def analysis(patient_id: str, bin: float = 1.0):
        return analysis_payload(model, cohort, patient_id, bin)

    @app.get("/api/enrichment")
    def enrichment(trajectory: str | None = None, phase: str | None = None):
        if state.enrichment is None:
            raise ValidationError("service started without an enrichment report")
        return enrichment_payload(state.enrichment, trajectory, phase)

    @app.get("/api/catalog")
    def catalog():
        return catalog_payload(cohort)

    if state.config.static_assets_path:
        app.mount(
            "/", StaticFiles(directory=state.config.static_assets_path, html=True), name="ui"
        )

    return app


def serve(config: ServiceConfig) -> None:
    """Run the service until interrupted (uvicorn handles signals)."""
    import uvicorn

    state = load_state(config)
    app = create_app(state)
    uvicorn.run(
        app,
        host=config.host,
        port=config.port,
        log_level="info" if config.request_log else "warning",
    )
