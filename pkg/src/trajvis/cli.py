"""Command-line entry point.

Exit codes: 0 success, 2 usage/validation failure (diagnostics on
stderr), 3 internal invariant violation (e.g. fit divergence). Every
command writes a manifest recording inputs, parameters, and seed so any
run can be reproduced exactly.
"""

from __future__ import annotations

import json
import sys
from dataclasses import asdict
from pathlib import Path

import click

from trajvis import __version__
from trajvis.artifact import (
    ManifestTimer,
    atomic_write_text,
    canonical_json,
    load_enrichment,
    load_model,
    persist_model,
    save_enrichment,
    write_manifest,
)
from trajvis.cdm.ingest import export_cohort, ingest_cohort
from trajvis.cdm.synthetic import generate_synthetic, simulate_archetype_cohort, write_labels_csv
from trajvis.errors import ArtifactError, FitDivergenceError, IngestError, ValidationError
from trajvis.pipeline import FitParams, run_fit
from trajvis.service import DEFAULT_PORT, ServiceConfig
from trajvis.service import serve as run_service

EXIT_USAGE = 2
EXIT_INTERNAL = 3


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(EXIT_USAGE)


@click.group()
@click.version_option(__version__, prog_name="trajvis")
def main():
    """Trajectory analytics for CKD progression cohorts."""


@main.group()
def synth():
    """Generate synthetic cohort files."""


def _parse_mix(raw: str) -> dict[str, float]:
    parts = raw.split(",")
    if len(parts) != 3:
        raise ValidationError("--mix needs three comma-separated proportions: healthy,late,fast")
    try:
        values = [float(p) for p in parts]
    except ValueError:
        raise ValidationError(f"--mix proportions must be numbers, got {raw!r}") from None
    return {"healthy": values[0], "late": values[1], "fast": values[2]}


@synth.command("archetype")
@click.option("--patients", "n_patients", type=int, default=300, show_default=True, help="Number of patients.")
@click.option("--mix", default="0.34,0.33,0.33", show_default=True, help="healthy,late,fast proportions (sum to 1).")
@click.option("--seed", type=int, default=0, show_default=True, help="RNG seed.")
@click.option("--outdir", type=click.Path(path_type=Path), required=True, help="Output directory.")
def synth_archetype(n_patients: int, mix: str, seed: int, outdir: Path):
    """Planted-trajectory fixture cohort with a ground-truth sidecar."""
    timer = ManifestTimer()
    try:
        mix_map = _parse_mix(mix)
        cohort, labels = simulate_archetype_cohort(n_patients, mix_map, seed)
    except ValidationError as exc:
        _fail(str(exc))
    outdir.mkdir(parents=True, exist_ok=True)
    paths = export_cohort(cohort, outdir)
    labels_path = outdir / "labels.csv"
    write_labels_csv(labels, labels_path)
    outputs = [paths["patients"], paths["observations"], paths["catalog"], labels_path]
    write_manifest(
        outdir / "manifest.json",
        command="synth archetype",
        inputs={},
        parameters={"patients": n_patients, "mix": mix_map},
        seed=seed,
        outputs=outputs,
        duration_seconds=timer.seconds(),
    )
    click.echo(f"wrote {cohort.n_patients} patients, {cohort.n_encounters} encounters to {outdir}")


@synth.command("shift")
@click.option("--patients", "patients_file", type=click.Path(path_type=Path), required=True)
@click.option("--observations", "observations_file", type=click.Path(path_type=Path), required=True)
@click.option("--catalog", "catalog_file", type=click.Path(path_type=Path), required=True)
@click.option("--max-shift-days", type=click.IntRange(min=0), default=183, show_default=True,
              help="Uniform per-patient date shift bound.")
@click.option("--swap-fraction", type=click.FloatRange(0.0, 1.0), default=0.10, show_default=True,
              help="Fraction of encounters whose values are swapped.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--outdir", type=click.Path(path_type=Path), required=True)
def synth_shift(patients_file, observations_file, catalog_file, max_shift_days, swap_fraction, seed, outdir):
    """De-identify an existing cohort by date shifting and encounter swaps."""
    timer = ManifestTimer()
    try:
        source = ingest_cohort(patients_file, observations_file, catalog_file)
        for diag in source.diagnostics:
            click.echo(f"ingest: {diag}", err=True)
        synthetic = generate_synthetic(source, max_shift_days, swap_fraction, seed)
    except (IngestError, ValidationError) as exc:
        _fail(str(exc))
    for diag in synthetic.diagnostics:
        click.echo(f"warning: {diag}", err=True)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = export_cohort(synthetic, outdir)
    write_manifest(
        outdir / "manifest.json",
        command="synth shift",
        inputs={"patients": patients_file, "observations": observations_file, "catalog": catalog_file},
        parameters={"max_shift_days": max_shift_days, "swap_fraction": swap_fraction},
        seed=seed,
        outputs=list(paths.values()),
        duration_seconds=timer.seconds(),
    )
    click.echo(f"wrote synthetic cohort ({synthetic.n_encounters} encounters) to {outdir}")


@main.command("fit")
@click.option("--patients", "patients_file", type=click.Path(path_type=Path), required=True)
@click.option("--observations", "observations_file", type=click.Path(path_type=Path), required=True)
@click.option("--catalog", "catalog_file", type=click.Path(path_type=Path), required=True)
@click.option("--outdir", type=click.Path(path_type=Path), required=True)
@click.option("--landmarks", type=click.IntRange(min=1), default=100, show_default=True,
              help="Number of tree landmarks.")
@click.option("--sigma", type=float, default=None,
              help="Soft-assignment bandwidth [default: 0.1 x median pairwise distance].")
@click.option("--graph-weight", type=click.FloatRange(min=0.0), default=1.0, show_default=True,
              help="Weight of the tree edge-length penalty.")
@click.option("--max-iters", type=click.IntRange(min=1), default=50, show_default=True)
@click.option("--tol", type=float, default=1e-5, show_default=True,
              help="Relative objective-change stopping tolerance.")
@click.option("--latent-dim", type=click.IntRange(min=1), default=18, show_default=True,
              help="Latent dimension (clamped to the matrix rank).")
@click.option("--latent-import", type=click.Path(path_type=Path), default=None,
              help="CSV of externally computed latent vectors.")
@click.option("--coords-import", type=click.Path(path_type=Path), default=None,
              help="CSV of externally computed 2-D coordinates.")
@click.option("--span", type=click.FloatRange(0.0, 1.0, min_open=True), default=2.0 / 3.0,
              show_default="2/3", help="LOWESS span fraction.")
@click.option("--robust-iters", type=click.IntRange(min=1), default=3, show_default=True,
              help="LOWESS regression passes.")
@click.option("--alpha-fdr", type=click.FloatRange(0.0, 1.0), default=0.05, show_default=True,
              help="BH-FDR significance threshold.")
@click.option("--plot/--no-plot", default=False, show_default=True,
              help="Also render an overview figure.")
def fit(patients_file, observations_file, catalog_file, outdir, landmarks, sigma, graph_weight,
        max_iters, tol, latent_dim, latent_import, coords_import, span, robust_iters, alpha_fdr, plot):
    """Fit the trajectory model and run enrichment; writes the artifacts."""
    timer = ManifestTimer()
    for p in (latent_import, coords_import):
        if p is not None and not Path(p).exists():
            _fail(f"import file not found: {p}")
    params = FitParams(
        landmarks=landmarks,
        sigma=sigma,
        graph_weight=graph_weight,
        max_iters=max_iters,
        tol=tol,
        latent_dim=latent_dim,
        span=span,
        robust_iters=robust_iters,
        alpha_fdr=alpha_fdr,
        latent_import=str(latent_import) if latent_import else None,
        coords_import=str(coords_import) if coords_import else None,
    )
    try:
        cohort = ingest_cohort(patients_file, observations_file, catalog_file)
        for diag in cohort.diagnostics:
            click.echo(f"ingest: {diag}", err=True)
        model, report, summary, _ = run_fit(cohort, params)
    except FitDivergenceError as exc:
        click.echo(f"internal error: {exc}", err=True)
        sys.exit(EXIT_INTERNAL)
    except (IngestError, ValidationError) as exc:
        _fail(str(exc))

    outdir.mkdir(parents=True, exist_ok=True)
    model_path = outdir / "model.json"
    enrichment_path = outdir / "enrichment.json"
    persist_model(model, model_path)
    save_enrichment(report, enrichment_path)
    outputs = [model_path, enrichment_path]
    if plot:
        from trajvis.report import render_overview_figure

        outputs.append(render_overview_figure(model, cohort, outdir / "overview.png"))
    write_manifest(
        outdir / "manifest.json",
        command="fit",
        inputs={"patients": patients_file, "observations": observations_file, "catalog": catalog_file},
        parameters=asdict(params),
        seed=None,
        outputs=outputs,
        duration_seconds=timer.seconds(),
    )
    click.echo(f"iterations: {summary.iterations}")
    click.echo(f"final objective: {summary.final_objective:.6g}")
    click.echo(f"branches: {summary.n_branches} ({summary.n_terminal_branches} terminal)")
    click.echo(f"labels: {summary.labels or 'none'}")
    click.echo(f"significant features: {summary.n_significant}")
    click.echo(f"age graph: {summary.age_graph_nodes} nodes, {summary.age_graph_edges} edges")
    click.echo(f"artifacts written to {outdir}")


@main.command("export")
@click.option("--model", "model_file", type=click.Path(path_type=Path), required=True)
@click.option("--patients", "patients_file", type=click.Path(path_type=Path), required=True)
@click.option("--observations", "observations_file", type=click.Path(path_type=Path), required=True)
@click.option("--catalog", "catalog_file", type=click.Path(path_type=Path), required=True)
@click.option("--enrichment", "enrichment_file", type=click.Path(path_type=Path), default=None)
@click.option("--patient", "patient_ids", multiple=True, help="Patient to export (repeatable).")
@click.option("--all", "export_all", is_flag=True, help="Export every patient.")
@click.option("--indicators", default="egfr,hemoglobin", show_default=True,
              help="Indicator pair for the profile payload.")
@click.option("--figures/--no-figures", default=True, show_default=True,
              help="Render a four-panel PNG per patient.")
@click.option("--outdir", type=click.Path(path_type=Path), required=True)
def export(model_file, patients_file, observations_file, catalog_file, enrichment_file,
           patient_ids, export_all, indicators, figures, outdir):
    """Write per-patient review bundles (JSON + optional figure)."""
    timer = ManifestTimer()
    try:
        model = load_model(model_file)
        cohort = ingest_cohort(patients_file, observations_file, catalog_file)
        enrichment = load_enrichment(enrichment_file) if enrichment_file else None
    except (ArtifactError, IngestError, ValidationError) as exc:
        _fail(str(exc))
    if export_all:
        targets = [p.patient_id for p in cohort.patients]
    elif patient_ids:
        targets = list(patient_ids)
    else:
        _fail("specify --patient ID (repeatable) or --all")
    unknown = [pid for pid in targets if not cohort.has_patient(pid)]
    if unknown:
        _fail(f"unknown patient {unknown[0]!r}")

    from trajvis.payloads import analysis_payload, indicators_payload, probability_payload, profile_payload

    codes = [c for c in indicators.split(",") if c][:2]
    outdir.mkdir(parents=True, exist_ok=True)
    outputs = []
    for pid in targets:
        usable = [c for c in codes if any(e.numeric_value(c) is not None for e in cohort.encounters_for(pid))]
        bundle = {
            "patient_id": pid,
            "profile": profile_payload(cohort, pid, usable or ["egfr"]),
            "probability": probability_payload(model, cohort, pid),
            "indicators": indicators_payload(cohort, pid, 0.25, enrichment),
            "analysis": analysis_payload(model, cohort, pid, 1.0),
        }
        json_path = outdir / f"{pid}.json"
        atomic_write_text(json_path, canonical_json(bundle) + "\n")
        outputs.append(json_path)
        if figures:
            from trajvis.report import render_patient_figure

            outputs.append(
                render_patient_figure(model, cohort, pid, outdir / f"{pid}.png", usable, enrichment)
            )
    inputs = {"model": model_file, "patients": patients_file,
              "observations": observations_file, "catalog": catalog_file}
    if enrichment_file:
        inputs["enrichment"] = enrichment_file
    write_manifest(
        outdir / "manifest.json",
        command="export",
        inputs=inputs,
        parameters={"patients_exported": len(targets), "figures": figures, "indicators": codes},
        seed=None,
        outputs=outputs,
        duration_seconds=timer.seconds(),
    )
    click.echo(f"exported {len(targets)} patient bundle(s) to {outdir}")


@main.command("serve")
@click.option("--config", "config_file", type=click.Path(path_type=Path), default=None,
              envvar="TRAJVIS_CONFIG", help="Service config JSON [env: TRAJVIS_CONFIG].")
@click.option("--port", type=int, default=None, help=f"Override config port [default: {DEFAULT_PORT}].")
def serve(config_file, port):
    """Start the REST service (and UI, if static assets are configured)."""
    if config_file is None:
        _fail("--config (or TRAJVIS_CONFIG) is required")
    try:
        config = ServiceConfig.from_file(config_file)
        if port is not None:
            config.port = port
        run_service(config)
    except (ArtifactError, ValidationError) as exc:
        _fail(str(exc))


@main.command("validate")
@click.argument("path", type=click.Path(path_type=Path))
@click.option("--kind", type=click.Choice(["auto", "model", "enrichment", "manifest", "catalog",
                                           "patients", "observations", "labels"]),
              default="auto", show_default=True)
def validate(path: Path, kind: str):
    """Schema-check any artifact or cohort file."""
    try:
        detected = _validate_file(path, kind)
    except (ArtifactError, IngestError, ValidationError, json.JSONDecodeError) as exc:
        click.echo(f"INVALID {path}: {exc}", err=True)
        sys.exit(EXIT_USAGE)
    click.echo(f"OK {path} ({detected})")


def _validate_file(path: Path, kind: str) -> str:
    if not path.exists():
        raise ValidationError(f"file not found: {path}")
    if kind == "auto":
        kind = _detect_kind(path)
    if kind == "model":
        load_model(path)
    elif kind == "enrichment":
        load_enrichment(path)
    elif kind == "manifest":
        manifest = json.loads(path.read_text())
        missing = {"command", "inputs", "parameters", "outputs", "duration_seconds"} - set(manifest)
        if missing:
            raise ValidationError(f"manifest missing keys: {sorted(missing)}")
    elif kind == "catalog":
        from trajvis.cdm.catalog import load_catalog

        load_catalog(path)
    elif kind == "patients":
        from trajvis.cdm.ingest import PATIENTS_HEADER, _read_rows

        _read_rows(path, PATIENTS_HEADER)
    elif kind == "observations":
        from trajvis.cdm.ingest import OBSERVATIONS_HEADER, _read_rows

        _read_rows(path, OBSERVATIONS_HEADER)
    elif kind == "labels":
        from trajvis.cdm.synthetic import read_labels_csv

        read_labels_csv(path)
    else:
        raise ValidationError(f"cannot validate kind {kind!r}")
    return kind


def _detect_kind(path: Path) -> str:
    name = path.name.lower()
    if name.endswith(".json"):
        data = json.loads(path.read_text())
        if isinstance(data, list):
            return "catalog"
        if "payload" in data and isinstance(data.get("payload"), dict):
            return "model" if "tree" in data["payload"] else "enrichment"
        if "command" in data:
            return "manifest"
        raise ValidationError("unrecognized JSON artifact")
    if name.endswith(".csv"):
        header = path.open().readline().strip()
        if header == "patient_id,sex,race,birth_date":
            return "patients"
        if header == "patient_id,encounter_id,date,feature_code,value":
            return "observations"
        if header == "patient_id,archetype":
            return "labels"
        raise ValidationError(f"unrecognized CSV header: {header!r}")
    raise ValidationError("cannot detect artifact kind from extension")


if __name__ == "__main__":
    main()
