from trajvis.cdm.catalog import default_catalog, load_catalog, save_catalog
from trajvis.cdm.derive import classify_value, derive_age, derive_egfr
from trajvis.cdm.ingest import export_cohort, ingest_cohort
from trajvis.cdm.synthetic import generate_synthetic, simulate_archetype_cohort
from trajvis.cdm.types import Cohort, Encounter, FeatureCatalog, FeatureDef, Patient

__all__ = [
    "Cohort",
    "Encounter",
    "FeatureCatalog",
    "FeatureDef",
    "Patient",
    "classify_value",
    "default_catalog",
    "derive_age",
    "derive_egfr",
    "export_cohort",
    "generate_synthetic",
    "ingest_cohort",
    "load_catalog",
    "save_catalog",
    "simulate_archetype_cohort",
]
