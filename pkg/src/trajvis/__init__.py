"""Trajectory analytics for chronic-kidney-disease progression.

Learns branching progression trajectories from longitudinal visit records,
attributes patients to trajectories over time, tests clinical features for
predictor/marker roles, and serves the results over a REST API.
"""

__version__ = "0.1.0"

from trajvis.cdm.types import Cohort, Encounter, FeatureCatalog, FeatureDef, Patient

__all__ = [
    "Cohort",
    "Encounter",
    "FeatureCatalog",
    "FeatureDef",
    "Patient",
    "__version__",
]
