"""Exception types shared across the package."""


class TrajvisError(Exception):
    """Base class for all package errors."""


class ValidationError(TrajvisError):
    """Input data or parameters violate a documented contract."""


class IngestError(ValidationError):
    """A cohort file is missing, malformed, or internally inconsistent."""


class ArtifactError(TrajvisError):
    """A persisted artifact is unreadable, corrupt, or wrong version."""


class FitError(TrajvisError):
    """Trajectory fitting could not run with the given inputs."""


class FitDivergenceError(FitError):
    """The fitting objective increased; internal invariant violation."""
