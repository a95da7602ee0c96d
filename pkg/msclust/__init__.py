"""
msclust Package
===============

Nonparametric multi-state estimation for clustered event-history data:
working-independence Aalen-Johansen estimators, cluster-robust influence
function variances, multiplier and cluster-bootstrap resampling, confidence
bands and two-sample tests.

Main exports:
    - ClusteredDataset, StateSpace, SubjectPath: Domain models
    - build_panel, Weighting: Cluster-aggregated risk panels
    - aalen_johansen, nelson_aalen, state_occupation: Point estimators
    - AnalysisConfig: Configuration management
    - Exception classes: MultiStateError, DataValidationError, etc.

Example:
    >>> from msclust import read_transitions, state_occupation, Weighting
    >>> data = read_transitions(Path("trial.csv"))
    >>> curve = state_occupation(data, Weighting.TYPICAL_MEMBER)
"""

__version__ = "0.1.0"

from msclust.config import (  # noqa: E402
    CONFIG_FILE_NAME,
    CURVE_DIGITS,
    DEFAULT_ALPHA,
    DEFAULT_DOMAIN_PERCENTILES,
    DEFAULT_REPS,
    ROW_SUM_TOLERANCE,
    AnalysisConfig,
)
from msclust.estim import (  # noqa: E402
    Target,
    aalen_johansen,
    nelson_aalen,
    state_occupation,
)
from msclust.exceptions import (  # noqa: E402
    ConfigError,
    DataValidationError,
    DomainError,
    ErrorCode,
    EstimationError,
    MultiStateError,
    ParseError,
    ReplicateError,
)
from msclust.formats import read_transitions, write_transitions  # noqa: E402
from msclust.models import (  # noqa: E402
    Cluster,
    ClusteredDataset,
    StateSpace,
    SubjectPath,
    Terminus,
    TerminusKind,
    Transition,
    validate_dataset,
)
from msclust.panel import LandmarkSpec, Weighting, build_panel, landmark_restrict  # noqa: E402

__all__ = [
    "__version__",
    # Config
    "AnalysisConfig",
    "CONFIG_FILE_NAME",
    "CURVE_DIGITS",
    "DEFAULT_ALPHA",
    "DEFAULT_DOMAIN_PERCENTILES",
    "DEFAULT_REPS",
    "ROW_SUM_TOLERANCE",
    # Models
    "Cluster",
    "ClusteredDataset",
    "StateSpace",
    "SubjectPath",
    "Terminus",
    "TerminusKind",
    "Transition",
    "validate_dataset",
    # Panels and estimators
    "LandmarkSpec",
    "Weighting",
    "build_panel",
    "landmark_restrict",
    "Target",
    "nelson_aalen",
    "aalen_johansen",
    "state_occupation",
    # I/O
    "read_transitions",
    "write_transitions",
    # Exceptions
    "MultiStateError",
    "ConfigError",
    "ParseError",
    "DataValidationError",
    "EstimationError",
    "DomainError",
    "ReplicateError",
    "ErrorCode",
]


def main() -> None:
    """Entry point for the msclust command.

    This function is called by pyproject.toml's [project.scripts]:
        msclust = "msclust:main"
    """
    from msclust.cli.app import cli_main

    cli_main()
