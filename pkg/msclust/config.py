"""
msclust Configuration Module
============================

Pydantic v2 based analysis defaults.
Supports TOML file loading and validation.
"""

from __future__ import annotations

import tomllib
from pathlib import Path
from typing import Annotated, Any, Self

from pydantic import BaseModel, ConfigDict, Field, field_validator

# =============================================================================
# Constants
# =============================================================================

CONFIG_FILE_NAME = ".msclust.toml"
DEFAULT_REPS = 1000
DEFAULT_ALPHA = 0.05
DEFAULT_DOMAIN_PERCENTILES = (10.0, 90.0)
ROW_SUM_TOLERANCE = 1e-12
CURVE_DIGITS = 17

VALID_WEIGHTINGS = frozenset({"all", "typical"})
VALID_TRANSFORMS = frozenset({"loglog", "logit", "identity"})
VALID_METHODS = frozenset({"if", "cb"})
VALID_TEST_WEIGHTS = frozenset({"indicator", "ratio"})


# =============================================================================
# Configuration Model
# =============================================================================


def _choice(value: Any, valid: frozenset[str], name: str) -> str:
    if not isinstance(value, str):
        raise ValueError(f"{name} must be a string")
    v = value.strip().lower()
    if v not in valid:
        raise ValueError(f"Invalid {name}: {value!r}. Valid: {', '.join(sorted(valid))}")
    return v


class AnalysisConfig(BaseModel):
    """Defaults for estimation, bands and tests.

    Attributes:
        weighting: Cluster weighting, "all" (every member) or "typical" (1/M_i).
        reps: Replicate count B for multiplier or bootstrap resampling.
        alpha: Significance level for intervals, bands and tests.
        transform: Band/interval transform (loglog, logit, identity).
        method: Resampling method, "if" (multiplier) or "cb" (cluster bootstrap).
        domain_lo: Lower percentile of the jump-time distribution bounding the band domain.
        domain_hi: Upper percentile of the jump-time distribution bounding the band domain.
        test_weight: Two-sample weight function (indicator or ratio).
        pvalue_correction: Use (1+#)/(B+1) instead of the plain proportion.
        n_jobs: joblib worker count for replicate generation.
    """

    model_config = ConfigDict(
        validate_assignment=True,
        frozen=False,
        extra="ignore",
    )

    weighting: str = "all"
    reps: Annotated[int, Field(gt=0)] = DEFAULT_REPS
    alpha: Annotated[float, Field(gt=0.0, lt=1.0)] = DEFAULT_ALPHA
    transform: str = "loglog"
    method: str = "if"
    domain_lo: Annotated[float, Field(ge=0.0, le=100.0)] = DEFAULT_DOMAIN_PERCENTILES[0]
    domain_hi: Annotated[float, Field(ge=0.0, le=100.0)] = DEFAULT_DOMAIN_PERCENTILES[1]
    test_weight: str = "ratio"
    pvalue_correction: bool = False
    n_jobs: int = 1

    @field_validator("weighting", mode="before")
    @classmethod
    def validate_weighting(cls, v: Any) -> str:
        return _choice(v, VALID_WEIGHTINGS, "weighting")

    @field_validator("transform", mode="before")
    @classmethod
    def validate_transform(cls, v: Any) -> str:
        return _choice(v, VALID_TRANSFORMS, "transform")

    @field_validator("method", mode="before")
    @classmethod
    def validate_method(cls, v: Any) -> str:
        return _choice(v, VALID_METHODS, "method")

    @field_validator("test_weight", mode="before")
    @classmethod
    def validate_test_weight(cls, v: Any) -> str:
        return _choice(v, VALID_TEST_WEIGHTS, "test_weight")

    @field_validator("n_jobs")
    @classmethod
    def validate_n_jobs(cls, v: int) -> int:
        # joblib semantics: -1 means all cores
        if v == 0 or v < -1:
            raise ValueError("n_jobs must be a positive integer or -1")
        return v

    @property
    def domain(self) -> tuple[float, float]:
        lo, hi = sorted((self.domain_lo, self.domain_hi))
        return lo, hi

    @classmethod
    def load(cls, config_path: Path | None = None) -> Self:
        """Load configuration from TOML file.

        Args:
            config_path: Path to TOML config file. If None, looks for
                         .msclust.toml in the current directory.

        Returns:
            AnalysisConfig instance with loaded or default values.
        """
        toml_path = config_path if config_path and config_path.exists() else cls._find_config_file()

        if toml_path:
            try:
                with open(toml_path, "rb") as f:
                    data = tomllib.load(f)
                return cls.model_validate(data.get("analysis", data))
            except (tomllib.TOMLDecodeError, OSError):
                pass

        return cls()

    @classmethod
    def _find_config_file(cls) -> Path | None:
        config_in_cwd = Path.cwd() / CONFIG_FILE_NAME
        if config_in_cwd.exists():
            return config_in_cwd
        return None

    def to_toml(self) -> str:
        """Generate TOML string from config.

        Returns:
            TOML formatted configuration string.
        """
        return f'''# msclust configuration

[analysis]
weighting = "{self.weighting}"   # all | typical
reps = {self.reps}
alpha = {self.alpha}
transform = "{self.transform}"   # loglog | logit | identity
method = "{self.method}"         # if | cb

# Band domain: percentiles of the jump-time distribution
domain_lo = {self.domain_lo}
domain_hi = {self.domain_hi}

test_weight = "{self.test_weight}"   # indicator | ratio
pvalue_correction = {str(self.pvalue_correction).lower()}
n_jobs = {self.n_jobs}
'''
