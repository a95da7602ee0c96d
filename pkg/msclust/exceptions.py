"""
msclust Exception Classes
=========================

Exception hierarchy for clustered multi-state analyses.

Hierarchy:
    MultiStateError (base)
    ├── ConfigError - Invalid configuration values or files
    ├── ParseError - Malformed input rows (carries the line number)
    ├── DataValidationError - Dataset invariants violated (carries every violation)
    ├── EstimationError - Estimator cannot be evaluated on this data
    ├── DomainError - Request outside the valid time domain / transform range
    └── ReplicateError - A resampling replicate failed (carries its index)
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class ErrorCode(str, Enum):
    # Dataset validation
    EMPTY_DATASET = "EMPTY_DATASET"
    EMPTY_CLUSTER = "EMPTY_CLUSTER"
    DUPLICATE_ID = "DUPLICATE_ID"
    NON_MONOTONE_TIMES = "NON_MONOTONE_TIMES"
    BROKEN_PATH = "BROKEN_PATH"
    TRANSITION_FROM_ABSORBING = "TRANSITION_FROM_ABSORBING"
    DISALLOWED_TRANSITION = "DISALLOWED_TRANSITION"
    UNKNOWN_STATE = "UNKNOWN_STATE"
    EMPTY_FOLLOW_UP = "EMPTY_FOLLOW_UP"
    ABSORPTION_MISMATCH = "ABSORPTION_MISMATCH"
    ARM_MISSING = "ARM_MISSING"
    ARM_MISSING_IN_CLUSTER = "ARM_MISSING_IN_CLUSTER"

    # Parsing / config
    PARSE_ERROR = "PARSE_ERROR"
    BAD_HEADER = "BAD_HEADER"
    INVALID_CONFIG = "INVALID_CONFIG"

    # Estimation
    NO_INITIAL_RISK_SET = "NO_INITIAL_RISK_SET"
    NO_SUBJECTS_AT_LANDMARK = "NO_SUBJECTS_AT_LANDMARK"
    EMPTY_SUPPORT = "EMPTY_SUPPORT"
    INVALID_TARGET = "INVALID_TARGET"

    # Domains
    OUT_OF_DOMAIN = "OUT_OF_DOMAIN"
    EMPTY_DOMAIN = "EMPTY_DOMAIN"
    TRANSFORM_DOMAIN = "TRANSFORM_DOMAIN"
    EMPTY_COMPARISON_DOMAIN = "EMPTY_COMPARISON_DOMAIN"

    # Resampling
    REPLICATE_FAILED = "REPLICATE_FAILED"


class MultiStateError(Exception):
    """Base exception for msclust operations.

    Attributes:
        code: Optional error code for programmatic handling
    """

    def __init__(self, message: str, code: str | None = None) -> None:
        super().__init__(message)
        self.message = message
        self.code = code

    def __str__(self) -> str:
        if self.code:
            return f"[{self.code}] {self.message}"
        return self.message


class ConfigError(MultiStateError):
    """Configuration value or file is invalid."""

    pass


class ParseError(MultiStateError):
    """A transitions file row could not be parsed.

    Attributes:
        line: 1-based line number in the source file (header is line 1)
    """

    def __init__(self, message: str, line: int, code: str | None = ErrorCode.PARSE_ERROR.value) -> None:
        super().__init__(f"line {line}: {message}", code)
        self.line = line


@dataclass(frozen=True)
class Violation:
    """One broken dataset invariant."""

    code: ErrorCode
    message: str
    cluster_id: str | None = None
    subject_id: str | None = None
    line: int | None = None

    def describe(self) -> str:
        where = []
        if self.cluster_id is not None:
            where.append(f"cluster={self.cluster_id}")
        if self.subject_id is not None:
            where.append(f"subject={self.subject_id}")
        if self.line is not None:
            where.append(f"line={self.line}")
        prefix = f"[{self.code.value}]"
        return f"{prefix} {self.message} ({', '.join(where)})" if where else f"{prefix} {self.message}"


class DataValidationError(MultiStateError):
    """Dataset violates one or more invariants.

    Raised when:
    - EMPTY_DATASET: no clusters at all
    - NON_MONOTONE_TIMES / BROKEN_PATH: a subject path is not a valid trajectory
    - TRANSITION_FROM_ABSORBING / DISALLOWED_TRANSITION: a move the state space forbids
    - ARM_MISSING: a two-sample analysis was requested on incomplete arm labels

    Attributes:
        violations: Every violation found, not only the first
    """

    def __init__(self, violations: list[Violation]) -> None:
        self.violations = list(violations)
        codes = sorted({v.code.value for v in self.violations})
        code = codes[0] if len(codes) == 1 else "VALIDATION_FAILED"
        summary = f"{len(self.violations)} violation(s): " + "; ".join(v.describe() for v in self.violations[:5])
        if len(self.violations) > 5:
            summary += f"; ... {len(self.violations) - 5} more"
        super().__init__(summary, code)

    @property
    def codes(self) -> set[ErrorCode]:
        return {v.code for v in self.violations}


class EstimationError(MultiStateError):
    """Estimator is undefined for the supplied data.

    Raised when:
    - NO_INITIAL_RISK_SET: nobody is under observation at time 0+
    - NO_SUBJECTS_AT_LANDMARK: landmark restriction leaves no subjects
    - EMPTY_SUPPORT: no grid point lies in the valid influence domain
    """

    pass


class DomainError(MultiStateError):
    """Request falls outside the valid domain.

    Raised when:
    - OUT_OF_DOMAIN: covariance requested at a time without influence values
    - EMPTY_DOMAIN: band domain is empty after percentile restriction
    - TRANSFORM_DOMAIN: estimate on the boundary of a LogLog/Logit transform
    - EMPTY_COMPARISON_DOMAIN: the two-sample weight is zero everywhere
    """

    pass


class ReplicateError(MultiStateError):
    """A resampling replicate failed.

    Attributes:
        index: Replicate index b
    """

    def __init__(self, message: str, index: int) -> None:
        super().__init__(f"replicate {index}: {message}", ErrorCode.REPLICATE_FAILED.value)
        self.index = index
