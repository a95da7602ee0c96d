"""
msclust Domain Models
=====================

Pydantic v2 models for clustered multi-state event histories.
All models are immutable (frozen); semantic checks live in validate_dataset
so that a single pass can report every violation at once.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable, Iterator
from enum import Enum
from typing import Annotated, Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from msclust.exceptions import DataValidationError, ErrorCode, Violation

logger = logging.getLogger(__name__)


# =============================================================================
# State space
# =============================================================================


class StateSpace(BaseModel):
    """Finite state space {1..k} with absorbing subset and allowed moves.

    If `allowed` is omitted every (h, j) with h transient and h != j is allowed;
    a user-supplied set only tightens validation.
    """

    model_config = ConfigDict(frozen=True)

    k: Annotated[int, Field(ge=2)]
    absorbing: frozenset[int] = frozenset()
    allowed: frozenset[tuple[int, int]] | None = None

    @model_validator(mode="after")
    def _check(self) -> Self:
        bad = [s for s in self.absorbing if not 1 <= s <= self.k]
        if bad:
            raise ValueError(f"absorbing states outside 1..{self.k}: {sorted(bad)}")
        if self.allowed is not None:
            for h, j in self.allowed:
                if not (1 <= h <= self.k and 1 <= j <= self.k) or h == j:
                    raise ValueError(f"invalid transition ({h}, {j})")
                if h in self.absorbing:
                    raise ValueError(f"absorbing state {h} cannot have outgoing transition ({h}, {j})")
        return self

    @property
    def states(self) -> range:
        return range(1, self.k + 1)

    @property
    def transient(self) -> list[int]:
        return [s for s in self.states if s not in self.absorbing]

    @property
    def transitions(self) -> frozenset[tuple[int, int]]:
        if self.allowed is not None:
            return self.allowed
        return frozenset((h, j) for h in self.transient for j in self.states if h != j)

    def is_allowed(self, h: int, j: int) -> bool:
        return (h, j) in self.transitions

    def reachable(self, h: int) -> set[int]:
        """States reachable from h (h included) through allowed transitions."""
        seen = {h}
        frontier = [h]
        while frontier:
            cur = frontier.pop()
            for a, b in self.transitions:
                if a == cur and b not in seen:
                    seen.add(b)
                    frontier.append(b)
        return seen

    def path_states(self, h: int, j: int) -> set[int]:
        """L(h, j): transient states that can be visited on the way from h to j."""
        return {d for d in self.reachable(h) if d not in self.absorbing and j in self.reachable(d)}

    @classmethod
    def illness_death(cls, progressive: bool = True) -> Self:
        """Healthy (1) -> ill (2) -> dead (3), with direct 1 -> 3."""
        allowed = {(1, 2), (1, 3), (2, 3)}
        if not progressive:
            allowed.add((2, 1))
        return cls(k=3, absorbing=frozenset({3}), allowed=frozenset(allowed))

    @classmethod
    def survival(cls) -> Self:
        """Alive (1) -> dead (2)."""
        return cls(k=2, absorbing=frozenset({2}), allowed=frozenset({(1, 2)}))


# =============================================================================
# Subject paths
# =============================================================================


class TerminusKind(str, Enum):
    CENSORED = "censored"
    ABSORBED = "absorbed"


class Transition(BaseModel):
    """One observed h -> j move."""

    model_config = ConfigDict(frozen=True)

    time: float
    from_state: int
    to_state: int


class Terminus(BaseModel):
    """End of follow-up: censoring time or absorption time."""

    model_config = ConfigDict(frozen=True)

    time: float
    kind: TerminusKind = TerminusKind.CENSORED


class SubjectPath(BaseModel):
    """One subject's observed trajectory.

    Attributes:
        subject_id: Identifier, unique within its cluster.
        entry_time: Left-truncation time (0 when observed from the origin).
        initial_state: State occupied at entry.
        records: Ordered transitions, each strictly after entry.
        terminus: Censoring or absorption.
        arm: Sample label (1 or 2) for two-sample designs.
    """

    model_config = ConfigDict(frozen=True)

    subject_id: str
    entry_time: float = 0.0
    initial_state: int = 1
    records: tuple[Transition, ...] = ()
    terminus: Terminus
    arm: int | None = None

    @property
    def final_state(self) -> int:
        return self.records[-1].to_state if self.records else self.initial_state

    def state_at(self, t: float) -> int:
        """State at time t (right-continuous; transitions at t already applied)."""
        state = self.initial_state
        for rec in self.records:
            if rec.time > t:
                break
            state = rec.to_state
        return state

    def observed_at(self, t: float) -> bool:
        """Under observation at t and still followed afterwards."""
        return self.entry_time <= t < self.terminus.time


class Cluster(BaseModel):
    """A cluster (e.g. a centre) of subjects whose histories may be dependent."""

    model_config = ConfigDict(frozen=True)

    cluster_id: str
    members: tuple[SubjectPath, ...]
    declared_size: int | None = None

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def weight_size(self) -> int:
        """M_i for 1/M_i weights; a landmark-restricted cluster keeps its original size."""
        return self.declared_size or self.size

    def arm_size(self, arm: int) -> int:
        return sum(1 for m in self.members if m.arm == arm)


class ClusteredDataset(BaseModel):
    """n clusters of multi-state observations on a common state space."""

    model_config = ConfigDict(frozen=True)

    state_space: StateSpace
    clusters: tuple[Cluster, ...]

    @property
    def n(self) -> int:
        return len(self.clusters)

    @property
    def horizon(self) -> float:
        """tau: largest observed time."""
        return max((m.terminus.time for c in self.clusters for m in c.members), default=0.0)

    @property
    def subject_count(self) -> int:
        return sum(c.size for c in self.clusters)

    @property
    def cluster_sizes(self) -> np.ndarray:
        return np.array([c.size for c in self.clusters], dtype=float)

    def subjects(self) -> Iterator[tuple[Cluster, SubjectPath]]:
        for c in self.clusters:
            for m in c.members:
                yield c, m

    @property
    def has_arms(self) -> bool:
        return any(m.arm is not None for _, m in self.subjects())

    def transition_times(self, pairs: Iterable[tuple[int, int]] | None = None) -> np.ndarray:
        """Sorted distinct times of the given transition types (all types if None)."""
        wanted = set(pairs) if pairs is not None else None
        times = {
            r.time
            for _, m in self.subjects()
            for r in m.records
            if wanted is None or (r.from_state, r.to_state) in wanted
        }
        return np.array(sorted(times), dtype=float)

    def with_clusters(self, clusters: Iterable[Cluster]) -> ClusteredDataset:
        return ClusteredDataset.model_construct(state_space=self.state_space, clusters=tuple(clusters))

    def split_arms(self) -> tuple[ClusteredDataset, ClusteredDataset]:
        """Per-sample datasets over the same cluster ids (arm 1, arm 2)."""
        parts = []
        for arm in (1, 2):
            parts.append(
                self.with_clusters(
                    Cluster.model_construct(
                        cluster_id=c.cluster_id,
                        members=tuple(m for m in c.members if m.arm == arm),
                    )
                    for c in self.clusters
                )
            )
        return parts[0], parts[1]

    def as_singletons(self) -> ClusteredDataset:
        """Every subject as its own cluster (the i.i.d. view)."""
        return self.with_clusters(
            Cluster.model_construct(cluster_id=f"{c.cluster_id}/{m.subject_id}", members=(m,))
            for c, m in self.subjects()
        )


# =============================================================================
# Validation
# =============================================================================


def _path_violations(space: StateSpace, cluster_id: str, path: SubjectPath) -> list[Violation]:
    out: list[Violation] = []

    def add(code: ErrorCode, message: str) -> None:
        out.append(Violation(code=code, message=message, cluster_id=cluster_id, subject_id=path.subject_id))

    if path.entry_time < 0 or not np.isfinite(path.entry_time):
        add(ErrorCode.NON_MONOTONE_TIMES, f"entry time {path.entry_time} must be finite and >= 0")
    if not np.isfinite(path.terminus.time):
        add(ErrorCode.NON_MONOTONE_TIMES, "terminus time must be finite")
    elif path.terminus.time < path.entry_time:
        add(ErrorCode.NON_MONOTONE_TIMES, f"terminus {path.terminus.time} precedes entry {path.entry_time}")
    elif path.terminus.time == path.entry_time:
        add(ErrorCode.EMPTY_FOLLOW_UP, f"entry equals terminus ({path.entry_time})")

    if path.initial_state not in space.states:
        add(ErrorCode.UNKNOWN_STATE, f"initial state {path.initial_state} not in 1..{space.k}")
    elif path.initial_state in space.absorbing:
        add(ErrorCode.TRANSITION_FROM_ABSORBING, f"enters follow-up in absorbing state {path.initial_state}")

    prev_time = path.entry_time
    state = path.initial_state
    for rec in path.records:
        if rec.time <= prev_time:
            add(ErrorCode.NON_MONOTONE_TIMES, f"transition at {rec.time} not after {prev_time}")
        if rec.from_state != state:
            add(ErrorCode.BROKEN_PATH, f"transition at {rec.time} leaves {rec.from_state} but subject is in {state}")
        if rec.from_state not in space.states or rec.to_state not in space.states:
            add(ErrorCode.UNKNOWN_STATE, f"transition {rec.from_state}->{rec.to_state} uses unknown state")
        elif rec.from_state in space.absorbing:
            add(ErrorCode.TRANSITION_FROM_ABSORBING, f"transition {rec.from_state}->{rec.to_state} at {rec.time}")
        elif not space.is_allowed(rec.from_state, rec.to_state):
            add(ErrorCode.DISALLOWED_TRANSITION, f"transition {rec.from_state}->{rec.to_state} at {rec.time}")
        prev_time = rec.time
        state = rec.to_state

    if path.records and path.records[-1].time > path.terminus.time:
        add(ErrorCode.NON_MONOTONE_TIMES, f"last transition after terminus {path.terminus.time}")

    absorbed = state in space.absorbing
    if path.terminus.kind is TerminusKind.ABSORBED:
        if not path.records or not absorbed or path.records[-1].time != path.terminus.time:
            add(ErrorCode.ABSORPTION_MISMATCH, "absorbed terminus must coincide with a final move into an absorbing state")
    elif absorbed and path.records:
        add(ErrorCode.ABSORPTION_MISMATCH, f"reaches absorbing state {state} but terminus is censored")
    return out


def collect_violations(raw: ClusteredDataset, require_arms: bool = False) -> list[Violation]:
    """Every invariant violation in `raw` (empty list means valid)."""
    if not raw.clusters:
        return [Violation(code=ErrorCode.EMPTY_DATASET, message="dataset has no clusters")]

    violations: list[Violation] = []
    seen_clusters: set[str] = set()
    for cluster in raw.clusters:
        if cluster.cluster_id in seen_clusters:
            violations.append(
                Violation(ErrorCode.DUPLICATE_ID, "duplicate cluster id", cluster_id=cluster.cluster_id)
            )
        seen_clusters.add(cluster.cluster_id)
        if not cluster.members:
            violations.append(Violation(ErrorCode.EMPTY_CLUSTER, "cluster has no members", cluster_id=cluster.cluster_id))
            continue

        seen_subjects: set[str] = set()
        for path in cluster.members:
            if path.subject_id in seen_subjects:
                violations.append(
                    Violation(
                        ErrorCode.DUPLICATE_ID,
                        "duplicate subject id",
                        cluster_id=cluster.cluster_id,
                        subject_id=path.subject_id,
                    )
                )
            seen_subjects.add(path.subject_id)
            violations.extend(_path_violations(raw.state_space, cluster.cluster_id, path))
            if require_arms and path.arm not in (1, 2):
                violations.append(
                    Violation(
                        ErrorCode.ARM_MISSING,
                        f"arm label {path.arm!r} (need 1 or 2)",
                        cluster_id=cluster.cluster_id,
                        subject_id=path.subject_id,
                    )
                )

        if require_arms:
            for arm in (1, 2):
                if cluster.arm_size(arm) == 0:
                    violations.append(
                        Violation(
                            ErrorCode.ARM_MISSING_IN_CLUSTER,
                            f"cluster has no members in arm {arm}",
                            cluster_id=cluster.cluster_id,
                        )
                    )
    return violations


def validate_dataset(raw: ClusteredDataset, require_arms: bool = False) -> ClusteredDataset:
    """Return `raw` unchanged if every invariant holds.

    Args:
        raw: Dataset to check.
        require_arms: Also require arm labels 1/2 with both arms present in every
            cluster (two-sample analyses).

    Raises:
        DataValidationError: listing every violation with cluster/subject ids.
    """
    violations = collect_violations(raw, require_arms=require_arms)
    if violations:
        raise DataValidationError(violations)
    logger.debug(f"Validated dataset: {raw.n} clusters, {raw.subject_count} subjects")
    return raw
