"""Shared hand-built datasets."""

from __future__ import annotations

import pytest

from msclust.models import (
    Cluster,
    ClusteredDataset,
    StateSpace,
    SubjectPath,
    Terminus,
    TerminusKind,
    Transition,
)


def censored(subject_id: str, time: float, state: int = 1, entry: float = 0.0, arm: int | None = None) -> SubjectPath:
    return SubjectPath(subject_id=subject_id, entry_time=entry, initial_state=state, terminus=Terminus(time=time), arm=arm)


def moves(
    subject_id: str,
    steps: list[tuple[float, int, int]],
    end: float | None = None,
    arm: int | None = None,
    absorbing: frozenset[int] = frozenset({3}),
) -> SubjectPath:
    """Path through `steps`; absorbed at the last move unless `end` gives a censoring time."""
    records = tuple(Transition(time=t, from_state=h, to_state=j) for t, h, j in steps)
    if end is None:
        assert records[-1].to_state in absorbing
        terminus = Terminus(time=records[-1].time, kind=TerminusKind.ABSORBED)
    else:
        terminus = Terminus(time=end)
    return SubjectPath(subject_id=subject_id, initial_state=steps[0][1], records=records, terminus=terminus, arm=arm)


@pytest.fixture
def illness_death_data() -> ClusteredDataset:
    """Cluster A: 1->2 at 1.0 censored at 2.0, and censored healthy at 3.0; cluster B: 1->3 at 1.5."""
    return ClusteredDataset(
        state_space=StateSpace.illness_death(),
        clusters=(
            Cluster(cluster_id="A", members=(moves("s1", [(1.0, 1, 2)], end=2.0), censored("s2", 3.0))),
            Cluster(cluster_id="B", members=(moves("s3", [(1.5, 1, 3)]),)),
        ),
    )


@pytest.fixture
def survival_data() -> ClusteredDataset:
    """Deaths at 1 and 3, censorings at 2 and 4, in two clusters of two."""
    space = StateSpace.survival()
    dead = frozenset({2})
    return ClusteredDataset(
        state_space=space,
        clusters=(
            Cluster(cluster_id="A", members=(moves("a1", [(1.0, 1, 2)], absorbing=dead), censored("a2", 2.0))),
            Cluster(cluster_id="B", members=(moves("b1", [(3.0, 1, 2)], absorbing=dead), censored("b2", 4.0))),
        ),
    )


@pytest.fixture
def two_arm_data() -> ClusteredDataset:
    """Three clusters, each arm holding a copy of the same histories."""
    clusters = []
    histories = [
        [(0.5, 1, 2), (1.5, 2, 3)],
        [(0.8, 1, 2)],
        [(1.2, 1, 3)],
    ]
    for c, steps in enumerate(histories):
        members = []
        for arm in (1, 2):
            end = None if steps[-1][2] == 3 else 2.5
            members.append(moves(f"x{arm}", steps, end=end, arm=arm))
            members.append(censored(f"y{arm}", 2.0 + 0.1 * c, arm=arm))
        clusters.append(Cluster(cluster_id=f"c{c}", members=tuple(members)))
    return ClusteredDataset(state_space=StateSpace.illness_death(), clusters=tuple(clusters))
