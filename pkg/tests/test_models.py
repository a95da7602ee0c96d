"""Tests for msclust/models.py - State spaces, paths and dataset validation"""

from __future__ import annotations

import numpy as np
import pytest

from msclust.exceptions import DataValidationError, ErrorCode
from msclust.models import (
    Cluster,
    ClusteredDataset,
    StateSpace,
    SubjectPath,
    Terminus,
    TerminusKind,
    Transition,
    collect_violations,
    validate_dataset,
)
from tests.conftest import censored, moves


class TestStateSpace:
    """Test StateSpace"""

    def test_illness_death_transitions(self) -> None:
        space = StateSpace.illness_death()
        assert space.transitions == frozenset({(1, 2), (1, 3), (2, 3)})
        assert space.transient == [1, 2]

    def test_recovery_adds_backward_move(self) -> None:
        assert StateSpace.illness_death(progressive=False).is_allowed(2, 1)

    def test_default_allows_every_move_from_transient(self) -> None:
        space = StateSpace(k=3, absorbing=frozenset({3}))
        assert space.is_allowed(2, 1)
        assert not space.is_allowed(3, 1)

    def test_path_states(self) -> None:
        space = StateSpace.illness_death()
        assert space.path_states(1, 3) == {1, 2}
        assert space.path_states(2, 3) == {2}
        assert space.path_states(2, 1) == set()

    def test_absorbing_with_outgoing_rejected(self) -> None:
        with pytest.raises(ValueError):
            StateSpace(k=2, absorbing=frozenset({2}), allowed=frozenset({(2, 1)}))


class TestSubjectPath:
    """Test SubjectPath"""

    @pytest.fixture
    def sut(self) -> SubjectPath:
        return moves("s", [(1.0, 1, 2), (2.0, 2, 3)])

    def test_state_at_is_right_continuous(self, sut: SubjectPath) -> None:
        assert sut.state_at(0.5) == 1
        assert sut.state_at(1.0) == 2
        assert sut.state_at(2.5) == 3

    def test_final_state(self, sut: SubjectPath) -> None:
        assert sut.final_state == 3
        assert censored("c", 1.0).final_state == 1

    def test_observed_at(self) -> None:
        path = censored("c", 3.0, entry=1.0)
        assert not path.observed_at(0.5)
        assert path.observed_at(1.0)
        assert not path.observed_at(3.0)


class TestClusteredDataset:
    """Test ClusteredDataset views"""

    def test_counts(self, illness_death_data: ClusteredDataset) -> None:
        assert illness_death_data.n == 2
        assert illness_death_data.subject_count == 3
        np.testing.assert_array_equal(illness_death_data.cluster_sizes, [2.0, 1.0])
        assert illness_death_data.horizon == 3.0

    def test_transition_times(self, illness_death_data: ClusteredDataset) -> None:
        np.testing.assert_array_equal(illness_death_data.transition_times(), [1.0, 1.5])
        np.testing.assert_array_equal(illness_death_data.transition_times({(1, 3)}), [1.5])

    def test_split_arms_keeps_cluster_ids(self, two_arm_data: ClusteredDataset) -> None:
        arm1, arm2 = two_arm_data.split_arms()
        assert [c.cluster_id for c in arm1.clusters] == [c.cluster_id for c in two_arm_data.clusters]
        assert all(m.arm == 1 for _, m in arm1.subjects())
        assert all(m.arm == 2 for _, m in arm2.subjects())
        assert arm1.subject_count == arm2.subject_count == 6

    def test_as_singletons(self, illness_death_data: ClusteredDataset) -> None:
        flat = illness_death_data.as_singletons()
        assert flat.n == 3
        assert all(c.size == 1 for c in flat.clusters)

    def test_weight_size_defaults_to_size(self) -> None:
        cluster = Cluster(cluster_id="c", members=(censored("a", 1.0),))
        assert cluster.weight_size == 1
        assert cluster.model_copy(update={"declared_size": 4}).weight_size == 4


class TestValidation:
    """Test collect_violations / validate_dataset"""

    def test_valid_dataset_passes(self, illness_death_data: ClusteredDataset) -> None:
        assert validate_dataset(illness_death_data) is illness_death_data

    def test_empty_dataset(self) -> None:
        with pytest.raises(DataValidationError) as exc_info:
            validate_dataset(ClusteredDataset(state_space=StateSpace.illness_death(), clusters=()))
        assert exc_info.value.code == ErrorCode.EMPTY_DATASET.value

    def test_reports_every_violation(self) -> None:
        bad_time = SubjectPath(
            subject_id="a",
            records=(Transition(time=2.0, from_state=1, to_state=2), Transition(time=1.0, from_state=2, to_state=3)),
            terminus=Terminus(time=2.0, kind=TerminusKind.ABSORBED),
        )
        disallowed = SubjectPath(
            subject_id="b",
            records=(Transition(time=1.0, from_state=2, to_state=1),),
            initial_state=2,
            terminus=Terminus(time=3.0),
        )
        data = ClusteredDataset(
            state_space=StateSpace.illness_death(),
            clusters=(Cluster(cluster_id="c", members=(bad_time, disallowed, censored("a", 1.0))),),
        )
        violations = collect_violations(data)
        codes = {v.code for v in violations}
        assert ErrorCode.NON_MONOTONE_TIMES in codes
        assert ErrorCode.DISALLOWED_TRANSITION in codes
        assert ErrorCode.DUPLICATE_ID in codes
        with pytest.raises(DataValidationError) as exc_info:
            validate_dataset(data)
        assert exc_info.value.code == "VALIDATION_FAILED"

    def test_transition_out_of_absorbing(self) -> None:
        path = SubjectPath(
            subject_id="a",
            initial_state=3,
            records=(Transition(time=1.0, from_state=3, to_state=1),),
            terminus=Terminus(time=2.0),
        )
        data = ClusteredDataset(state_space=StateSpace.illness_death(), clusters=(Cluster(cluster_id="c", members=(path,)),))
        assert ErrorCode.TRANSITION_FROM_ABSORBING in {v.code for v in collect_violations(data)}

    def test_censored_in_absorbing_state(self) -> None:
        path = moves("a", [(1.0, 1, 3)], end=2.0)
        data = ClusteredDataset(state_space=StateSpace.illness_death(), clusters=(Cluster(cluster_id="c", members=(path,)),))
        assert {v.code for v in collect_violations(data)} == {ErrorCode.ABSORPTION_MISMATCH}

    def test_empty_follow_up(self) -> None:
        data = ClusteredDataset(
            state_space=StateSpace.illness_death(),
            clusters=(Cluster(cluster_id="c", members=(censored("a", 1.0, entry=1.0),)),),
        )
        assert {v.code for v in collect_violations(data)} == {ErrorCode.EMPTY_FOLLOW_UP}

    def test_require_arms(self, illness_death_data: ClusteredDataset) -> None:
        codes = {v.code for v in collect_violations(illness_death_data, require_arms=True)}
        assert codes == {ErrorCode.ARM_MISSING, ErrorCode.ARM_MISSING_IN_CLUSTER}

    def test_two_arm_data_is_valid(self, two_arm_data: ClusteredDataset) -> None:
        assert collect_violations(two_arm_data, require_arms=True) == []
