"""Tests for msclust/infl.py - Influence trajectories and cluster-robust covariance"""

from __future__ import annotations

import numpy as np
import pytest

from msclust.estim import Target, initial_distribution, nelson_aalen, target_curve
from msclust.exceptions import DomainError, ErrorCode, EstimationError
from msclust.infl import (
    InfluenceSet,
    covariance_at,
    influence_for,
    initial_residuals,
    occupation_influence,
    transition_influence,
    valid_mask,
)
from msclust.models import Cluster, ClusteredDataset, StateSpace, SubjectPath, Terminus, Transition
from msclust.panel import LandmarkSpec, RiskPanel, Weighting, build_panel, landmark_restrict
from msclust.resample import SeedSpec
from msclust.sim import SimConfig, simulate_trial
from tests.conftest import censored, moves


@pytest.fixture
def sut(survival_data: ClusteredDataset) -> InfluenceSet:
    panel = build_panel(survival_data)
    return transition_influence(panel, nelson_aalen(panel), 0.0, 1, 1)


def _duplicated(data: ClusteredDataset) -> ClusteredDataset:
    copies = tuple(c.model_copy(update={"cluster_id": f"{c.cluster_id}'"}) for c in data.clusters)
    return ClusteredDataset(state_space=data.state_space, clusters=data.clusters + copies)


@pytest.fixture
def mixed_data() -> ClusteredDataset:
    """Three clusters with a subject starting ill and a late entrant, so P(0) and pi_hat are not trivial."""
    late = SubjectPath(
        subject_id="s5",
        entry_time=0.5,
        initial_state=1,
        records=(Transition(time=2.0, from_state=1, to_state=2),),
        terminus=Terminus(time=3.5),
    )
    return ClusteredDataset(
        state_space=StateSpace.illness_death(),
        clusters=(
            Cluster(
                cluster_id="A",
                members=(moves("s1", [(1.0, 1, 2), (2.5, 2, 3)]), censored("s2", 3.0), censored("s3", 2.0, state=2)),
            ),
            Cluster(cluster_id="B", members=(moves("s4", [(1.5, 1, 3)]), late)),
            Cluster(
                cluster_id="C",
                members=(
                    moves("s6", [(0.8, 1, 2)], end=1.8),
                    moves("s7", [(1.2, 1, 2), (3.0, 2, 3)]),
                    censored("s8", 2.2),
                ),
            ),
        ),
    )


def _numerical_influence(panel: RiskPanel, target: Target, landmarked: bool = False, eps: float = 1e-6) -> np.ndarray:
    """n times the central difference of the point curve in each cluster's multiplier."""
    rows: list[np.ndarray] = []
    for i in range(panel.n):
        up = np.ones(panel.n)
        down = np.ones(panel.n)
        up[i] += eps
        down[i] -= eps
        diff = target_curve(panel, target, up, landmarked) - target_curve(panel, target, down, landmarked)
        rows.append(panel.n * diff / (2.0 * eps))
    return np.array(rows)


class TestTransitionInfluence:
    """Test transition_influence"""

    def test_matches_survival_closed_form(self, sut: InfluenceSet) -> None:
        np.testing.assert_allclose(sut.values, [[-0.25, -0.125], [0.25, 0.125]], atol=1e-15)

    def test_brute_force_oracle(self, survival_data: ClusteredDataset) -> None:
        # -S(t) sum_{u<=t} n [dN_i - Y_i dA] / (Y_bar (1 - dA)) for the two-state model
        panel = build_panel(survival_data, Weighting.TYPICAL_MEMBER)
        intensity = nelson_aalen(panel)
        influence = transition_influence(panel, intensity, 0.0, 1, 1)
        d_a = intensity.increments[:, 0, 1]
        y_bar = panel.risk_sets[:, 0]
        d_n = panel.cluster_increments()[:, :, 0, 1]
        y = panel.at_risk[:, :, 0]
        phi = panel.n * panel.weights[:, None] * (d_n - y * d_a) / y_bar
        surv = np.cumprod(1.0 - d_a)
        expected = -surv * np.cumsum(phi / (1.0 - d_a), axis=1)
        np.testing.assert_allclose(influence.values, expected, atol=1e-14)

    @pytest.mark.parametrize("weighting", list(Weighting))
    @pytest.mark.parametrize(("h", "j"), [(1, 2), (1, 3), (2, 3)])
    def test_markov_start_after_zero_matches_numerical_derivative(
        self, mixed_data: ClusteredDataset, weighting: Weighting, h: int, j: int
    ) -> None:
        panel = build_panel(mixed_data, weighting)
        influence = transition_influence(panel, nelson_aalen(panel), 1.1, h, j)
        expected = _numerical_influence(panel, Target.transition(h, j, 1.1))
        np.testing.assert_allclose(influence.values, expected, atol=1e-7)

    @pytest.mark.parametrize("weighting", list(Weighting))
    @pytest.mark.parametrize("j", [2, 3])
    def test_landmark_matches_numerical_derivative(self, mixed_data: ClusteredDataset, weighting: Weighting, j: int) -> None:
        restricted = landmark_restrict(mixed_data, LandmarkSpec(s=1.1, h=1))
        panel = build_panel(restricted, weighting)
        assert panel.n == 3
        influence = transition_influence(panel, nelson_aalen(panel), 1.1, 1, j)
        expected = _numerical_influence(panel, Target.transition(1, j, 1.1), landmarked=True)
        np.testing.assert_allclose(influence.values, expected, atol=1e-7)

    def test_estimate_matches_point_curve(self, illness_death_data: ClusteredDataset) -> None:
        panel = build_panel(illness_death_data)
        influence = influence_for(panel, Target.transition(1, 3))
        np.testing.assert_allclose(influence.estimate, target_curve(panel, Target.transition(1, 3)))

    def test_grid_starts_after_s(self, illness_death_data: ClusteredDataset) -> None:
        panel = build_panel(illness_death_data)
        influence = transition_influence(panel, nelson_aalen(panel), 1.0, 1, 3)
        np.testing.assert_array_equal(influence.grid, [1.5])

    def test_standard_errors(self, sut: InfluenceSet) -> None:
        np.testing.assert_allclose(sut.variance(), [1 / 16, 1 / 64])
        np.testing.assert_allclose(sut.standard_errors(), np.sqrt([1 / 32, 1 / 128]))


class TestOccupationInfluence:
    """Test occupation_influence"""

    @pytest.mark.parametrize("weighting", list(Weighting))
    def test_sums_to_zero(self, illness_death_data: ClusteredDataset, weighting: Weighting) -> None:
        influence = occupation_influence(build_panel(illness_death_data, weighting), j=2)
        np.testing.assert_allclose(influence.values.sum(axis=0), 0.0, atol=1e-12)

    @pytest.mark.parametrize("weighting", list(Weighting))
    @pytest.mark.parametrize("j", [1, 2, 3])
    def test_matches_numerical_derivative(self, mixed_data: ClusteredDataset, weighting: Weighting, j: int) -> None:
        panel = build_panel(mixed_data, weighting)
        p0, pi_hat = initial_distribution(panel)
        assert pi_hat < 1.0
        assert np.abs(initial_residuals(panel, p0, pi_hat)).max() > 1e-3
        influence = occupation_influence(panel, j=j)
        expected = _numerical_influence(panel, Target.occupation(j))
        np.testing.assert_allclose(influence.values, expected, atol=1e-7)

    @pytest.mark.parametrize("weighting", list(Weighting))
    def test_initial_residuals_match_numerical_derivative(self, mixed_data: ClusteredDataset, weighting: Weighting) -> None:
        panel = build_panel(mixed_data, weighting)
        p0, pi_hat = initial_distribution(panel)
        eps = 1e-6
        expected: list[np.ndarray] = []
        for i in range(panel.n):
            up = np.ones(panel.n)
            down = np.ones(panel.n)
            up[i] += eps
            down[i] -= eps
            expected.append(panel.n * (initial_distribution(panel, up)[0] - initial_distribution(panel, down)[0]) / (2 * eps))
        np.testing.assert_allclose(initial_residuals(panel, p0, pi_hat), expected, atol=1e-7)

    def test_mask_needs_ill_risk_set(self, illness_death_data: ClusteredDataset) -> None:
        influence = occupation_influence(build_panel(illness_death_data), j=2)
        np.testing.assert_array_equal(influence.mask, [False, True])
        assert np.isnan(influence.standard_errors()[0])

    def test_estimate_matches_point_curve(self, illness_death_data: ClusteredDataset) -> None:
        panel = build_panel(illness_death_data, Weighting.TYPICAL_MEMBER)
        influence = occupation_influence(panel, j=2)
        np.testing.assert_allclose(influence.estimate, target_curve(panel, Target.occupation(2)))

    def test_duplicated_clusters_shrink_se(self, two_arm_data: ClusteredDataset) -> None:
        for weighting in Weighting:
            single = occupation_influence(build_panel(two_arm_data, weighting), j=2)
            double = occupation_influence(build_panel(_duplicated(two_arm_data), weighting), j=2)
            np.testing.assert_allclose(double.variance(), single.variance(), atol=1e-14)
            np.testing.assert_allclose(
                double.standard_errors()[single.mask], single.standard_errors()[single.mask] / np.sqrt(2.0)
            )

    def test_no_events_is_empty_support(self) -> None:
        data = ClusteredDataset(
            state_space=StateSpace.illness_death(),
            clusters=(Cluster(cluster_id="A", members=(censored("a", 2.0), censored("b", 3.0))),),
        )
        with pytest.raises(EstimationError) as exc_info:
            occupation_influence(build_panel(data), j=2)
        assert exc_info.value.code == ErrorCode.EMPTY_SUPPORT.value

    def test_no_events_on_supplied_grid_is_empty_support(self) -> None:
        data = ClusteredDataset(
            state_space=StateSpace.illness_death(),
            clusters=(Cluster(cluster_id="A", members=(censored("a", 2.0),)),),
        )
        panel = build_panel(data, grid=np.array([1.0, 1.5]))
        with pytest.raises(EstimationError):
            transition_influence(panel, nelson_aalen(panel), 0.0, 2, 3)


class TestRandomizedInvariants:
    """Influence invariants on simulated trials"""

    @pytest.mark.parametrize("weighting", list(Weighting))
    @pytest.mark.parametrize("seed", range(10))
    def test_clusters_sum_to_zero(self, seed: int, weighting: Weighting) -> None:
        data = simulate_trial(SimConfig(n=8, size_low=2, size_high=6), SeedSpec(master_seed=seed))
        panel = build_panel(data, weighting)
        intensity = nelson_aalen(panel)
        for influence in (
            occupation_influence(panel, intensity, j=2),
            transition_influence(panel, intensity, 0.0, 1, 3),
        ):
            np.testing.assert_allclose(influence.values.sum(axis=0), 0.0, atol=1e-10)

    @pytest.mark.parametrize("seed", range(10))
    def test_equal_cluster_sizes_make_weightings_agree(self, seed: int) -> None:
        data = simulate_trial(SimConfig(n=8, size_low=4, size_high=4), SeedSpec(master_seed=seed))
        everyone = occupation_influence(build_panel(data, Weighting.ALL_MEMBERS), j=2)
        typical = occupation_influence(build_panel(data, Weighting.TYPICAL_MEMBER), j=2)
        np.testing.assert_allclose(everyone.estimate, typical.estimate, atol=1e-12)
        np.testing.assert_allclose(everyone.values, typical.values, atol=1e-10)


class TestCovariance:
    """Test covariance_at / valid_mask"""

    def test_symmetric(self, sut: InfluenceSet) -> None:
        assert covariance_at(sut, 1.0, 3.0).value == covariance_at(sut, 3.0, 1.0).value

    def test_diagonal_matches_standard_error(self, sut: InfluenceSet) -> None:
        cov = covariance_at(sut, 3.5, 3.5)
        assert cov.value == pytest.approx(1 / 64)
        assert cov.standard_error == pytest.approx(sut.standard_errors()[1])

    @pytest.mark.parametrize("t", [0.5, 4.5])
    def test_out_of_domain(self, sut: InfluenceSet, t: float) -> None:
        with pytest.raises(DomainError) as exc_info:
            covariance_at(sut, t, 1.0)
        assert exc_info.value.code == ErrorCode.OUT_OF_DOMAIN.value

    def test_valid_mask_without_states(self, illness_death_data: ClusteredDataset) -> None:
        panel = build_panel(illness_death_data)
        assert valid_mask(panel, set()).all()
        np.testing.assert_array_equal(valid_mask(panel, {2}), [False, True])
