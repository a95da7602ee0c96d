"""Tests for msclust/resample.py - Seed streams, multiplier and cluster-bootstrap replicates"""

from __future__ import annotations

import numpy as np
import pytest

from msclust.estim import Target, target_curve
from msclust.exceptions import MultiStateError
from msclust.infl import InfluenceSet, covariance_at, influence_for, occupation_influence
from msclust.models import ClusteredDataset
from msclust.panel import RiskPanel, Weighting, build_panel
from msclust.resample import (
    Purpose,
    SeedSpec,
    bootstrap_weights,
    cluster_bootstrap_draw,
    multiplier_draw,
    multiplier_matrix,
    replicate_curves,
)
from msclust.sim import SimConfig, simulate_trial

OCCUPATION_2 = Target.occupation(2)


@pytest.fixture
def panel(two_arm_data: ClusteredDataset) -> RiskPanel:
    return build_panel(two_arm_data, Weighting.TYPICAL_MEMBER)


@pytest.fixture
def sut(panel: RiskPanel) -> InfluenceSet:
    return influence_for(panel, OCCUPATION_2)


class TestSeedSpec:
    """Test SeedSpec stream derivation"""

    def test_same_stream_same_draws(self) -> None:
        seed = SeedSpec(master_seed=7)
        a = seed.generator(Purpose.MULTIPLIER, 3).standard_normal(5)
        b = seed.generator(Purpose.MULTIPLIER, 3).standard_normal(5)
        np.testing.assert_array_equal(a, b)

    def test_purposes_do_not_overlap(self) -> None:
        seed = SeedSpec(master_seed=7)
        a = seed.generator(Purpose.MULTIPLIER, 0).random(5)
        b = seed.generator(Purpose.BOOTSTRAP, 0).random(5)
        assert not np.array_equal(a, b)

    def test_child_is_deterministic(self) -> None:
        seed = SeedSpec(master_seed=1)
        assert seed.child(Purpose.STUDY, 4) == seed.child(Purpose.STUDY, 4)
        assert seed.child(Purpose.STUDY, 4) != seed.child(Purpose.STUDY, 5)

    def test_rejects_negative_seed(self) -> None:
        with pytest.raises(ValueError):
            SeedSpec(master_seed=-1)


class TestMultiplier:
    """Test multiplier_draw / multiplier_matrix"""

    def test_zero_multipliers_give_zero(self, sut: InfluenceSet) -> None:
        draw = multiplier_draw(sut, SeedSpec(master_seed=0), 0, xi=np.zeros(sut.n))
        np.testing.assert_array_equal(draw.trajectory, 0.0)

    def test_unit_multipliers_give_zero(self, sut: InfluenceSet) -> None:
        draw = multiplier_draw(sut, SeedSpec(master_seed=0), 0, xi=np.ones(sut.n))
        np.testing.assert_allclose(draw.trajectory, 0.0, atol=1e-12)

    def test_matrix_rows_match_single_draws(self, sut: InfluenceSet) -> None:
        seed = SeedSpec(master_seed=11)
        xi = multiplier_matrix(sut.n, seed, 4)
        for b in range(4):
            np.testing.assert_array_equal(xi[b], multiplier_draw(sut, seed, b).xi)

    def test_replicates_are_reproducible(self, sut: InfluenceSet) -> None:
        a = replicate_curves(sut, "if", OCCUPATION_2, 50, SeedSpec(master_seed=3))
        b = replicate_curves(sut, "if", OCCUPATION_2, 50, SeedSpec(master_seed=3))
        c = replicate_curves(sut, "if", OCCUPATION_2, 50, SeedSpec(master_seed=4))
        np.testing.assert_array_equal(a.trajectories, b.trajectories)
        assert not np.array_equal(a.trajectories, c.trajectories)
        assert a.reps == 50

    def test_replicate_spread_matches_covariance(self) -> None:
        data = simulate_trial(SimConfig(n=40), SeedSpec(master_seed=21))
        influence = occupation_influence(build_panel(data, Weighting.TYPICAL_MEMBER), j=2)
        replicates = replicate_curves(influence, "if", OCCUPATION_2, 2000, SeedSpec(master_seed=5))
        valid = np.flatnonzero(influence.mask)
        for idx in valid[[len(valid) // 4, len(valid) // 2, 3 * len(valid) // 4]]:
            t = float(influence.grid[idx])
            expected = np.sqrt(covariance_at(influence, t, t).value)
            assert np.std(replicates.trajectories[:, idx], ddof=1) == pytest.approx(expected, rel=0.05)


class TestClusterBootstrap:
    """Test cluster_bootstrap_draw / replicate_curves(cb)"""

    def test_weights_are_multinomial(self) -> None:
        u = bootstrap_weights(10, SeedSpec(master_seed=5), 0)
        assert u.sum() == 10
        assert np.all(u >= 0)

    @pytest.mark.parametrize("target", [OCCUPATION_2, Target.transition(1, 2), Target.transition(1, 3, 0.6)])
    def test_identity_weights_reproduce_estimate(self, panel: RiskPanel, target: Target) -> None:
        rep = cluster_bootstrap_draw(panel, target, SeedSpec(master_seed=0), 0, weights=np.ones(panel.n, dtype=int))
        np.testing.assert_array_equal(rep.curve, target_curve(panel, target))

    def test_dataset_source_builds_panel(self, two_arm_data: ClusteredDataset, panel: RiskPanel) -> None:
        seed = SeedSpec(master_seed=2)
        from_data = cluster_bootstrap_draw(two_arm_data, OCCUPATION_2, seed, 1, Weighting.TYPICAL_MEMBER)
        from_panel = cluster_bootstrap_draw(panel, OCCUPATION_2, seed, 1)
        np.testing.assert_array_equal(from_data.curve, from_panel.curve)

    def test_single_cluster_rejected(self, two_arm_data: ClusteredDataset) -> None:
        one = two_arm_data.with_clusters(two_arm_data.clusters[:1])
        with pytest.raises(MultiStateError):
            cluster_bootstrap_draw(one, OCCUPATION_2, SeedSpec(master_seed=0), 0)

    def test_replicates_independent_of_workers(self, panel: RiskPanel) -> None:
        seed = SeedSpec(master_seed=9)
        serial = replicate_curves(panel, "cb", OCCUPATION_2, 8, seed, n_jobs=1)
        parallel = replicate_curves(panel, "cb", OCCUPATION_2, 8, seed, n_jobs=2)
        np.testing.assert_array_equal(serial.trajectories, parallel.trajectories)

    def test_wrong_source_type(self, sut: InfluenceSet, panel: RiskPanel) -> None:
        with pytest.raises(MultiStateError):
            replicate_curves(panel, "if", OCCUPATION_2, 5, SeedSpec(master_seed=0))
        with pytest.raises(MultiStateError):
            replicate_curves(sut, "cb", OCCUPATION_2, 5, SeedSpec(master_seed=0))
