"""
Resampling
==========

Multiplier (wild) realizations from influence sets and the nonparametric
cluster bootstrap, both driven by per-replicate RNG streams derived from
(master_seed, purpose, index) so results never depend on scheduling.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import IntEnum
from typing import Annotated, Literal

import numpy as np
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field

from msclust.estim import Target, needed_states, target_curve, target_grid
from msclust.exceptions import MultiStateError, ReplicateError
from msclust.infl import InfluenceSet
from msclust.models import ClusteredDataset
from msclust.panel import RiskPanel, Weighting, build_panel

logger = logging.getLogger(__name__)


class Purpose(IntEnum):
    """Stream families; part of the spawn key so they never overlap."""

    MULTIPLIER = 1
    BOOTSTRAP = 2
    SIMULATION = 3
    STUDY = 4


class SeedSpec(BaseModel):
    """Master seed plus the stream derivation rule.

    Stream (purpose, index) is Philox seeded from
    SeedSequence(master_seed, spawn_key=(purpose, index)).
    """

    model_config = ConfigDict(frozen=True)

    master_seed: Annotated[int, Field(ge=0, lt=2**64)]

    def sequence(self, purpose: Purpose, index: int, *extra: int) -> np.random.SeedSequence:
        return np.random.SeedSequence(entropy=self.master_seed, spawn_key=(int(purpose), int(index), *extra))

    def generator(self, purpose: Purpose, index: int, *extra: int) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(self.sequence(purpose, index, *extra)))

    def child(self, purpose: Purpose, index: int) -> SeedSpec:
        """Derived master seed for a nested job (e.g. one study replicate)."""
        state = self.sequence(purpose, index).generate_state(2, dtype=np.uint32)
        return SeedSpec(master_seed=int(state[0]) << 32 | int(state[1]))


# =============================================================================
# Multiplier draws
# =============================================================================


@dataclass(frozen=True, eq=False)
class MultiplierRealization:
    """B(t_g) = n^-1/2 sum_i g_i(t_g) xi_i."""

    index: int
    grid: np.ndarray
    trajectory: np.ndarray
    xi: np.ndarray
    mask: np.ndarray


def multiplier_draw(
    influence: InfluenceSet,
    seed: SeedSpec,
    b: int,
    xi: np.ndarray | None = None,
) -> MultiplierRealization:
    """One multiplier realization; `xi` overrides the standard normal draws."""
    if xi is None:
        xi = seed.generator(Purpose.MULTIPLIER, b).standard_normal(influence.n)
    xi = np.asarray(xi, dtype=float)
    trajectory = xi @ influence.values / np.sqrt(influence.n)
    return MultiplierRealization(index=b, grid=influence.grid, trajectory=trajectory, xi=xi, mask=influence.mask)


def multiplier_matrix(n: int, seed: SeedSpec, reps: int) -> np.ndarray:
    """xi draws for replicates 0..reps-1, shape (reps, n); row b equals multiplier_draw's draws for b."""
    return np.stack([seed.generator(Purpose.MULTIPLIER, b).standard_normal(n) for b in range(reps)])


# =============================================================================
# Cluster bootstrap
# =============================================================================


@dataclass(frozen=True, eq=False)
class BootstrapReplicate:
    """Multinomial cluster weights and the re-estimated target curve on the original grid.

    `valid` is False where a needed bootstrap risk set is empty.
    """

    index: int
    weights: np.ndarray
    grid: np.ndarray
    curve: np.ndarray
    valid: np.ndarray


def bootstrap_weights(n: int, seed: SeedSpec, b: int) -> np.ndarray:
    """(U_1..U_n) ~ Multinomial(n; 1/n, ..., 1/n)."""
    return seed.generator(Purpose.BOOTSTRAP, b).multinomial(n, np.full(n, 1.0 / n))


def cluster_bootstrap_draw(
    source: ClusteredDataset | RiskPanel,
    target: Target,
    seed: SeedSpec,
    b: int,
    weighting: Weighting = Weighting.ALL_MEMBERS,
    weights: np.ndarray | None = None,
    landmarked: bool = False,
) -> BootstrapReplicate:
    """Re-estimate `target` with clusters weighted by multinomial counts.

    Args:
        source: Dataset (a panel is built under `weighting`) or an existing panel.
        weights: Overrides the multinomial draw (ones reproduce the point estimate).
    """
    panel = source if isinstance(source, RiskPanel) else build_panel(source, weighting)
    if panel.n < 2:
        raise MultiStateError("cluster bootstrap needs at least two clusters")
    u = bootstrap_weights(panel.n, seed, b) if weights is None else np.asarray(weights)
    curve = target_curve(panel, target, u.astype(float), landmarked=landmarked)
    grid = target_grid(panel, target)
    _, risk = panel.pooled(u.astype(float))
    start = panel.size - grid.size
    cols = sorted(s - 1 for s in needed_states(panel.state_space, target))
    valid = np.all(risk[start:, cols] > 0, axis=1) if cols else np.ones(grid.size, dtype=bool)
    return BootstrapReplicate(index=b, weights=u, grid=grid, curve=curve, valid=valid)


# =============================================================================
# Replicate matrices
# =============================================================================


@dataclass(frozen=True, eq=False)
class ReplicateSet:
    """B replicate trajectories of sqrt(n)(P* - P) (CB) or B-hat (IF) on one grid.

    Invalid replicate points are NaN.
    """

    method: Literal["if", "cb"]
    target: Target
    grid: np.ndarray
    estimate: np.ndarray
    trajectories: np.ndarray
    n: int
    seed: int

    @property
    def reps(self) -> int:
        return int(self.trajectories.shape[0])

    def second_moment(self) -> np.ndarray:
        """Per-point mean of squared trajectories over valid replicates."""
        return np.nanmean(self.trajectories**2, axis=0)


def _bootstrap_trajectory(
    panel: RiskPanel,
    target: Target,
    estimate: np.ndarray,
    seed: SeedSpec,
    b: int,
    landmarked: bool,
) -> np.ndarray:
    try:
        rep = cluster_bootstrap_draw(panel, target, seed, b, landmarked=landmarked)
    except MultiStateError as e:
        raise ReplicateError(str(e), b) from e
    except (ValueError, FloatingPointError, np.linalg.LinAlgError) as e:
        raise ReplicateError(f"{type(e).__name__}: {e}", b) from e
    return np.where(rep.valid, np.sqrt(panel.n) * (rep.curve - estimate), np.nan)


def replicate_curves(
    source: InfluenceSet | RiskPanel,
    method: Literal["if", "cb"],
    target: Target,
    reps: int,
    seed: SeedSpec,
    n_jobs: int = 1,
    landmarked: bool = False,
) -> ReplicateSet:
    """B replicate trajectories for `target`.

    IF: source is the InfluenceSet, trajectory b is multiplier_draw(source, seed, b).
    CB: source is the RiskPanel, trajectory b is sqrt(n)(P*_b - P) on the original grid.
    """
    if reps < 1:
        raise MultiStateError("reps must be >= 1")

    if method == "if":
        if not isinstance(source, InfluenceSet):
            raise MultiStateError("multiplier replicates need an InfluenceSet")
        xi = multiplier_matrix(source.n, seed, reps)
        trajectories = xi @ source.values / np.sqrt(source.n)
        logger.debug(f"Multiplier replicates: B={reps}, n={source.n}, G={source.grid.size}")
        return ReplicateSet(
            method="if",
            target=target,
            grid=source.grid,
            estimate=source.estimate,
            trajectories=trajectories,
            n=source.n,
            seed=seed.master_seed,
        )

    if not isinstance(source, RiskPanel):
        raise MultiStateError("cluster bootstrap replicates need a RiskPanel")
    estimate = target_curve(source, target, landmarked=landmarked)
    if n_jobs == 1:
        rows = [_bootstrap_trajectory(source, target, estimate, seed, b, landmarked) for b in range(reps)]
    else:
        rows = Parallel(n_jobs=n_jobs)(
            delayed(_bootstrap_trajectory)(source, target, estimate, seed, b, landmarked) for b in range(reps)
        )
    logger.debug(f"Bootstrap replicates: B={reps}, n={source.n}, G={estimate.size}, n_jobs={n_jobs}")
    return ReplicateSet(
        method="cb",
        target=target,
        grid=target_grid(source, target),
        estimate=estimate,
        trajectories=np.vstack(rows) if rows else np.empty((0, estimate.size)),
        n=source.n,
        seed=seed.master_seed,
    )
