"""
Two-Sample Tests
================

Kolmogorov-Smirnov-type comparison of transition or occupation probabilities
between two arms observed within the same clusters. Null realizations come
from the multiplier process (one multiplier per cluster, shared by both arms)
or from the cluster bootstrap (one multinomial draw applied to both arms).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Literal

import numpy as np
from joblib import Parallel, delayed

from msclust.estim import Target, needed_states, target_curve, target_grid
from msclust.exceptions import DomainError, ErrorCode, MultiStateError, ReplicateError
from msclust.infl import influence_for
from msclust.models import ClusteredDataset, validate_dataset
from msclust.panel import RiskPanel, Weighting, build_panel
from msclust.resample import SeedSpec, bootstrap_weights, multiplier_matrix

logger = logging.getLogger(__name__)


class WeightKind(str, Enum):
    INDICATOR = "indicator"
    RATIO = "ratio"


@dataclass(frozen=True, eq=False)
class WeightCurve:
    """W(t_g) >= 0, zero wherever a required risk set is empty in either sample."""

    grid: np.ndarray
    values: np.ndarray
    kind: WeightKind
    states: frozenset[int]


def weight_values(risk1: np.ndarray, risk2: np.ndarray, kind: WeightKind, states: set[int]) -> np.ndarray:
    """W from per-sample average at-risk arrays of shape (G, k).

    Indicator: I(prod_l Y1_l Y2_l > 0).
    Ratio:     prod_l Y1_l Y2_l / sum_l (Y1_l + Y2_l).
    """
    cols = sorted(s - 1 for s in states)
    if not cols:
        return np.ones(risk1.shape[0])
    prod = np.prod(risk1[:, cols] * risk2[:, cols], axis=1)
    if kind is WeightKind.INDICATOR:
        return (prod > 0).astype(float)
    total = np.sum(risk1[:, cols] + risk2[:, cols], axis=1)
    return np.divide(prod, total, out=np.zeros_like(prod), where=total > 0)


def make_weight(panel1: RiskPanel, panel2: RiskPanel, kind: WeightKind, states: set[int]) -> WeightCurve:
    """Weight on the common grid with Y_bar_p,l = n^-1 sum_i w_i Y_pi.,l (w_i = 1/M_pi for typical)."""
    if panel1.grid.shape != panel2.grid.shape or not np.array_equal(panel1.grid, panel2.grid):
        raise MultiStateError("two-sample panels must share one grid")
    values = weight_values(panel1.risk_sets / panel1.n, panel2.risk_sets / panel2.n, kind, states)
    return WeightCurve(grid=panel1.grid, values=values, kind=kind, states=frozenset(states))


@dataclass(frozen=True, eq=False)
class TestResult:
    """K = sup_t |W(t) D(t)| with its resampling p-value."""

    __test__ = False

    target: Target
    statistic: float
    scaled_statistic: float
    p_value: float
    grid: np.ndarray
    difference: np.ndarray
    weight: np.ndarray
    reps: int
    method: str
    seed: int
    weighting: Weighting
    weight_kind: WeightKind
    null_statistics: np.ndarray = field(repr=False)

    def to_dict(self) -> dict[str, Any]:
        return {
            "target": self.target.label(),
            "statistic": self.statistic,
            "scaled_statistic": self.scaled_statistic,
            "p_value": self.p_value,
            "reps": self.reps,
            "method": self.method,
            "seed": self.seed,
            "weighting": self.weighting.value,
            "weight": self.weight_kind.value,
        }


def p_value(observed: float, null: np.ndarray, correction: bool = False) -> float:
    """#{null >= observed} / B, or (1 + #) / (B + 1) with the correction."""
    finite = null[np.isfinite(null)]
    exceed = int(np.sum(finite >= observed))
    if correction:
        return (1 + exceed) / (finite.size + 1)
    return exceed / finite.size if finite.size else 1.0


def _bootstrap_null(
    panels: tuple[RiskPanel, RiskPanel],
    target: Target,
    weight: np.ndarray,
    difference: np.ndarray,
    seed: SeedSpec,
    b: int,
) -> float:
    panel1, panel2 = panels
    try:
        u = bootstrap_weights(panel1.n, seed, b).astype(float)
        star = target_curve(panel1, target, u) - target_curve(panel2, target, u)
    except MultiStateError as e:
        raise ReplicateError(str(e), b) from e
    cols = sorted(s - 1 for s in needed_states(panel1.state_space, target))
    start = panel1.size - difference.size
    valid = np.ones(difference.size, dtype=bool)
    for panel in panels:
        if cols:
            valid &= np.all(panel.pooled(u)[1][start:, cols] > 0, axis=1)
    scaled = np.abs(weight * (star - difference))[valid]
    return float(np.sqrt(panel1.n) * scaled.max()) if scaled.size else float("nan")


def ks_two_sample(
    data: ClusteredDataset,
    target: Target,
    weight_kind: WeightKind = WeightKind.RATIO,
    method: Literal["if", "cb"] = "if",
    reps: int = 1000,
    seed: SeedSpec | None = None,
    weighting: Weighting = Weighting.ALL_MEMBERS,
    correction: bool = False,
    n_jobs: int = 1,
) -> TestResult:
    """Compare `target` between arm 1 and arm 2.

    Raises:
        DataValidationError: ARM_MISSING / ARM_MISSING_IN_CLUSTER.
        DomainError: EMPTY_COMPARISON_DOMAIN when the weight is zero everywhere.
    """
    seed = seed or SeedSpec(master_seed=0)
    if reps < 100:
        logger.warning(f"reps={reps} is small for a resampling p-value")
    validate_dataset(data, require_arms=True)
    target.check(data.state_space)

    grid = data.transition_times()
    arm1, arm2 = data.split_arms()
    panel1 = build_panel(arm1, weighting, grid)
    panel2 = build_panel(arm2, weighting, grid)
    n = panel1.n

    states = needed_states(data.state_space, target)
    start = int(panel1.size - target_grid(panel1, target).size)
    weight = make_weight(panel1, panel2, weight_kind, states).values[start:]
    if not np.any(weight > 0):
        raise DomainError(f"two-sample weight is zero everywhere for {target.label()}", ErrorCode.EMPTY_COMPARISON_DOMAIN.value)

    difference = target_curve(panel1, target) - target_curve(panel2, target)
    statistic = float(np.max(np.abs(weight * difference))) if difference.size else 0.0
    observed = np.sqrt(n) * statistic

    if method == "if":
        contrast = influence_for(panel1, target).values - influence_for(panel2, target).values
        xi = multiplier_matrix(n, seed, reps)
        null = np.max(np.abs(weight * (xi @ contrast) / np.sqrt(n)), axis=1)
    else:
        panels = (panel1, panel2)
        if n_jobs == 1:
            rows = [_bootstrap_null(panels, target, weight, difference, seed, b) for b in range(reps)]
        else:
            rows = Parallel(n_jobs=n_jobs)(
                delayed(_bootstrap_null)(panels, target, weight, difference, seed, b) for b in range(reps)
            )
        null = np.asarray(rows, dtype=float)

    p = p_value(observed, null, correction)
    logger.info(f"KS {target.label()} ({method}, {weight_kind.value}): sqrt(n)K={observed:.4f}, p={p:.4f}")
    return TestResult(
        target=target,
        statistic=statistic,
        scaled_statistic=observed,
        p_value=p,
        grid=target_grid(panel1, target),
        difference=difference,
        weight=weight,
        reps=reps,
        method=method,
        seed=seed.master_seed,
        weighting=weighting,
        weight_kind=weight_kind,
        null_statistics=null,
    )
