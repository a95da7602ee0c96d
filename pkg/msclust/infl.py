"""
Influence Functions
===================

Per-cluster influence trajectories for transition and occupation estimators,
and the cluster-robust covariance built from them.

For a start row vector r0 the trajectories follow the forward recursion

    R_i(t_g) = R_i(t_{g-1}) (I + dA(t_g)) + r0 P(s, t_{g-1}) dPhi_i(t_g)

with dPhi_i,lq = n w_i [dN_i,lq - Y_i,l dA_lq] / Y_bar_l, which evaluates the
Duhamel-type integral without inverting any transition matrix.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict

from msclust.estim import (
    CumulativeIntensityPath,
    Target,
    initial_distribution,
    needed_states,
    nelson_aalen,
    product_integral,
)
from msclust.exceptions import DomainError, ErrorCode, EstimationError
from msclust.panel import RiskPanel, Weighting

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class InfluenceSet:
    """Per-cluster influence trajectories for one target.

    Attributes:
        values: g_i(t_g), shape (n, G); rows sum to zero over clusters at every t_g.
        mask: Grid points inside the valid domain (every needed risk set non-empty).
        estimate: Point estimate on the same grid.
    """

    kind: Literal["transition", "occupation"]
    target: Target
    weighting: Weighting
    grid: np.ndarray
    values: np.ndarray
    mask: np.ndarray
    estimate: np.ndarray
    horizon: float

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    def variance(self) -> np.ndarray:
        """sigma^2(t) = n^-1 sum_i g_i(t)^2."""
        return np.mean(self.values**2, axis=0)

    def standard_errors(self) -> np.ndarray:
        """sqrt(sigma^2(t) / n); NaN outside the valid domain."""
        se = np.sqrt(self.variance() / self.n)
        return np.where(self.mask, se, np.nan)

    def index_at(self, t: float) -> int:
        if t > self.horizon:
            return -1
        return int(np.searchsorted(self.grid, t, side="right")) - 1


class CovarianceEstimate(BaseModel):
    """n^-1 sum_i g_i(t1) g_i(t2)."""

    model_config = ConfigDict(frozen=True)

    t1: float
    t2: float
    value: float
    n: int

    @property
    def standard_error(self) -> float:
        """sqrt(value / n); meaningful when t1 == t2."""
        return float(np.sqrt(max(self.value, 0.0) / self.n))


def covariance_at(influence: InfluenceSet, t1: float, t2: float) -> CovarianceEstimate:
    """Cluster-robust covariance of the estimator at (t1, t2).

    Raises:
        DomainError: OUT_OF_DOMAIN if either time has no valid influence values.
    """
    idx = []
    for t in (t1, t2):
        i = influence.index_at(t)
        if i < 0 or not influence.mask[i]:
            raise DomainError(f"t={t} outside the valid influence domain", ErrorCode.OUT_OF_DOMAIN.value)
        idx.append(i)
    value = float(np.dot(influence.values[:, idx[0]], influence.values[:, idx[1]]) / influence.n)
    return CovarianceEstimate(t1=t1, t2=t2, value=value, n=influence.n)


# =============================================================================
# Recursion
# =============================================================================


def influence_paths(panel: RiskPanel, intensity: CumulativeIntensityPath, start: int, r0: np.ndarray) -> np.ndarray:
    """R_i(t_g) for grid points g >= start, shape (n, G - start, k)."""
    n, k = panel.n, panel.k
    inc = intensity.increments
    risk = panel.risk_sets
    scale = n * panel.weights
    eye = np.eye(k)

    order = np.argsort(panel.ev_grid, kind="stable")
    ev_grid = panel.ev_grid[order]
    ev_cluster = panel.ev_cluster[order]
    ev_from = panel.ev_from[order]
    ev_to = panel.ev_to[order]
    bounds = np.searchsorted(ev_grid, np.arange(panel.size + 1))

    out = np.zeros((n, panel.size - start, k))
    current = np.zeros((n, k))
    v = np.asarray(r0, dtype=float)
    for pos, g in enumerate(range(start, panel.size)):
        d_a = inc[g]
        c = np.divide(v, risk[g], out=np.zeros(k), where=risk[g] > 0)
        step = -np.einsum("il,l,lq->iq", panel.at_risk[:, g, :], c, d_a)
        lo, hi = bounds[g], bounds[g + 1]
        if hi > lo:
            weight = c[ev_from[lo:hi]]
            np.add.at(step, (ev_cluster[lo:hi], ev_to[lo:hi]), weight)
            np.add.at(step, (ev_cluster[lo:hi], ev_from[lo:hi]), -weight)
        current = current @ (eye + d_a) + scale[:, None] * step
        out[:, pos, :] = current
        v = v @ np.maximum(eye + d_a, 0.0)
    return out


def valid_mask(panel: RiskPanel, states: set[int], start: int = 0) -> np.ndarray:
    """Grid points (from `start`) where every state in `states` has positive pooled at-risk."""
    cols = sorted(s - 1 for s in states)
    if not cols:
        return np.ones(panel.size - start, dtype=bool)
    return np.all(panel.risk_sets[start:, cols] > 0, axis=1)


def _require_support(mask: np.ndarray, target: Target) -> None:
    if not mask.any():
        raise EstimationError(f"no grid point in the valid domain for {target.label()}", ErrorCode.EMPTY_SUPPORT.value)


def transition_influence(
    panel: RiskPanel,
    intensity: CumulativeIntensityPath,
    s: float,
    h: int,
    j: int,
) -> InfluenceSet:
    """gamma_i,hj(s, t) on grid points in (s, tau].

    Raises:
        EstimationError: EMPTY_SUPPORT if no grid point is in the valid domain.
    """
    target = Target.transition(h, j, s)
    start = int(np.searchsorted(panel.grid, s, side="right"))
    mask = valid_mask(panel, needed_states(panel.state_space, target), start)
    _require_support(mask, target)
    r0 = np.zeros(panel.k)
    r0[h - 1] = 1.0
    paths = influence_paths(panel, intensity, start, r0)
    estimate = product_integral(intensity.increments[start:])[:, h - 1, j - 1]
    logger.debug(f"Transition influence {target.label()}: G={mask.size}, valid={int(mask.sum())}")
    return InfluenceSet(
        kind="transition",
        target=target,
        weighting=panel.weighting,
        grid=panel.grid[start:],
        values=paths[:, :, j - 1],
        mask=mask,
        estimate=estimate,
        horizon=panel.horizon,
    )


def initial_residuals(panel: RiskPanel, p0: np.ndarray, pi_hat: float) -> np.ndarray:
    """Per-cluster residual of the initial-state weights, shape (n, k).

    All members:
        (Y_ih(0+) - mean Y_h(0+)) / (pi EM) - P_h(0) [(M_i - EM)/EM + (M_i^-1 Y_i.(0+) - pi)/pi]
    Typical member:
        pi^-1 [M_i^-1 Y_ih(0+) - mean M^-1 Y_h(0+) - P_h(0) (M_i^-1 Y_i.(0+) - pi)]
    """
    sizes = panel.sizes
    y0 = panel.initial_at_risk
    observed = (y0.sum(axis=1) / sizes - pi_hat)[:, None]
    if panel.weighting is Weighting.ALL_MEMBERS:
        mean_size = sizes.mean()
        size_term = ((sizes - mean_size) / mean_size)[:, None]
        return (y0 - y0.mean(axis=0)) / (pi_hat * mean_size) - p0 * (size_term + observed / pi_hat)
    scaled = y0 / sizes[:, None]
    # cluster-i quantity in the observed-at-0+ residual
    return (scaled - scaled.mean(axis=0) - p0 * observed) / pi_hat


def occupation_influence(
    panel: RiskPanel,
    intensity: CumulativeIntensityPath | None = None,
    j: int = 2,
) -> InfluenceSet:
    """psi_ij(t) for the occupation probability of state j on the full grid.

    Raises:
        EstimationError: NO_INITIAL_RISK_SET, or EMPTY_SUPPORT.
    """
    target = Target.occupation(j)
    intensity = intensity or nelson_aalen(panel)
    p0, pi_hat = initial_distribution(panel)
    mask = valid_mask(panel, needed_states(panel.state_space, target, p0))
    _require_support(mask, target)
    transitions = product_integral(intensity.increments)
    paths = influence_paths(panel, intensity, 0, p0)[:, :, j - 1]
    residual = initial_residuals(panel, p0, pi_hat)
    values = paths + residual @ transitions[:, :, j - 1].T
    logger.debug(f"Occupation influence j={j}: pi_hat={pi_hat:.4f}, G={panel.size}, valid={int(mask.sum())}")
    return InfluenceSet(
        kind="occupation",
        target=target,
        weighting=panel.weighting,
        grid=panel.grid,
        values=values,
        mask=mask,
        estimate=p0 @ transitions[:, :, j - 1].T,
        horizon=panel.horizon,
    )


def influence_for(panel: RiskPanel, target: Target) -> InfluenceSet:
    """Dispatch on target kind."""
    intensity = nelson_aalen(panel)
    if target.kind == "occupation":
        return occupation_influence(panel, intensity, target.j)
    assert target.h is not None
    return transition_influence(panel, intensity, target.s, target.h, target.j)
