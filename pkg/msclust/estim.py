"""
Point Estimation
================

Working-independence Nelson-Aalen increments, Aalen-Johansen transition
matrices (exact ordered product over the jump grid) and state occupation
probabilities with the probability-under-observation correction.

Every estimator takes an optional vector of cluster multipliers so that the
cluster bootstrap runs the same code path as the point estimate.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from msclust.config import ROW_SUM_TOLERANCE
from msclust.exceptions import ErrorCode, EstimationError, MultiStateError
from msclust.models import ClusteredDataset, StateSpace
from msclust.panel import RiskPanel, Weighting, build_panel

logger = logging.getLogger(__name__)

# Drift above this is a bug, not rounding
_ROW_SUM_HARD_LIMIT = 1e-8


# =============================================================================
# Targets
# =============================================================================

_TARGET_RE = re.compile(r"^\s*(transition|occupation)\s*:\s*([0-9.,\s]+)$")


class Target(BaseModel):
    """Estimand selector: P_hj(s, .) or P_j(.)."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["transition", "occupation"]
    j: int
    h: int | None = None
    s: float = 0.0

    @model_validator(mode="after")
    def _check(self) -> Target:
        if self.kind == "transition" and self.h is None:
            raise ValueError("transition target needs a from-state h")
        if self.s < 0:
            raise ValueError("s must be >= 0")
        return self

    @classmethod
    def transition(cls, h: int, j: int, s: float = 0.0) -> Target:
        return cls(kind="transition", h=h, j=j, s=s)

    @classmethod
    def occupation(cls, j: int) -> Target:
        return cls(kind="occupation", j=j)

    @classmethod
    def parse(cls, text: str) -> Target:
        """Parse `transition:h,j,s` (s optional) or `occupation:j`."""
        match = _TARGET_RE.match(text)
        if not match:
            raise MultiStateError(f"cannot parse target {text!r}", ErrorCode.INVALID_TARGET.value)
        kind, rest = match.groups()
        parts = [p.strip() for p in rest.split(",") if p.strip()]
        try:
            if kind == "occupation" and len(parts) == 1:
                return cls.occupation(int(parts[0]))
            if kind == "transition" and len(parts) in (2, 3):
                s = float(parts[2]) if len(parts) == 3 else 0.0
                return cls.transition(int(parts[0]), int(parts[1]), s)
        except ValueError as e:
            raise MultiStateError(f"invalid target {text!r}: {e}", ErrorCode.INVALID_TARGET.value) from e
        raise MultiStateError(f"invalid target {text!r}", ErrorCode.INVALID_TARGET.value)

    def check(self, space: StateSpace) -> None:
        """Raise INVALID_TARGET unless the states fit `space`."""
        if self.j not in space.states:
            raise MultiStateError(f"state {self.j} not in 1..{space.k}", ErrorCode.INVALID_TARGET.value)
        if self.kind == "transition" and (self.h not in space.states or self.h in space.absorbing):
            raise MultiStateError(f"from-state {self.h} must be transient", ErrorCode.INVALID_TARGET.value)

    def label(self) -> str:
        if self.kind == "occupation":
            return f"occupation:{self.j}"
        return f"transition:{self.h},{self.j},{self.s:g}"


def transient_path_states(space: StateSpace, h: int, j: int) -> set[int]:
    """L(h, j): transient states a path from h to j can pass through."""
    return space.path_states(h, j)


def needed_states(space: StateSpace, target: Target, initial: np.ndarray | None = None) -> set[int]:
    """Transient states whose risk sets must be non-empty for `target` to carry influence."""
    if target.kind == "transition":
        assert target.h is not None
        return transient_path_states(space, target.h, target.j)
    starts = space.transient if initial is None else [h for h in space.transient if initial[h - 1] > 0]
    out: set[int] = set()
    for h in starts:
        out |= transient_path_states(space, h, target.j)
    return out


# =============================================================================
# Nelson-Aalen
# =============================================================================


def intensity_increments(d_counts: np.ndarray, risk: np.ndarray) -> np.ndarray:
    """dA_hj = dN_hj / Y_h (0 where Y_h = 0), diagonal = -row sum. Shape (G, k, k)."""
    denom = risk[:, :, None]
    inc = np.divide(d_counts, denom, out=np.zeros_like(d_counts), where=denom > 0)
    k = inc.shape[-1]
    diag = np.arange(k)
    inc[:, diag, diag] = 0.0
    inc[:, diag, diag] = -inc.sum(axis=2)
    return inc


@dataclass(frozen=True, eq=False)
class CumulativeIntensityPath:
    """Nelson-Aalen increments on the panel grid."""

    grid: np.ndarray
    increments: np.ndarray
    weighting: Weighting

    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.increments, axis=0)

    def at(self, t: float) -> np.ndarray:
        """A(t) as a k x k matrix (right-continuous step function)."""
        idx = int(np.searchsorted(self.grid, t, side="right"))
        return self.increments[:idx].sum(axis=0)


def nelson_aalen(panel: RiskPanel, multipliers: np.ndarray | None = None) -> CumulativeIntensityPath:
    """Nelson-Aalen increments of the (optionally re-weighted) panel."""
    if multipliers is None:
        d_counts, risk = panel.d_counts, panel.risk_sets
    else:
        d_counts, risk = panel.pooled(multipliers)
    return CumulativeIntensityPath(
        grid=panel.grid,
        increments=intensity_increments(d_counts, risk),
        weighting=panel.weighting,
    )


# =============================================================================
# Aalen-Johansen
# =============================================================================


def product_integral(increments: np.ndarray) -> np.ndarray:
    """Running ordered products prod_{u <= t_g} (I + dA(u)), shape (G, k, k)."""
    size, k, _ = increments.shape
    out = np.empty((size, k, k))
    current = np.eye(k)
    eye = np.eye(k)
    for g in range(size):
        factor = np.maximum(eye + increments[g], 0.0)
        current = current @ factor
        drift = float(np.max(np.abs(current.sum(axis=1) - 1.0)))
        if drift > ROW_SUM_TOLERANCE:
            if drift > _ROW_SUM_HARD_LIMIT:
                raise EstimationError(f"transition matrix rows drifted by {drift:.3g} at step {g}")
            current = current / current.sum(axis=1, keepdims=True)
        out[g] = current
    return out


@dataclass(frozen=True, eq=False)
class TransitionCurve:
    """P(s, t_g) for grid points t_g in (s, tau].

    `markov_only` marks estimates from s > 0 computed without landmarking; they
    are consistent only for Markov processes.
    """

    s: float
    grid: np.ndarray
    matrices: np.ndarray
    weighting: Weighting
    markov_only: bool = False

    def at(self, t: float) -> np.ndarray:
        idx = int(np.searchsorted(self.grid, t, side="right")) - 1
        if t < self.s:
            raise EstimationError(f"t={t} precedes the curve origin s={self.s}")
        if idx < 0:
            return np.eye(self.matrices.shape[-1])
        return self.matrices[idx]

    def entry(self, h: int, j: int) -> np.ndarray:
        """P_hj(s, t_g) over the grid."""
        return self.matrices[:, h - 1, j - 1]


def aalen_johansen(intensity: CumulativeIntensityPath, s: float = 0.0, landmarked: bool = False) -> TransitionCurve:
    """P(s, t) = prod over grid points u in (s, t] of (I + dA(u)), in time order.

    Args:
        intensity: Nelson-Aalen increments.
        s: Origin time.
        landmarked: The increments come from a landmark-restricted panel at s.
    """
    start = int(np.searchsorted(intensity.grid, s, side="right"))
    markov_only = s > 0 and not landmarked
    if markov_only:
        logger.info(f"P(s={s}, t) without landmarking is consistent for Markov processes only")
    return TransitionCurve(
        s=float(s),
        grid=intensity.grid[start:],
        matrices=product_integral(intensity.increments[start:]),
        weighting=intensity.weighting,
        markov_only=markov_only,
    )


# =============================================================================
# State occupation
# =============================================================================


def initial_distribution(panel: RiskPanel, multipliers: np.ndarray | None = None) -> tuple[np.ndarray, float]:
    """Initial state weights P_h(0) and pi_hat, the probability of being observed at 0+.

    All members:    P_h(0) = sum U_i Y_ih(0+) / (pi_hat sum U_i M_i)
    Typical member: P_h(0) = sum U_i M_i^-1 Y_ih(0+) / (pi_hat sum U_i)
    with pi_hat = sum U_i M_i^-1 Y_i.(0+) / sum U_i.

    Raises:
        EstimationError: NO_INITIAL_RISK_SET when nobody is observed at 0+.
    """
    u = np.ones(panel.n) if multipliers is None else np.asarray(multipliers, dtype=float)
    sizes = panel.sizes
    y0 = panel.initial_at_risk
    total = u.sum()
    pi_hat = float(np.sum(u * y0.sum(axis=1) / sizes) / total) if total > 0 else 0.0
    if pi_hat <= 0:
        raise EstimationError("nobody is under observation at time 0+", ErrorCode.NO_INITIAL_RISK_SET.value)
    if panel.weighting is Weighting.ALL_MEMBERS:
        p0 = (u @ y0) / (pi_hat * np.sum(u * sizes))
    else:
        p0 = (u @ (y0 / sizes[:, None])) / (pi_hat * total)
    return p0, pi_hat


@dataclass(frozen=True, eq=False)
class OccupationCurve:
    """P_j(t_g) for every state j on the full grid."""

    grid: np.ndarray
    values: np.ndarray
    initial: np.ndarray
    pi_hat: float
    weighting: Weighting

    def at(self, t: float) -> np.ndarray:
        idx = int(np.searchsorted(self.grid, t, side="right")) - 1
        return self.initial if idx < 0 else self.values[idx]

    def state(self, j: int) -> np.ndarray:
        return self.values[:, j - 1]


def occupation_from_panel(panel: RiskPanel, multipliers: np.ndarray | None = None) -> OccupationCurve:
    """Occupation probabilities for a panel under optional cluster multipliers."""
    p0, pi_hat = initial_distribution(panel, multipliers)
    transitions = product_integral(nelson_aalen(panel, multipliers).increments)
    values = np.einsum("h,ghj->gj", p0, transitions)
    return OccupationCurve(
        grid=panel.grid,
        values=values,
        initial=p0,
        pi_hat=pi_hat,
        weighting=panel.weighting,
    )


def state_occupation(data: ClusteredDataset, w: Weighting = Weighting.ALL_MEMBERS) -> OccupationCurve:
    """P_j(t) = sum_h P_h(0) P_hj(0, t) for all j."""
    curve = occupation_from_panel(build_panel(data, w))
    logger.debug(f"Occupation ({w.value}): pi_hat={curve.pi_hat:.4f}, P(0)={np.round(curve.initial, 4).tolist()}")
    return curve


# =============================================================================
# Target curves
# =============================================================================


def target_grid(panel: RiskPanel, target: Target) -> np.ndarray:
    """Grid on which `target` is reported: (s, tau] for transitions, the full grid otherwise."""
    if target.kind == "occupation":
        return panel.grid
    return panel.grid[panel.grid > target.s]


def target_curve(
    panel: RiskPanel,
    target: Target,
    multipliers: np.ndarray | None = None,
    landmarked: bool = False,
) -> np.ndarray:
    """Point curve of `target` on `target_grid(panel, target)`."""
    if target.kind == "occupation":
        return occupation_from_panel(panel, multipliers).state(target.j)
    assert target.h is not None
    curve = aalen_johansen(nelson_aalen(panel, multipliers), target.s, landmarked=landmarked)
    return curve.entry(target.h, target.j)


def step_values(grid: np.ndarray, values: np.ndarray, times: np.ndarray, before: float | np.ndarray) -> np.ndarray:
    """Evaluate a right-continuous step curve at `times`; `before` applies ahead of the first grid point."""
    idx = np.searchsorted(grid, np.asarray(times, dtype=float), side="right") - 1
    out = values[np.maximum(idx, 0)].astype(float)
    out[idx < 0] = before
    return out
