"""
Confidence Intervals and Bands
==============================

Pointwise delta-method intervals and simultaneous confidence bands for
transition and occupation probabilities, with replicates from either the
multiplier process or the cluster bootstrap.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Annotated, Literal

import numpy as np
import scipy.stats as st
from pydantic import BaseModel, ConfigDict, Field, model_validator

from msclust.config import DEFAULT_ALPHA, DEFAULT_DOMAIN_PERCENTILES, DEFAULT_REPS, AnalysisConfig
from msclust.estim import Target, target_curve, target_grid
from msclust.exceptions import DomainError, ErrorCode
from msclust.formats import CurveMetadata, CurveOutput
from msclust.infl import influence_for
from msclust.models import ClusteredDataset
from msclust.panel import LandmarkSpec, Weighting, build_panel, landmark_restrict
from msclust.resample import ReplicateSet, SeedSpec, replicate_curves

logger = logging.getLogger(__name__)


# =============================================================================
# Transforms
# =============================================================================


class Transform(str, Enum):
    """g with analytic derivative; LogLog and Logit live on (0, 1)."""

    LOGLOG = "loglog"
    LOGIT = "logit"
    IDENTITY = "identity"

    @property
    def bounded(self) -> bool:
        return self is not Transform.IDENTITY

    def inside(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if not self.bounded:
            return np.isfinite(x)
        return (x > 0) & (x < 1)

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self is Transform.LOGLOG:
                return np.log(-np.log(x))
            if self is Transform.LOGIT:
                return np.log(x / (1.0 - x))
        return x

    def derivative(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self is Transform.LOGLOG:
                return 1.0 / (x * np.log(x))
            if self is Transform.LOGIT:
                return 1.0 / (x * (1.0 - x))
        return np.ones_like(x)

    def inverse(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if self is Transform.LOGLOG:
            return np.exp(-np.exp(y))
        if self is Transform.LOGIT:
            return 1.0 / (1.0 + np.exp(-y))
        return y


def pointwise_ci(
    estimate: np.ndarray,
    se: np.ndarray,
    transform: Transform = Transform.LOGLOG,
    alpha: float = DEFAULT_ALPHA,
    strict: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """g^-1(g(p) +- z_{1-alpha/2} g'(p) se), sorted into (lower, upper).

    Points with p outside the transform's domain are NaN (or raise with strict).
    se = 0 gives the degenerate interval [p, p].
    """
    p = np.atleast_1d(np.asarray(estimate, dtype=float))
    s = np.atleast_1d(np.asarray(se, dtype=float))
    inside = transform.inside(p)
    if strict and not inside.all():
        raise DomainError(f"estimate outside the {transform.value} domain", ErrorCode.TRANSFORM_DOMAIN.value)
    z = st.norm.ppf(1.0 - alpha / 2.0)
    centre = transform.apply(p)
    half = z * np.abs(transform.derivative(p)) * s
    a = transform.inverse(centre - half)
    b = transform.inverse(centre + half)
    lower = np.where(inside, np.minimum(a, b), np.nan)
    upper = np.where(inside, np.maximum(a, b), np.nan)
    degenerate = inside & (s == 0)
    lower[degenerate] = p[degenerate]
    upper[degenerate] = p[degenerate]
    return lower, upper


# =============================================================================
# Simultaneous bands
# =============================================================================


class BandSpec(BaseModel):
    """Band construction settings.

    Attributes:
        q_rule: "inverse_variance" uses q(t) = 1/(1 + sigma^2(t)); "constant" uses q = 1.
    """

    model_config = ConfigDict(frozen=True)

    transform: Transform = Transform.LOGLOG
    alpha: Annotated[float, Field(gt=0.0, lt=1.0)] = DEFAULT_ALPHA
    domain: tuple[float, float] = DEFAULT_DOMAIN_PERCENTILES
    q_rule: Literal["inverse_variance", "constant"] = "inverse_variance"
    reps: Annotated[int, Field(ge=1)] = DEFAULT_REPS
    method: Literal["if", "cb"] = "if"

    @model_validator(mode="after")
    def _check(self) -> BandSpec:
        lo, hi = self.domain
        if not 0.0 <= lo <= hi <= 100.0:
            raise ValueError(f"domain percentiles must satisfy 0 <= lo <= hi <= 100, got {self.domain}")
        return self

    @classmethod
    def from_config(cls, config: AnalysisConfig) -> BandSpec:
        return cls(
            transform=Transform(config.transform),
            alpha=config.alpha,
            domain=config.domain,
            reps=config.reps,
            method=config.method,  # type: ignore[arg-type]
        )


@dataclass(frozen=True, eq=False)
class Band:
    """Simultaneous band on the restricted domain."""

    grid: np.ndarray
    estimate: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    critical_value: float
    alpha: float
    method: str
    reps: int
    seed: int
    transform: Transform
    interval: tuple[float, float]


def band_times(data: ClusteredDataset, target: Target) -> np.ndarray:
    """Jump times whose percentiles bound the band.

    Occupation of j: transitions into j (out of j when nothing enters j).
    Transition h -> j: h -> j times (out of h when h == j), after s.
    """
    space = data.state_space
    if target.kind == "occupation":
        pairs = {(a, b) for a, b in space.transitions if b == target.j}
        if not pairs:
            pairs = {(a, b) for a, b in space.transitions if a == target.j}
    elif target.h == target.j:
        pairs = {(a, b) for a, b in space.transitions if a == target.h}
    else:
        pairs = {(target.h, target.j)}  # type: ignore[arg-type]
    times = data.transition_times(pairs)
    return times[times > target.s] if target.kind == "transition" else times


def band_interval(times: np.ndarray, percentiles: tuple[float, float]) -> tuple[float, float]:
    """Linear-interpolation percentiles of `times`."""
    if times.size == 0:
        raise DomainError("no jump times to define the band domain", ErrorCode.EMPTY_DOMAIN.value)
    lo, hi = np.percentile(times, percentiles)
    return float(lo), float(hi)


def restricted_domain(
    grid: np.ndarray,
    estimate: np.ndarray,
    interval: tuple[float, float],
    transform: Transform,
    mask: np.ndarray | None = None,
) -> np.ndarray:
    """Grid points in [lo, hi], in the valid mask, and inside the transform domain."""
    keep = (grid >= interval[0]) & (grid <= interval[1])
    if mask is not None:
        keep &= mask
    inside = transform.inside(estimate)
    dropped = int(np.sum(keep & ~inside))
    if dropped:
        logger.warning(f"Dropped {dropped} band point(s) where the estimate is 0 or 1 under {transform.value}")
    keep &= inside
    if not keep.any():
        raise DomainError(f"band domain [{interval[0]:g}, {interval[1]:g}] is empty", ErrorCode.EMPTY_DOMAIN.value)
    return keep


def critical_value(sups: np.ndarray, alpha: float) -> float:
    """1 - alpha empirical quantile of the replicate sup statistics (NaN replicates ignored)."""
    finite = sups[np.isfinite(sups)]
    if finite.size == 0:
        return 0.0
    return float(np.quantile(finite, 1.0 - alpha))


def replicate_sups(trajectories: np.ndarray, scale: np.ndarray) -> np.ndarray:
    """sup_t |scale(t) * replicate(t)| per replicate; all-invalid replicates give NaN."""
    scaled = np.abs(trajectories * scale)
    valid = np.isfinite(scaled)
    out = np.full(scaled.shape[0], np.nan)
    rows = valid.any(axis=1)
    out[rows] = np.max(np.where(valid[rows], scaled[rows], -np.inf), axis=1)
    return out


def simultaneous_band(
    replicates: ReplicateSet,
    spec: BandSpec,
    interval: tuple[float, float],
    variance: np.ndarray | None = None,
    mask: np.ndarray | None = None,
) -> Band:
    """g^-1(g(P) +- c_alpha / (sqrt(n) q(t))) on the restricted domain.

    Args:
        replicates: Multiplier or bootstrap trajectories aligned with the estimate.
        interval: Time interval from the percentile rule.
        variance: sigma^2(t) for q(t); defaults to the replicates' second moment.
        mask: Valid-domain mask of the estimate.

    Raises:
        DomainError: EMPTY_DOMAIN.
    """
    estimate = replicates.estimate
    keep = restricted_domain(replicates.grid, estimate, interval, spec.transform, mask)
    sigma2 = replicates.second_moment() if variance is None else variance
    q = 1.0 / (1.0 + sigma2) if spec.q_rule == "inverse_variance" else np.ones_like(estimate)

    p = estimate[keep]
    q_keep = q[keep]
    slope = np.abs(spec.transform.derivative(p))
    sups = replicate_sups(replicates.trajectories[:, keep], q_keep * slope)
    c_alpha = critical_value(sups, spec.alpha)

    centre = spec.transform.apply(p)
    half = c_alpha / (np.sqrt(replicates.n) * q_keep)
    a = spec.transform.inverse(centre - half)
    b = spec.transform.inverse(centre + half)
    logger.info(
        f"{replicates.method.upper()} band for {replicates.target.label()}: c_alpha={c_alpha:.4f}, "
        f"domain=[{interval[0]:g}, {interval[1]:g}], points={int(keep.sum())}"
    )
    return Band(
        grid=replicates.grid[keep],
        estimate=p,
        lower=np.minimum(a, b),
        upper=np.maximum(a, b),
        critical_value=c_alpha,
        alpha=spec.alpha,
        method=replicates.method,
        reps=replicates.reps,
        seed=replicates.seed,
        transform=spec.transform,
        interval=interval,
    )


# =============================================================================
# Curve analysis
# =============================================================================


def _prepare(
    data: ClusteredDataset,
    target: Target,
    landmark: LandmarkSpec | None,
) -> tuple[ClusteredDataset, Target, bool]:
    target.check(data.state_space)
    if landmark is None:
        return data, target, False
    if target.kind != "transition":
        raise DomainError("landmarking applies to transition targets only", ErrorCode.INVALID_TARGET.value)
    restricted = landmark_restrict(data, landmark)
    return restricted, Target.transition(landmark.h, target.j, landmark.s), True


def analyze_curve(
    data: ClusteredDataset,
    target: Target,
    weighting: Weighting = Weighting.ALL_MEMBERS,
    spec: BandSpec | None = None,
    seed: SeedSpec | None = None,
    landmark: LandmarkSpec | None = None,
    n_jobs: int = 1,
) -> CurveOutput:
    """Estimate, standard errors, pointwise CIs and (with a seed) a simultaneous band.

    Without a seed only the estimate, IF standard errors and pointwise intervals are filled.
    """
    spec = spec or BandSpec()
    data, target, landmarked = _prepare(data, target, landmark)
    panel = build_panel(data, weighting)
    influence = influence_for(panel, target)
    grid = target_grid(panel, target)
    estimate = target_curve(panel, target, landmarked=landmarked)
    se = influence.standard_errors()
    band: Band | None = None

    if seed is not None:
        interval = band_interval(band_times(data, target), spec.domain)
        if spec.method == "if":
            replicates = replicate_curves(influence, "if", target, spec.reps, seed)
            band = simultaneous_band(replicates, spec, interval, variance=influence.variance(), mask=influence.mask)
        else:
            replicates = replicate_curves(panel, "cb", target, spec.reps, seed, n_jobs=n_jobs, landmarked=landmarked)
            se = np.where(influence.mask, np.sqrt(replicates.second_moment() / panel.n), np.nan)
            band = simultaneous_band(replicates, spec, interval, mask=influence.mask)

    ci_lo, ci_hi = pointwise_ci(estimate, np.nan_to_num(se), spec.transform, spec.alpha)
    ci_lo = np.where(np.isnan(se), np.nan, ci_lo)
    ci_hi = np.where(np.isnan(se), np.nan, ci_hi)
    band_lo = np.full(grid.size, np.nan)
    band_hi = np.full(grid.size, np.nan)
    in_band = np.zeros(grid.size, dtype=bool)
    if band is not None:
        idx = np.searchsorted(grid, band.grid)
        band_lo[idx] = band.lower
        band_hi[idx] = band.upper
        in_band[idx] = True

    metadata = CurveMetadata(
        target=target.label(),
        weighting=weighting.value,
        method=spec.method if band is not None else "none",
        reps=band.reps if band is not None else 0,
        seed=seed.master_seed if seed is not None else None,
        transform=spec.transform.value,
        alpha=spec.alpha,
        domain_percentiles=spec.domain,
        domain_interval=band.interval if band is not None else None,
        critical_value=band.critical_value if band is not None else None,
        n_clusters=panel.n,
        landmarked=landmarked,
        markov_only=target.kind == "transition" and target.s > 0 and not landmarked,
    )
    return CurveOutput(
        metadata=metadata,
        t=grid,
        estimate=estimate,
        se=se,
        ci_lo=ci_lo,
        ci_hi=ci_hi,
        band_lo=band_lo,
        band_hi=band_hi,
        domain_flag=in_band,
    )
