"""
Risk Panels
===========

Cluster-aggregated counting and at-risk processes on the pooled jump-time grid.

Per-cluster transitions are kept as a sparse event list (cluster, grid index,
from, to); per-cluster at-risk counts are kept dense as an (n, G, k) array.
Pooled sums for any vector of cluster multipliers are produced by `pooled`,
which is how the cluster bootstrap re-estimates on the original grid.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict

from msclust.exceptions import DomainError, ErrorCode, EstimationError
from msclust.models import Cluster, ClusteredDataset, StateSpace, SubjectPath

logger = logging.getLogger(__name__)


class Weighting(str, Enum):
    """Cluster weighting: w_i = 1 (all members) or w_i = 1/M_i (typical member)."""

    ALL_MEMBERS = "all"
    TYPICAL_MEMBER = "typical"


class LandmarkSpec(BaseModel):
    """Condition on occupying state `h` at landmark time `s`."""

    model_config = ConfigDict(frozen=True)

    s: float
    h: int


@dataclass(frozen=True, eq=False)
class RiskPanel:
    """Counting/at-risk processes for one dataset under one weighting.

    Attributes:
        state_space: State space of the source dataset.
        weighting: Weighting the pooled sums use.
        grid: Sorted distinct event times t_1 < ... < t_G.
        cluster_ids: Cluster identifiers, index-aligned with every per-cluster array.
        sizes: Cluster sizes M_i used for weighting.
        weights: Cluster weights w_i.
        at_risk: Per-cluster Y_{i.,h}(t_g), shape (n, G, k).
        initial_at_risk: Per-cluster Y_{i.,h}(0+), shape (n, k).
        ev_cluster, ev_grid, ev_from, ev_to: One entry per observed transition
            (0-based states), the sparse form of Delta N_{i.,hj}(t_g).
    """

    state_space: StateSpace
    weighting: Weighting
    grid: np.ndarray
    cluster_ids: tuple[str, ...]
    sizes: np.ndarray
    weights: np.ndarray
    at_risk: np.ndarray
    initial_at_risk: np.ndarray
    ev_cluster: np.ndarray
    ev_grid: np.ndarray
    ev_from: np.ndarray
    ev_to: np.ndarray
    origin: float = 0.0
    horizon: float = float("inf")
    _pooled: tuple[np.ndarray, np.ndarray] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        for arr in (
            self.grid,
            self.sizes,
            self.weights,
            self.at_risk,
            self.initial_at_risk,
            self.ev_cluster,
            self.ev_grid,
            self.ev_from,
            self.ev_to,
        ):
            arr.setflags(write=False)
        object.__setattr__(self, "_pooled", self.pooled(np.ones(self.n)))

    @property
    def n(self) -> int:
        return len(self.cluster_ids)

    @property
    def k(self) -> int:
        return self.state_space.k

    @property
    def size(self) -> int:
        """Number of grid points G."""
        return len(self.grid)

    @property
    def d_counts(self) -> np.ndarray:
        """Pooled weighted increments dN_bar_{hj}(t_g), shape (G, k, k)."""
        return self._pooled[0]

    @property
    def risk_sets(self) -> np.ndarray:
        """Pooled weighted at-risk Y_bar_h(t_g), shape (G, k)."""
        return self._pooled[1]

    @property
    def support(self) -> np.ndarray:
        """J_h: grid points with positive pooled at-risk, shape (G, k)."""
        return self.risk_sets > 0

    def pooled(self, multipliers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Pooled (dN_bar, Y_bar) with cluster i weighted by multipliers[i] * w_i.

        Args:
            multipliers: Non-negative per-cluster multipliers (ones for the point
                estimate, multinomial counts for a bootstrap replicate).
        """
        eff = np.asarray(multipliers, dtype=float) * self.weights
        d_counts = np.zeros((self.size, self.k, self.k))
        np.add.at(d_counts, (self.ev_grid, self.ev_from, self.ev_to), eff[self.ev_cluster])
        risk = np.einsum("i,igk->gk", eff, self.at_risk)
        return d_counts, risk

    def cluster_increments(self) -> np.ndarray:
        """Dense per-cluster Delta N_{i.,hj}(t_g), shape (n, G, k, k)."""
        out = np.zeros((self.n, self.size, self.k, self.k))
        np.add.at(out, (self.ev_cluster, self.ev_grid, self.ev_from, self.ev_to), 1.0)
        return out

    def index_at(self, t: float) -> int:
        """Index of the last grid point <= t, or -1 if t precedes the grid."""
        return int(np.searchsorted(self.grid, t, side="right")) - 1


# =============================================================================
# Construction
# =============================================================================


def build_panel(
    data: ClusteredDataset,
    weighting: Weighting = Weighting.ALL_MEMBERS,
    grid: np.ndarray | None = None,
    origin: float = 0.0,
) -> RiskPanel:
    """Aggregate per-cluster counting/at-risk processes on the jump-time grid.

    Y_h(t) uses the left-continuous convention: in h just before t, entered
    before t and not censored before t, so a subject censored at t is still at
    risk at t.

    Args:
        data: Validated dataset.
        weighting: Cluster weighting.
        grid: Optional superset grid (e.g. union of two samples' jump times).
        origin: Time whose right limit defines the initial risk set Y_h(origin+).
    """
    space = data.state_space
    k = space.k
    absorbing = space.absorbing
    grid_arr = data.transition_times() if grid is None else np.unique(np.asarray(grid, dtype=float))
    n = data.n

    ev_c: list[int] = []
    ev_t: list[float] = []
    ev_h: list[int] = []
    ev_j: list[int] = []
    iv_c: list[int] = []
    iv_a: list[float] = []
    iv_b: list[float] = []
    iv_s: list[int] = []
    initial = np.zeros((n, k))

    for i, cluster in enumerate(data.clusters):
        for path in cluster.members:
            if path.entry_time == origin and path.terminus.time > origin:
                initial[i, path.initial_state - 1] += 1.0
            start = path.entry_time
            state = path.initial_state
            for rec in path.records:
                iv_c.append(i)
                iv_a.append(start)
                iv_b.append(rec.time)
                iv_s.append(state - 1)
                ev_c.append(i)
                ev_t.append(rec.time)
                ev_h.append(rec.from_state - 1)
                ev_j.append(rec.to_state - 1)
                start, state = rec.time, rec.to_state
            if state not in absorbing:
                iv_c.append(i)
                iv_a.append(start)
                iv_b.append(path.terminus.time)
                iv_s.append(state - 1)

    ev_times = np.asarray(ev_t, dtype=float)
    ev_grid = np.searchsorted(grid_arr, ev_times).astype(np.intp)
    if ev_times.size and (np.any(ev_grid >= grid_arr.size) or np.any(grid_arr[np.minimum(ev_grid, grid_arr.size - 1)] != ev_times)):
        raise DomainError("supplied grid does not contain every transition time", ErrorCode.OUT_OF_DOMAIN.value)

    size = grid_arr.size
    lo = np.searchsorted(grid_arr, np.asarray(iv_a, dtype=float), side="right")
    hi = np.searchsorted(grid_arr, np.asarray(iv_b, dtype=float), side="right")
    marks = np.zeros((n, size + 1, k))
    c_idx = np.asarray(iv_c, dtype=np.intp)
    s_idx = np.asarray(iv_s, dtype=np.intp)
    np.add.at(marks, (c_idx, lo, s_idx), 1.0)
    np.add.at(marks, (c_idx, hi, s_idx), -1.0)
    at_risk = np.cumsum(marks, axis=1)[:, :size, :]

    sizes = np.array([c.weight_size for c in data.clusters], dtype=float)
    weights = np.ones(n) if weighting is Weighting.ALL_MEMBERS else 1.0 / sizes

    panel = RiskPanel(
        state_space=space,
        weighting=weighting,
        grid=grid_arr,
        cluster_ids=tuple(c.cluster_id for c in data.clusters),
        sizes=sizes,
        weights=weights,
        at_risk=at_risk,
        initial_at_risk=initial,
        ev_cluster=np.asarray(ev_c, dtype=np.intp),
        ev_grid=ev_grid,
        ev_from=np.asarray(ev_h, dtype=np.intp),
        ev_to=np.asarray(ev_j, dtype=np.intp),
        origin=origin,
        horizon=data.horizon,
    )
    logger.debug(f"Built {weighting.value} panel: n={n}, G={size}, events={len(ev_c)}")
    return panel


# =============================================================================
# Landmarking
# =============================================================================


def landmark_restrict(data: ClusteredDataset, spec: LandmarkSpec) -> ClusteredDataset:
    """Keep subjects observed in state spec.h at time spec.s, re-entered at s.

    Histories before s are dropped; each retained subject enters follow-up at s
    in state h. Clusters left empty are removed; the remaining clusters keep
    their original size for typical-member weighting.

    Raises:
        DomainError: If spec.s is not before the horizon.
        EstimationError: NO_SUBJECTS_AT_LANDMARK if nobody qualifies.
    """
    if not spec.s < data.horizon:
        raise DomainError(f"landmark time {spec.s} must precede horizon {data.horizon}", ErrorCode.OUT_OF_DOMAIN.value)

    clusters: list[Cluster] = []
    for cluster in data.clusters:
        kept: list[SubjectPath] = []
        for path in cluster.members:
            if not path.observed_at(spec.s) or path.state_at(spec.s) != spec.h:
                continue
            kept.append(
                path.model_copy(
                    update={
                        "entry_time": float(spec.s),
                        "initial_state": spec.h,
                        "records": tuple(r for r in path.records if r.time > spec.s),
                    }
                )
            )
        if kept:
            clusters.append(
                Cluster.model_construct(
                    cluster_id=cluster.cluster_id,
                    members=tuple(kept),
                    declared_size=cluster.weight_size,
                )
            )

    if not clusters:
        raise EstimationError(
            f"no subjects in state {spec.h} under observation at s={spec.s}",
            ErrorCode.NO_SUBJECTS_AT_LANDMARK.value,
        )
    logger.info(f"Landmark (s={spec.s}, h={spec.h}): kept {sum(c.size for c in clusters)} subjects in {len(clusters)} clusters")
    return data.with_clusters(clusters)


# =============================================================================
# Assumption report
# =============================================================================


ASSUMPTIONS = (
    ("C1", "Truncation/censoring independent of the event process and cluster size; exchangeable within cluster", False),
    ("C2", "Cluster size bounded", True),
    ("C3", "Counting processes exchangeable given cluster size, finite second moments", False),
    ("C4", "At-risk processes exchangeable given cluster size; positive expected risk set where intensities charge", False),
    ("C5", "Continuous cumulative intensities (ties are data artefacts)", True),
    ("C6", "Positive expected risk set for every transient state over the whole follow-up", True),
)


class AssumptionReport(BaseModel):
    """Data-checkable parts of the working assumptions."""

    model_config = ConfigDict(frozen=True)

    n_clusters: int
    n_subjects: int
    min_cluster_size: int
    max_cluster_size: int
    left_truncated: bool
    pi_hat: float
    tied_grid_points: int
    states_with_gaps: list[int]
    restricted_domain: tuple[float, float] | None
    documented: list[tuple[str, str, bool]]


def check_assumptions(data: ClusteredDataset) -> AssumptionReport:
    """Summarise cluster sizes, truncation, ties and risk-set positivity (C6 vs restricted domain)."""
    panel = build_panel(data, Weighting.ALL_MEMBERS)
    sizes = data.cluster_sizes
    counts = np.bincount(panel.ev_grid, minlength=panel.size)
    risk = panel.risk_sets
    gaps: list[int] = []
    valid = np.ones(panel.size, dtype=bool)
    for h in data.state_space.transient:
        positive = risk[:, h - 1] > 0
        if positive.any():
            first = int(np.argmax(positive))
            last = panel.size - 1 - int(np.argmax(positive[::-1]))
            if not positive.all():
                gaps.append(h)
            valid[:first] = False
            valid[last + 1 :] = False
            valid[first : last + 1] &= positive[first : last + 1]
        else:
            gaps.append(h)
    restricted = (float(panel.grid[valid][0]), float(panel.grid[valid][-1])) if gaps and valid.any() else None
    weighted_initial = panel.initial_at_risk.sum(axis=1) / sizes
    return AssumptionReport(
        n_clusters=data.n,
        n_subjects=data.subject_count,
        min_cluster_size=int(sizes.min()) if sizes.size else 0,
        max_cluster_size=int(sizes.max()) if sizes.size else 0,
        left_truncated=any(m.entry_time > panel.origin for _, m in data.subjects()),
        pi_hat=float(weighted_initial.mean()) if sizes.size else 0.0,
        tied_grid_points=int(np.sum(counts > 1)),
        states_with_gaps=gaps,
        restricted_domain=restricted,
        documented=[(c, text, checkable) for c, text, checkable in ASSUMPTIONS],
    )
