"""
Trial Generator
===============

Correlated illness-death trials (healthy 1, ill 2, dead 3) with a shared gamma
frailty per cluster and informative cluster size: the 1 -> 2 rate is higher in
clusters no larger than the expected size.
"""

from __future__ import annotations

import logging
from typing import Annotated, Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from msclust.models import (
    Cluster,
    ClusteredDataset,
    StateSpace,
    SubjectPath,
    Terminus,
    TerminusKind,
    Transition,
)
from msclust.resample import Purpose, SeedSpec

logger = logging.getLogger(__name__)


class SimConfig(BaseModel):
    """Simulation design.

    Conditional on frailty v and size m, rates are
    a12 = (base12 + small_bump I[m <= E M] + arm_effect I(arm 2, alternative)) v,
    a13 = rate13 v and a23 = rate23 v, with censoring C ~ U(0, censor_max].
    """

    model_config = ConfigDict(frozen=True)

    n: Annotated[int, Field(ge=1)] = 40
    size_low: Annotated[int, Field(ge=1)] = 5
    size_high: Annotated[int, Field(ge=1)] = 15
    frailty_shape: Annotated[float, Field(gt=0)] = 1.0
    frailty_scale: Annotated[float, Field(gt=0)] = 1.0
    base12: Annotated[float, Field(gt=0)] = 0.25
    small_bump: Annotated[float, Field(ge=0)] = 0.25
    rate13: Annotated[float, Field(gt=0)] = 0.25
    rate23: Annotated[float, Field(gt=0)] = 0.5
    arm_effect: Annotated[float, Field(ge=0)] = 0.5
    censor_max: Annotated[float, Field(gt=0)] = 3.0
    two_arm: bool = False
    alternative: bool = False

    @model_validator(mode="after")
    def _check(self) -> Self:
        if self.size_high < self.size_low:
            raise ValueError("size_high must be >= size_low")
        if self.two_arm and self.size_low < 2:
            raise ValueError("two-arm trials need clusters of size >= 2")
        return self

    @property
    def mean_size(self) -> float:
        return (self.size_low + self.size_high) / 2.0

    @property
    def sizes(self) -> np.ndarray:
        return np.arange(self.size_low, self.size_high + 1)

    @property
    def small_fraction(self) -> float:
        """P(M <= E M) under the discrete uniform size law."""
        return float(np.mean(self.sizes <= self.mean_size))

    @property
    def size_law(self) -> str:
        return f"U[{self.size_low},{self.size_high}]"

    def rate12(self, m: int | np.ndarray, arm: int | np.ndarray = 1) -> np.ndarray:
        bump = np.where(np.asarray(m) <= self.mean_size, self.small_bump, 0.0)
        effect = np.where((np.asarray(arm) == 2) & self.alternative, self.arm_effect, 0.0)
        return np.asarray(self.base12 + bump + effect, dtype=float)


def simulate_trial(
    cfg: SimConfig,
    seed: SeedSpec,
    index: int = 0,
    frailty: np.ndarray | None = None,
) -> ClusteredDataset:
    """Draw one trial.

    Args:
        cfg: Design.
        seed: Master seed; the trial uses stream (SIMULATION, index).
        index: Trial index within a study.
        frailty: Per-cluster frailties overriding the gamma draws.
    """
    rng = seed.generator(Purpose.SIMULATION, index)
    sizes = rng.integers(cfg.size_low, cfg.size_high + 1, size=cfg.n)
    v = rng.gamma(cfg.frailty_shape, cfg.frailty_scale, size=cfg.n) if frailty is None else np.asarray(frailty, dtype=float)

    clusters: list[Cluster] = []
    for i in range(cfg.n):
        m = int(sizes[i])
        arms = rng.permutation(np.resize([1, 2], m)) if cfg.two_arm else np.ones(m, dtype=int)
        a12 = cfg.rate12(m, arms) * v[i]
        a13 = np.full(m, cfg.rate13 * v[i])
        a23 = np.full(m, cfg.rate23 * v[i])
        e12, e13, e23 = (rng.standard_exponential(m) for _ in range(3))
        t12 = np.divide(e12, a12, out=np.full(m, np.inf), where=a12 > 0)
        t13 = np.divide(e13, a13, out=np.full(m, np.inf), where=a13 > 0)
        sojourn = np.divide(e23, a23, out=np.full(m, np.inf), where=a23 > 0)
        censor = cfg.censor_max * (1.0 - rng.random(m))

        members = []
        for s in range(m):
            members.append(
                _subject_path(
                    f"{i + 1}-{s + 1}",
                    float(t12[s]),
                    float(t13[s]),
                    float(sojourn[s]),
                    float(censor[s]),
                    int(arms[s]) if cfg.two_arm else None,
                )
            )
        clusters.append(Cluster(cluster_id=f"c{i + 1:03d}", members=tuple(members)))

    data = ClusteredDataset(state_space=StateSpace.illness_death(), clusters=tuple(clusters))
    logger.debug(f"Simulated trial {index}: {data.n} clusters, {data.subject_count} subjects")
    return data


def _subject_path(
    subject_id: str,
    t12: float,
    t13: float,
    sojourn: float,
    censor: float,
    arm: int | None,
) -> SubjectPath:
    first = min(t12, t13)
    if first > censor:
        return SubjectPath(subject_id=subject_id, terminus=Terminus(time=censor), arm=arm)
    if t13 <= t12:
        return SubjectPath(
            subject_id=subject_id,
            records=(Transition(time=t13, from_state=1, to_state=3),),
            terminus=Terminus(time=t13, kind=TerminusKind.ABSORBED),
            arm=arm,
        )
    ill = Transition(time=t12, from_state=1, to_state=2)
    death = t12 + sojourn
    if death > censor:
        return SubjectPath(subject_id=subject_id, records=(ill,), terminus=Terminus(time=censor), arm=arm)
    return SubjectPath(
        subject_id=subject_id,
        records=(ill, Transition(time=death, from_state=2, to_state=3)),
        terminus=Terminus(time=death, kind=TerminusKind.ABSORBED),
        arm=arm,
    )


def summarize_trial(data: ClusteredDataset) -> dict[str, float]:
    """Fractions censored in state 1, ever ill, ill then dead, and dead without illness."""
    total = data.subject_count
    censored = ill = ill_dead = direct = 0
    for _, m in data.subjects():
        moves = [(r.from_state, r.to_state) for r in m.records]
        if not moves:
            censored += 1
        elif moves[0] == (1, 3):
            direct += 1
        else:
            ill += 1
            ill_dead += (2, 3) in moves
    return {
        "censored_healthy": censored / total,
        "ill": ill / total,
        "ill_then_dead": ill_dead / ill if ill else 0.0,
        "dead_without_illness": direct / total,
    }
