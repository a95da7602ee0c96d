"""
True occupation probabilities for the simulation design.

`true_occupation` is a large uncensored Monte Carlo; `closed_form_occupation`
integrates the frailty out analytically with the gamma Laplace transform
E[exp(-c v)] = (1 + c theta)^-k and E[v exp(-c v)] = k theta (1 + c theta)^-(k+1).
"""

from __future__ import annotations

import logging
from functools import lru_cache

import numpy as np
from pydantic import BaseModel, ConfigDict

from msclust.panel import Weighting
from msclust.resample import Purpose, SeedSpec
from msclust.sim.generator import SimConfig

logger = logging.getLogger(__name__)

DEFAULT_TRUTH_SUBJECTS = 10_000_000
_CHUNK = 1_000_000
_TRUTH_SEED = 20_240_601


class TruthValue(BaseModel):
    """Monte Carlo value with its standard error."""

    model_config = ConfigDict(frozen=True)

    t: float
    value: float
    se: float
    subjects: int


@lru_cache(maxsize=8)
def _illness_sample(cfg: SimConfig, weighting: Weighting, subjects: int, master_seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Sorted onset and exit times of state 2 among `subjects` uncensored subjects.

    One subject per cluster; cluster sizes are size-biased for all-members weighting.
    """
    seed = SeedSpec(master_seed=master_seed)
    sizes = cfg.sizes
    probs = np.full(sizes.size, 1.0 / sizes.size)
    if weighting is Weighting.ALL_MEMBERS:
        probs = sizes * probs
        probs = probs / probs.sum()
    onsets: list[np.ndarray] = []
    exits: list[np.ndarray] = []
    for chunk, start in enumerate(range(0, subjects, _CHUNK)):
        size = min(_CHUNK, subjects - start)
        rng = seed.generator(Purpose.SIMULATION, chunk, 1)
        m = rng.choice(sizes, size=size, p=probs)
        v = rng.gamma(cfg.frailty_shape, cfg.frailty_scale, size=size)
        t12 = rng.standard_exponential(size) / (cfg.rate12(m) * v)
        t13 = rng.standard_exponential(size) / (cfg.rate13 * v)
        t23 = rng.standard_exponential(size) / (cfg.rate23 * v)
        ill = t12 < t13
        onsets.append(t12[ill])
        exits.append(t12[ill] + t23[ill])
    return np.sort(np.concatenate(onsets)), np.sort(np.concatenate(exits))


def true_occupation(
    cfg: SimConfig,
    t: float | np.ndarray,
    weighting: Weighting = Weighting.TYPICAL_MEMBER,
    subjects: int = DEFAULT_TRUTH_SUBJECTS,
    master_seed: int = _TRUTH_SEED,
) -> list[TruthValue]:
    """Monte Carlo P_2(t) from `subjects` uncensored subjects (cached per config)."""
    onset, exit_ = _illness_sample(cfg.model_copy(update={"n": 1, "two_arm": False}), weighting, subjects, master_seed)
    times = np.atleast_1d(np.asarray(t, dtype=float))
    counts = np.searchsorted(onset, times, side="right") - np.searchsorted(exit_, times, side="right")
    values = counts / subjects
    se = np.sqrt(values * (1.0 - values) / subjects)
    return [TruthValue(t=float(a), value=float(b), se=float(c), subjects=subjects) for a, b, c in zip(times, values, se, strict=True)]


def _laplace(c: np.ndarray, shape: float, scale: float) -> np.ndarray:
    return (1.0 + c * scale) ** (-shape)


def closed_form_occupation(
    cfg: SimConfig,
    t: float | np.ndarray,
    weighting: Weighting = Weighting.TYPICAL_MEMBER,
    arm: int = 1,
) -> np.ndarray:
    """P_2(t) with the frailty integrated out, mixed over the cluster-size law."""
    times = np.atleast_1d(np.asarray(t, dtype=float))
    k, theta = cfg.frailty_shape, cfg.frailty_scale
    b, c = cfg.rate13, cfg.rate23
    sizes = cfg.sizes
    mix = np.full(sizes.size, 1.0 / sizes.size)
    if weighting is Weighting.ALL_MEMBERS:
        mix = sizes * mix / np.sum(sizes * mix)

    out = np.zeros_like(times)
    for m, p in zip(sizes, mix, strict=True):
        a = float(cfg.rate12(m, arm))
        gap = a + b - c
        if abs(gap) > 1e-12:
            value = a / gap * (_laplace(c * times, k, theta) - _laplace((a + b) * times, k, theta))
        else:
            value = a * times * k * theta * (1.0 + c * times * theta) ** (-k - 1.0)
        out += p * value
    return out
