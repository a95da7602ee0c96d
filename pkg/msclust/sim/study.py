"""
Monte Carlo Study
=================

Repeats simulate -> estimate -> (IF, CB, naive) inference over many trials and
summarises bias, Monte Carlo SD, average standard error, pointwise coverage,
band coverage and two-sample rejection rates.
"""

from __future__ import annotations

import logging
import time
import tomllib
from pathlib import Path
from typing import Annotated, Literal

import numpy as np
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field

from msclust import __version__
from msclust.bands import BandSpec, Transform, band_interval, band_times, pointwise_ci, simultaneous_band
from msclust.estim import Target, step_values
from msclust.exceptions import ConfigError, ErrorCode, MultiStateError, ReplicateError
from msclust.infl import InfluenceSet, occupation_influence
from msclust.ks import WeightKind, ks_two_sample
from msclust.panel import Weighting, build_panel
from msclust.resample import Purpose, ReplicateSet, SeedSpec, replicate_curves
from msclust.sim.generator import SimConfig, simulate_trial
from msclust.sim.truth import DEFAULT_TRUTH_SUBJECTS, closed_form_occupation, true_occupation

logger = logging.getLogger(__name__)

Method = Literal["naive", "if", "cb"]
OCCUPATION_2 = Target.occupation(2)


class StudyConfig(BaseModel):
    """One scenario of the study."""

    model_config = ConfigDict(frozen=True)

    name: str
    sim: SimConfig
    replicates: Annotated[int, Field(ge=1)] = 1000
    reps: Annotated[int, Field(ge=1)] = 1000
    alpha: float = 0.05
    transform: Transform = Transform.LOGLOG
    percentiles: tuple[float, ...] = (40.0, 60.0)
    domain: tuple[float, float] = (10.0, 90.0)
    methods: tuple[Method, ...] = ("naive", "if", "cb")
    kind: Literal["one_sample", "two_sample"] = "one_sample"
    test_weight: WeightKind = WeightKind.RATIO
    truth: Literal["analytic", "monte_carlo"] = "analytic"


# =============================================================================
# Scenarios
# =============================================================================

SIZE_LAWS = ((5, 15), (10, 30))
CLUSTER_COUNTS = (20, 40, 80)


def scenarios(name: str, replicates: int | None = None, reps: int | None = None) -> list[StudyConfig]:
    """Named scenario grids.

    pointwise / bands / table3: one-sample grid n x size law with naive, IF and CB;
    table1 and table2 are the same grid read at the 40th and 60th follow-up percentile.
    tests / table4: two-arm H0 and H1 grid with IF and CB.
    smoke: n=40, U[5,15], 200 trials.
    """
    key = name.lower()
    if key in ("pointwise", "bands", "table3"):
        out = _one_sample((40.0, 60.0))
    elif key == "table1":
        out = _one_sample((40.0,))
    elif key == "table2":
        out = _one_sample((60.0,))
    elif key in ("tests", "table4"):
        out = [
            StudyConfig(
                name=f"{'H1' if alt else 'H0'} n={n} U[{low},{high}]",
                sim=SimConfig(n=n, size_low=low, size_high=high, two_arm=True, alternative=alt),
                kind="two_sample",
                methods=("if", "cb"),
            )
            for alt in (False, True)
            for low, high in SIZE_LAWS
            for n in CLUSTER_COUNTS
        ]
    elif key == "smoke":
        out = [StudyConfig(name="smoke n=40 U[5,15]", sim=SimConfig(n=40), replicates=200)]
    else:
        raise ConfigError(f"unknown scenario {name!r}", ErrorCode.INVALID_CONFIG.value)
    update: dict[str, int] = {}
    if replicates is not None:
        update["replicates"] = replicates
    if reps is not None:
        update["reps"] = reps
    return [c.model_copy(update=update) for c in out] if update else out


def _one_sample(percentiles: tuple[float, ...]) -> list[StudyConfig]:
    return [
        StudyConfig(
            name=f"n={n} U[{low},{high}]",
            sim=SimConfig(n=n, size_low=low, size_high=high),
            percentiles=percentiles,
        )
        for low, high in SIZE_LAWS
        for n in CLUSTER_COUNTS
    ]


def load_scenarios(path: Path) -> list[StudyConfig]:
    """Custom grid from TOML: one `[[scenario]]` table per StudyConfig, with a nested `sim` table."""
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except (tomllib.TOMLDecodeError, OSError) as e:
        raise ConfigError(f"cannot read scenario file {path}: {e}", ErrorCode.INVALID_CONFIG.value) from e
    tables = data.get("scenario", [])
    if not tables:
        raise ConfigError(f"{path} defines no [[scenario]] tables", ErrorCode.INVALID_CONFIG.value)
    try:
        return [StudyConfig.model_validate(t) for t in tables]
    except ValueError as e:
        raise ConfigError(f"invalid scenario in {path}: {e}", ErrorCode.INVALID_CONFIG.value) from e


# =============================================================================
# Report
# =============================================================================


class PointwiseRow(BaseModel):
    method: str
    percentile: float
    bias: float
    mcsd: float
    ase: float
    cp: Annotated[float, Field(ge=0.0, le=1.0)]


class BandRow(BaseModel):
    method: str
    coverage: Annotated[float, Field(ge=0.0, le=1.0)]


class RejectionRow(BaseModel):
    method: str
    hypothesis: str
    rejection_rate: Annotated[float, Field(ge=0.0, le=1.0)]


class ScenarioResult(BaseModel):
    name: str
    n: int
    size_law: str
    replicates: int
    reps: int
    truth: str
    truth_se: float | None = None
    pointwise: list[PointwiseRow] = []
    bands: list[BandRow] = []
    tests: list[RejectionRow] = []
    runtime_seconds: float


class StudyReport(BaseModel):
    version: str = __version__
    seed: int
    scenarios: list[ScenarioResult]


# =============================================================================
# One trial
# =============================================================================


class TrialOutcome(BaseModel):
    """Per-trial numbers, keyed by method then percentile."""

    estimates: dict[str, list[float]] = {}
    truths: list[float] = []
    ses: dict[str, list[float]] = {}
    covered: dict[str, list[bool]] = {}
    band_covered: dict[str, bool] = {}
    rejected: dict[str, bool] = {}


def _truth(cfg: StudyConfig, t: np.ndarray) -> np.ndarray:
    if cfg.truth == "analytic":
        return closed_form_occupation(cfg.sim, t, Weighting.TYPICAL_MEMBER)
    return np.array([v.value for v in true_occupation(cfg.sim, t, Weighting.TYPICAL_MEMBER)])


def _band_covers(replicates: ReplicateSet, spec: BandSpec, interval: tuple[float, float], cfg: StudyConfig, influence: InfluenceSet | None) -> bool:
    variance = influence.variance() if influence is not None else None
    mask = influence.mask if influence is not None else None
    band = simultaneous_band(replicates, spec, interval, variance=variance, mask=mask)
    truth = _truth(cfg, band.grid)
    return bool(np.all((band.lower <= truth) & (truth <= band.upper)))


def run_trial(cfg: StudyConfig, seed: SeedSpec, index: int) -> TrialOutcome:
    """Simulate trial `index` and evaluate every configured method on it.

    `naive` treats every subject as its own cluster of size one and uses the
    i.i.d. influence-function variance and multiplier band. That is the
    working-independence comparator; it is not the Greenwood formula, though the
    two agree to first order.
    """
    data = simulate_trial(cfg.sim, seed, index)
    inner = seed.child(Purpose.STUDY, index)
    outcome = TrialOutcome()

    if cfg.kind == "two_sample":
        for method in cfg.methods:
            if method == "naive":
                continue
            result = ks_two_sample(
                data,
                OCCUPATION_2,
                weight_kind=cfg.test_weight,
                method=method,
                reps=cfg.reps,
                seed=inner,
                weighting=Weighting.TYPICAL_MEMBER,
            )
            outcome.rejected[method] = result.p_value <= cfg.alpha
        return outcome

    follow_up = np.array([m.terminus.time for _, m in data.subjects()])
    times = np.percentile(follow_up, cfg.percentiles)
    truth = _truth(cfg, times)
    outcome.truths = truth.tolist()
    spec = BandSpec(transform=cfg.transform, alpha=cfg.alpha, domain=cfg.domain, reps=cfg.reps)
    interval = band_interval(band_times(data, OCCUPATION_2), cfg.domain)

    for method in cfg.methods:
        if method == "naive":
            panel = build_panel(data.as_singletons(), Weighting.ALL_MEMBERS)
        else:
            panel = build_panel(data, Weighting.TYPICAL_MEMBER)
        influence = occupation_influence(panel, j=2)
        if method == "cb":
            replicates = replicate_curves(panel, "cb", OCCUPATION_2, cfg.reps, inner)
            se_curve = np.sqrt(replicates.second_moment() / panel.n)
            band_influence = None
        else:
            replicates = replicate_curves(influence, "if", OCCUPATION_2, cfg.reps, inner)
            se_curve = np.sqrt(influence.variance() / panel.n)
            band_influence = influence

        est = step_values(panel.grid, influence.estimate, times, before=0.0)
        se = step_values(panel.grid, np.nan_to_num(se_curve), times, before=0.0)
        lo, hi = pointwise_ci(est, se, cfg.transform, cfg.alpha)
        outcome.estimates[method] = est.tolist()
        outcome.ses[method] = se.tolist()
        outcome.covered[method] = [bool(a <= x <= b) for a, x, b in zip(lo, truth, hi, strict=True)]
        outcome.band_covered[method] = _band_covers(replicates, spec, interval, cfg, band_influence)
    return outcome


def _run_trial_indexed(cfg: StudyConfig, seed: SeedSpec, index: int) -> TrialOutcome:
    try:
        return run_trial(cfg, seed, index)
    except ReplicateError:
        raise
    except MultiStateError as e:
        raise ReplicateError(f"trial failed: {e}", index) from e


# =============================================================================
# Aggregation
# =============================================================================


def _summarize(cfg: StudyConfig, outcomes: list[TrialOutcome], runtime: float) -> ScenarioResult:
    result = ScenarioResult(
        name=cfg.name,
        n=cfg.sim.n,
        size_law=cfg.sim.size_law,
        replicates=len(outcomes),
        reps=cfg.reps,
        truth=cfg.truth,
        truth_se=_truth_se(cfg) if cfg.kind == "one_sample" and cfg.truth == "monte_carlo" else None,
        runtime_seconds=runtime,
    )
    if cfg.kind == "two_sample":
        hypothesis = "H1" if cfg.sim.alternative else "H0"
        for method in cfg.methods:
            flags = [o.rejected[method] for o in outcomes if method in o.rejected]
            if flags:
                result.tests.append(RejectionRow(method=method, hypothesis=hypothesis, rejection_rate=float(np.mean(flags))))
        return result

    truths = np.array([o.truths for o in outcomes])
    for method in cfg.methods:
        est = np.array([o.estimates[method] for o in outcomes])
        se = np.array([o.ses[method] for o in outcomes])
        cov = np.array([o.covered[method] for o in outcomes])
        for k, pct in enumerate(cfg.percentiles):
            result.pointwise.append(
                PointwiseRow(
                    method=method,
                    percentile=pct,
                    bias=float(np.mean(est[:, k] - truths[:, k])),
                    mcsd=float(np.std(est[:, k], ddof=1)) if len(outcomes) > 1 else 0.0,
                    ase=float(np.mean(se[:, k])),
                    cp=float(np.mean(cov[:, k])),
                )
            )
        result.bands.append(BandRow(method=method, coverage=float(np.mean([o.band_covered[method] for o in outcomes]))))
    return result


def _truth_se(cfg: StudyConfig) -> float:
    # worst case over the follow-up window
    grid = np.linspace(0.0, cfg.sim.censor_max, 31)
    return max(v.se for v in true_occupation(cfg.sim, grid, Weighting.TYPICAL_MEMBER, DEFAULT_TRUTH_SUBJECTS))


def run_study(configs: list[StudyConfig], seed: SeedSpec, n_jobs: int = 1) -> StudyReport:
    """Run every scenario; trial r of scenario s uses seed child (STUDY, s) and stream r."""
    results = []
    for s, cfg in enumerate(configs):
        if cfg.replicates < 100:
            logger.warning(f"{cfg.name}: {cfg.replicates} trials is below the recommended 100")
        scenario_seed = seed.child(Purpose.STUDY, 1_000_000 + s)
        started = time.perf_counter()
        if n_jobs == 1:
            outcomes = [_run_trial_indexed(cfg, scenario_seed, r) for r in range(cfg.replicates)]
        else:
            outcomes = Parallel(n_jobs=n_jobs)(
                delayed(_run_trial_indexed)(cfg, scenario_seed, r) for r in range(cfg.replicates)
            )
        runtime = time.perf_counter() - started
        logger.info(f"Scenario {cfg.name}: {cfg.replicates} trials in {runtime:.1f}s")
        results.append(_summarize(cfg, outcomes, runtime))
    return StudyReport(seed=seed.master_seed, scenarios=results)
