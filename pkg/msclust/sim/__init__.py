"""Simulation design, truth oracles and the Monte Carlo study harness."""

from msclust.sim.generator import SimConfig, simulate_trial, summarize_trial
from msclust.sim.study import StudyConfig, StudyReport, load_scenarios, run_study, scenarios
from msclust.sim.truth import TruthValue, closed_form_occupation, true_occupation

__all__ = [
    "SimConfig",
    "simulate_trial",
    "summarize_trial",
    "StudyConfig",
    "StudyReport",
    "load_scenarios",
    "run_study",
    "scenarios",
    "TruthValue",
    "true_occupation",
    "closed_form_occupation",
]
