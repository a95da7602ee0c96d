"""
msclust - Typer Application
===========================

Command-line surface: estimation, bands, two-sample tests, simulation,
the Monte Carlo study, plotting, assumption checks and configuration.
"""

from __future__ import annotations

import json
import logging
import sys
from dataclasses import dataclass
from enum import Enum
from importlib.metadata import version as pkg_version
from pathlib import Path
from typing import Annotated

import typer
from pydantic import ValidationError

from msclust.bands import BandSpec, Transform, analyze_curve
from msclust.cli.output import (
    console,
    print_assumption_report,
    print_curve_table,
    print_error,
    print_exception,
    print_json,
    print_key_value,
    print_study_report,
    print_success,
    print_test_result,
)
from msclust.config import CONFIG_FILE_NAME, AnalysisConfig
from msclust.estim import Target
from msclust.exceptions import MultiStateError
from msclust.formats import (
    CurveOutput,
    parse_state_space,
    read_curve,
    read_transitions,
    write_curve,
    write_report,
    write_transitions,
)
from msclust.ks import WeightKind, ks_two_sample
from msclust.models import ClusteredDataset
from msclust.panel import LandmarkSpec, Weighting, check_assumptions
from msclust.resample import SeedSpec

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"


class Method(str, Enum):
    IF = "if"
    CB = "cb"


# =============================================================================
# Context Object
# =============================================================================


@dataclass
class CLIContext:
    """Context object shared across commands via ctx.obj."""

    config: AnalysisConfig
    json_mode: bool = False


# =============================================================================
# Main Application
# =============================================================================

app = typer.Typer(
    name="msclust",
    help="msclust - Multi-state estimation and inference for clustered event histories",
    no_args_is_help=True,
    rich_markup_mode="rich",
)


@app.callback()
def main(
    ctx: typer.Context,
    config_path: Annotated[
        Path | None,
        typer.Option(
            "--config",
            "-c",
            help=f"Config file (default: ./{CONFIG_FILE_NAME})",
            envvar="MSCLUST_CONFIG",
        ),
    ] = None,
    json_output: Annotated[
        bool,
        typer.Option(
            "--json",
            "-j",
            help="Output JSON format",
        ),
    ] = False,
    debug: Annotated[
        bool,
        typer.Option("--debug", help="Debug logging on stderr"),
    ] = False,
) -> None:
    """msclust - Multi-state estimation and inference for clustered event histories."""
    logging.basicConfig(
        level=logging.DEBUG if debug else logging.INFO,
        format=LOG_FORMAT,
        stream=sys.stderr,
        force=True,
    )
    ctx.obj = CLIContext(config=AnalysisConfig.load(config_path), json_mode=json_output)


# =============================================================================
# Option parsing helpers
# =============================================================================


def _target(text: str) -> Target:
    try:
        return Target.parse(text)
    except MultiStateError as e:
        raise typer.BadParameter(e.message, param_hint="--target") from None


def _landmark(text: str | None) -> LandmarkSpec | None:
    if text is None:
        return None
    try:
        s_text, h_text = text.split(",")
        return LandmarkSpec(s=float(s_text), h=int(h_text))
    except (ValueError, ValidationError):
        raise typer.BadParameter(f"expected s,h (e.g. 0.5,2), got {text!r}", param_hint="--landmark") from None


def _percentiles(text: str | None, default: tuple[float, float]) -> tuple[float, float]:
    if text is None:
        return default
    try:
        lo, hi = (float(p) for p in text.split(","))
    except ValueError:
        raise typer.BadParameter(f"expected lo,hi percentiles, got {text!r}", param_hint="--domain") from None
    if not 0.0 <= lo <= hi <= 100.0:
        raise typer.BadParameter("percentiles must satisfy 0 <= lo <= hi <= 100", param_hint="--domain")
    return lo, hi


def _load(data: Path, states: str, require_arms: bool = False) -> ClusteredDataset:
    return read_transitions(data, parse_state_space(states), require_arms=require_arms)


DataArg = Annotated[Path, typer.Argument(help="TransitionsFile (CSV)", exists=True, dir_okay=False)]
TargetOpt = Annotated[str, typer.Option("--target", "-t", help="transition:h,j[,s] or occupation:j")]
WeightingOpt = Annotated[Weighting | None, typer.Option("--weighting", "-w", help="Cluster weighting")]
StatesOpt = Annotated[
    str,
    typer.Option("--states", help="illness-death, illness-death-recovery, survival or K:a,b (absorbing a,b)"),
]
SeedOpt = Annotated[int, typer.Option("--seed", help="Master seed (required for reproducibility)", min=0)]
RepsOpt = Annotated[int | None, typer.Option("--reps", "-B", help="Resampling replicates (below 100 is allowed but coarse)", min=1)]
JobsOpt = Annotated[int | None, typer.Option("--n-jobs", help="joblib workers (-1 for all cores)")]


# =============================================================================
# Basic Commands
# =============================================================================


@app.command()
def version() -> None:
    """Show CLI version."""
    try:
        ver = pkg_version("msclust")
    except Exception:
        ver = "unknown"
    console.print(f"msclust {ver}")


@app.command()
def estimate(
    ctx: typer.Context,
    data: DataArg,
    target: TargetOpt = "occupation:2",
    weighting: WeightingOpt = None,
    landmark: Annotated[str | None, typer.Option("--landmark", "-l", help="Landmark s,h")] = None,
    states: StatesOpt = "illness-death",
    output: Annotated[Path | None, typer.Option("--output", "-o", help="CurveOutput file (.csv or .json)")] = None,
) -> None:
    """Estimate a transition or occupation probability with IF standard errors."""
    context: CLIContext = ctx.obj
    spec = BandSpec.from_config(context.config)
    try:
        dataset = _load(data, states)
        curve = analyze_curve(
            dataset,
            _target(target),
            weighting or Weighting(context.config.weighting),
            spec=spec,
            landmark=_landmark(landmark),
        )
        _emit_curve(context, curve, output)
    except MultiStateError as e:
        print_exception(e)
        raise typer.Exit(1) from None


@app.command()
def band(
    ctx: typer.Context,
    data: DataArg,
    seed: SeedOpt,
    target: TargetOpt = "occupation:2",
    weighting: WeightingOpt = None,
    landmark: Annotated[str | None, typer.Option("--landmark", "-l", help="Landmark s,h")] = None,
    alpha: Annotated[float | None, typer.Option("--alpha", "-a", help="1 - confidence level", min=0.0, max=1.0)] = None,
    transform: Annotated[Transform | None, typer.Option("--transform", help="Band transform")] = None,
    method: Annotated[Method | None, typer.Option("--method", "-m", help="Multiplier (if) or cluster bootstrap (cb)")] = None,
    reps: RepsOpt = None,
    domain: Annotated[str | None, typer.Option("--domain", "-d", help="Jump-time percentiles lo,hi")] = None,
    states: StatesOpt = "illness-death",
    n_jobs: JobsOpt = None,
    output: Annotated[Path | None, typer.Option("--output", "-o", help="CurveOutput file (.csv or .json)")] = None,
) -> None:
    """Estimate with pointwise intervals and a simultaneous confidence band."""
    context: CLIContext = ctx.obj
    config = context.config
    try:
        spec = BandSpec(
            transform=transform or Transform(config.transform),
            alpha=config.alpha if alpha is None else alpha,
            domain=_percentiles(domain, config.domain),
            reps=reps or config.reps,
            method=(method or Method(config.method)).value,  # type: ignore[arg-type]
        )
    except ValidationError as e:
        raise typer.BadParameter(str(e)) from None
    try:
        dataset = _load(data, states)
        curve = analyze_curve(
            dataset,
            _target(target),
            weighting or Weighting(config.weighting),
            spec=spec,
            seed=SeedSpec(master_seed=seed),
            landmark=_landmark(landmark),
            n_jobs=n_jobs or config.n_jobs,
        )
        _emit_curve(context, curve, output)
    except MultiStateError as e:
        print_exception(e)
        raise typer.Exit(1) from None


def _emit_curve(context: CLIContext, curve: CurveOutput, output: Path | None) -> None:
    if output is not None:
        write_curve(curve, output)
    if context.json_mode:
        print_json(curve.to_dict())
    else:
        print_curve_table(curve)
        if output is not None:
            print_success(f"Wrote {output}")


@app.command("test")
def two_sample_test(
    ctx: typer.Context,
    data: DataArg,
    seed: SeedOpt,
    target: TargetOpt = "occupation:2",
    weight: Annotated[WeightKind | None, typer.Option("--weight", help="Weight function")] = None,
    method: Annotated[Method | None, typer.Option("--method", "-m", help="Null distribution: if or cb")] = None,
    reps: RepsOpt = None,
    weighting: WeightingOpt = None,
    correction: Annotated[
        bool | None,
        typer.Option("--correction/--no-correction", help="Use (1+#)/(B+1) for the p-value"),
    ] = None,
    states: StatesOpt = "illness-death",
    n_jobs: JobsOpt = None,
    output: Annotated[Path | None, typer.Option("--output", "-o", help="Write the result as JSON")] = None,
) -> None:
    """Two-sample Kolmogorov-Smirnov-type test between arm 1 and arm 2."""
    context: CLIContext = ctx.obj
    config = context.config
    try:
        dataset = _load(data, states, require_arms=True)
        result = ks_two_sample(
            dataset,
            _target(target),
            weight_kind=weight or WeightKind(config.test_weight),
            method=(method or Method(config.method)).value,  # type: ignore[arg-type]
            reps=reps or config.reps,
            seed=SeedSpec(master_seed=seed),
            weighting=weighting or Weighting(config.weighting),
            correction=config.pvalue_correction if correction is None else correction,
            n_jobs=n_jobs or config.n_jobs,
        )
    except MultiStateError as e:
        print_exception(e)
        raise typer.Exit(1) from None

    if output is not None:
        output.write_text(json.dumps(result.to_dict(), indent=2))
    if context.json_mode:
        print_json(result.to_dict())
    else:
        print_test_result(result)


@app.command()
def check(
    ctx: typer.Context,
    data: DataArg,
    states: StatesOpt = "illness-death",
) -> None:
    """Summarise the data against the working assumptions."""
    context: CLIContext = ctx.obj
    try:
        report = check_assumptions(_load(data, states))
    except MultiStateError as e:
        print_exception(e)
        raise typer.Exit(1) from None

    if context.json_mode:
        print_json(report.model_dump(mode="json"))
    else:
        print_assumption_report(report)


# =============================================================================
# Simulation Commands
# =============================================================================


@app.command()
def simulate(
    ctx: typer.Context,
    output: Annotated[Path, typer.Argument(help="TransitionsFile to write")],
    seed: SeedOpt,
    clusters: Annotated[int, typer.Option("--clusters", "-n", help="Number of clusters", min=1)] = 40,
    size_low: Annotated[int, typer.Option("--size-low", help="Smallest cluster size", min=1)] = 5,
    size_high: Annotated[int, typer.Option("--size-high", help="Largest cluster size", min=1)] = 15,
    two_arm: Annotated[bool, typer.Option("--two-arm", help="Randomise members to arms 1 and 2")] = False,
    alternative: Annotated[bool, typer.Option("--alternative", help="Arm 2 has a higher 1->2 rate")] = False,
    index: Annotated[int, typer.Option("--index", help="Trial index (RNG stream)", min=0)] = 0,
) -> None:
    """Simulate one clustered illness-death trial."""
    from msclust.sim import SimConfig, simulate_trial, summarize_trial

    context: CLIContext = ctx.obj
    try:
        cfg = SimConfig(
            n=clusters,
            size_low=size_low,
            size_high=size_high,
            two_arm=two_arm or alternative,
            alternative=alternative,
        )
    except ValidationError as e:
        raise typer.BadParameter(str(e)) from None

    trial = simulate_trial(cfg, SeedSpec(master_seed=seed), index)
    write_transitions(trial, output)
    summary = {"clusters": trial.n, "subjects": trial.subject_count, **summarize_trial(trial)}
    if context.json_mode:
        print_json(summary)
    else:
        print_key_value({k: f"{v:.3f}" if isinstance(v, float) else v for k, v in summary.items()}, title=str(output))
        print_success(f"Wrote {output}")


@app.command()
def study(
    ctx: typer.Context,
    seed: SeedOpt,
    scenario: Annotated[
        str,
        typer.Option("--scenario", "-s", help="pointwise, bands, tests, smoke, or table1 to table4"),
    ] = "smoke",
    scenario_file: Annotated[
        Path | None,
        typer.Option("--scenario-file", help="TOML file of [[scenario]] tables", exists=True, dir_okay=False),
    ] = None,
    reps: RepsOpt = None,
    trials: Annotated[int | None, typer.Option("--trials", "-R", help="Simulated trials per scenario", min=1)] = None,
    n_jobs: JobsOpt = None,
    output: Annotated[Path | None, typer.Option("--output", "-o", help="StudyReport JSON")] = None,
) -> None:
    """Run the Monte Carlo study and report bias, coverage and rejection rates."""
    from msclust.sim import load_scenarios, run_study, scenarios

    context: CLIContext = ctx.obj
    try:
        if scenario_file is not None:
            configs = load_scenarios(scenario_file)
            update = {k: v for k, v in (("replicates", trials), ("reps", reps)) if v is not None}
            configs = [c.model_copy(update=update) for c in configs]
        else:
            configs = scenarios(scenario, replicates=trials, reps=reps)
        report = run_study(configs, SeedSpec(master_seed=seed), n_jobs=n_jobs or context.config.n_jobs)
    except MultiStateError as e:
        print_exception(e)
        raise typer.Exit(1) from None

    if output is not None:
        write_report(report, output)
    if context.json_mode:
        print_json(report.model_dump(mode="json"))
    else:
        print_study_report(report)
        if output is not None:
            print_success(f"Wrote {output}")


@app.command()
def plot(
    curves: Annotated[list[Path], typer.Argument(help="CurveOutput files", exists=True, dir_okay=False)],
    output: Annotated[Path, typer.Option("--output", "-o", help="Figure path (.svg, .pdf or .eps)")],
    label: Annotated[list[str] | None, typer.Option("--label", help="Legend entry per curve")] = None,
    no_ci: Annotated[bool, typer.Option("--no-ci", help="Hide pointwise intervals")] = False,
    no_band: Annotated[bool, typer.Option("--no-band", help="Hide the simultaneous band")] = False,
) -> None:
    """Draw curves with intervals and bands as a static vector figure."""
    from msclust.cli.plot import plot_curves

    if label and len(label) != len(curves):
        raise typer.BadParameter("give one --label per curve", param_hint="--label")
    try:
        loaded = [read_curve(p) for p in curves]
    except MultiStateError as e:
        print_exception(e)
        raise typer.Exit(1) from None
    written = plot_curves(loaded, output, labels=label, show_ci=not no_ci, show_band=not no_band)
    print_success(f"Wrote {written}")


# =============================================================================
# Config Commands
# =============================================================================

config_app = typer.Typer(help="Configuration commands")
app.add_typer(config_app, name="config")


@config_app.command("show")
def config_show(ctx: typer.Context) -> None:
    """Show current configuration."""
    context: CLIContext = ctx.obj
    config_file = AnalysisConfig._find_config_file()

    if context.json_mode:
        data = {"config_file": str(config_file) if config_file else None, **context.config.model_dump()}
        print_json(data)
    else:
        console.print("[bold]=== msclust Configuration ===[/bold]")
        console.print(f"Config file: {config_file or '[dim]Not found (using defaults)[/dim]'}")
        console.print(f"Weighting: {context.config.weighting}")
        console.print(f"Replicates: {context.config.reps}")
        console.print(f"Alpha: {context.config.alpha}")
        console.print(f"Transform: {context.config.transform}")
        console.print(f"Method: {context.config.method}")
        console.print(f"Domain percentiles: {context.config.domain[0]:g}, {context.config.domain[1]:g}")
        console.print(f"Test weight: {context.config.test_weight}")
        console.print(f"p-value correction: {context.config.pvalue_correction}")
        console.print(f"Workers: {context.config.n_jobs}")


@config_app.command("init")
def config_init(
    ctx: typer.Context,
    output: Annotated[
        Path | None,
        typer.Option("--output", "-o", help="Output path"),
    ] = None,
    force: Annotated[
        bool,
        typer.Option("--force", "-f", help="Overwrite existing config"),
    ] = False,
) -> None:
    """Generate default .msclust.toml configuration file."""
    output_path = output or Path(CONFIG_FILE_NAME)

    if output_path.exists() and not force:
        print_error(f"{output_path} already exists. Use --force to overwrite.")
        raise typer.Exit(1) from None

    output_path.write_text(AnalysisConfig().to_toml())
    print_success(f"Created {output_path}")


def cli_main() -> None:
    """CLI entry point."""
    app()


if __name__ == "__main__":
    cli_main()
