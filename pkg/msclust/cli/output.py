"""Rich-based output formatting utilities for msclust.

Provides consistent, readable output formatting using Rich library.
Supports a JSON output mode for scripting.
"""

from __future__ import annotations

import json
import math
from collections.abc import Iterable
from typing import TYPE_CHECKING, Any

from rich.console import Console
from rich.markup import escape
from rich.table import Table
from rich.text import Text

from msclust.exceptions import DataValidationError, MultiStateError

if TYPE_CHECKING:
    from msclust.formats import CurveOutput
    from msclust.ks import TestResult
    from msclust.panel import AssumptionReport
    from msclust.sim.study import StudyReport

console = Console()
err_console = Console(stderr=True)

# Curve tables longer than this show head and tail only
CURVE_PREVIEW_ROWS = 20
NAIVE_CAPTION = "naive: i.i.d. influence-function variance, clusters ignored"


def print_json(data: Any) -> None:
    """Print data as JSON."""
    console.print_json(json.dumps(data, ensure_ascii=False))


def print_error(message: str, code: str | None = None) -> None:
    """Print error message to stderr.

    Args:
        message: Error message (will be escaped to prevent markup injection)
        code: Optional error code
    """
    text = Text()
    text.append("Error: ", style="bold red")
    text.append(escape(message))
    err_console.print(text)

    if code:
        code_text = Text()
        code_text.append("Code: ", style="dim")
        code_text.append(escape(code), style="yellow")
        err_console.print(code_text)


def print_exception(error: MultiStateError) -> None:
    """Print a library error, listing every violation of a DataValidationError."""
    print_error(error.message, error.code)
    if isinstance(error, DataValidationError):
        for violation in error.violations:
            err_console.print(f"  - {escape(violation.describe())}")


def print_success(message: str) -> None:
    """Print success message.

    Args:
        message: Success message
    """
    text = Text()
    text.append("[OK] ", style="bold green")
    text.append(message)
    console.print(text)


def print_warning(message: str) -> None:
    """Print warning message.

    Args:
        message: Warning message
    """
    text = Text()
    text.append("[WARN] ", style="bold yellow")
    text.append(message)
    console.print(text)


def print_info(message: str) -> None:
    text = Text()
    text.append("[INFO] ", style="bold blue")
    text.append(message)
    console.print(text)


def _num(x: float, digits: int = 4) -> str:
    if x is None or not math.isfinite(float(x)):
        return "[dim]-[/dim]"
    return f"{float(x):.{digits}f}"


def print_curve_table(curve: CurveOutput) -> None:
    """Print a curve as a table, eliding the middle of long curves.

    Args:
        curve: Estimate with standard errors, intervals and band
    """
    meta = curve.metadata
    size = curve.t.size
    if size == 0:
        console.print("Empty curve", style="dim")
        return

    table = Table(title=f"{escape(meta.target)} ({meta.weighting}, {size} grid points)")
    table.add_column("t", style="cyan", justify="right")
    table.add_column("Estimate", justify="right")
    table.add_column("SE", justify="right", style="dim")
    table.add_column("CI", justify="center")
    table.add_column("Band", justify="center", style="green")

    half = CURVE_PREVIEW_ROWS // 2
    rows = list(range(size)) if size <= CURVE_PREVIEW_ROWS else [*range(half), -1, *range(size - half, size)]
    for g in rows:
        if g < 0:
            table.add_row("...", "", "", "", "")
            continue
        band = f"[{_num(curve.band_lo[g])}, {_num(curve.band_hi[g])}]" if curve.domain_flag[g] else ""
        table.add_row(
            _num(curve.t[g]),
            _num(curve.estimate[g]),
            _num(curve.se[g]),
            f"[{_num(curve.ci_lo[g])}, {_num(curve.ci_hi[g])}]",
            band,
        )

    console.print(table)
    if meta.critical_value is not None:
        print_info(
            f"{meta.method.upper()} band, B={meta.reps}, seed={meta.seed}, {meta.transform}, "
            f"c={meta.critical_value:.4f} on [{meta.domain_interval[0]:.4g}, {meta.domain_interval[1]:.4g}]"
            if meta.domain_interval
            else f"{meta.method.upper()} band, c={meta.critical_value:.4f}"
        )
    if meta.markov_only:
        print_warning("s > 0 without landmarking: the estimate is consistent under the Markov assumption only")


def print_test_result(result: TestResult) -> None:
    """Print a two-sample test result as key-value pairs."""
    data = result.to_dict()
    print_key_value(
        {
            "Target": data["target"],
            "Statistic sqrt(n) K": f"{result.scaled_statistic:.4f}",
            "p-value": f"{result.p_value:.4f}",
            "Method": f"{result.method} (B={result.reps}, seed={result.seed})",
            "Weight": data["weight"],
            "Weighting": data["weighting"],
        },
        title="Two-sample test",
    )


def print_assumption_report(report: AssumptionReport) -> None:
    """Print the assumption report: data summary and the documented conditions."""
    print_key_value(
        {
            "Clusters": report.n_clusters,
            "Subjects": report.n_subjects,
            "Cluster size": f"{report.min_cluster_size}..{report.max_cluster_size}",
            "Left truncation": "yes" if report.left_truncated else "no",
            "pi_hat": f"{report.pi_hat:.4f}",
            "Tied grid points": report.tied_grid_points,
            "States with risk-set gaps": ", ".join(map(str, report.states_with_gaps)) or "none",
            "Restricted domain": report.restricted_domain or "not needed",
        },
        title="Data summary",
    )

    table = Table(title="Working assumptions")
    table.add_column("Id", style="cyan")
    table.add_column("Condition", overflow="fold")
    table.add_column("Checked", justify="center")
    for code, text, checkable in report.documented:
        table.add_row(code, escape(text), "[green]Yes[/green]" if checkable else "[dim]No[/dim]")
    console.print(table)


def _naive_caption(methods: Iterable[str]) -> str | None:
    return NAIVE_CAPTION if "naive" in methods else None


def print_study_report(report: StudyReport) -> None:
    """Print one pointwise, band and test table per scenario.

    Args:
        report: Aggregated Monte Carlo study results
    """
    for scenario in report.scenarios:
        header = (
            f"{escape(scenario.name)}: {scenario.replicates} trials, B={scenario.reps}, "
            f"truth={scenario.truth}, {scenario.runtime_seconds:.1f}s"
        )
        console.print(f"[bold]{header}[/bold]")

        if scenario.pointwise:
            table = Table(title="Pointwise", caption=_naive_caption(p.method for p in scenario.pointwise))
            table.add_column("Method", style="cyan")
            table.add_column("Percentile", justify="right")
            table.add_column("Bias", justify="right")
            table.add_column("MCSD", justify="right")
            table.add_column("ASE", justify="right")
            table.add_column("CP", justify="right", style="green")
            for p in scenario.pointwise:
                table.add_row(p.method, f"{p.percentile:g}", _num(p.bias), _num(p.mcsd), _num(p.ase), _num(p.cp, 3))
            console.print(table)

        if scenario.bands:
            table = Table(title="Simultaneous bands", caption=_naive_caption(b.method for b in scenario.bands))
            table.add_column("Method", style="cyan")
            table.add_column("Coverage", justify="right", style="green")
            for b in scenario.bands:
                table.add_row(b.method, _num(b.coverage, 3))
            console.print(table)

        if scenario.tests:
            table = Table(title="Two-sample tests")
            table.add_column("Method", style="cyan")
            table.add_column("Hypothesis")
            table.add_column("Rejection rate", justify="right", style="green")
            for t in scenario.tests:
                table.add_row(t.method, t.hypothesis, _num(t.rejection_rate, 3))
            console.print(table)


def print_key_value(data: dict[str, Any], title: str | None = None) -> None:
    """Print dict as key-value pairs.

    Args:
        data: Dict to display
        title: Optional title
    """
    if title:
        console.print(f"[bold]{escape(title)}[/bold]")

    for key, value in data.items():
        console.print(f"  [cyan]{escape(str(key))}:[/cyan] {escape(str(value))}")
